"""Comparison combiners: soft majority voting and a logistic-regression stacker.

The stacker is a single affine layer plus sigmoid/softmax trained with the
same weighted-loss Adam loop and early stopping as the aggregation head,
on the concatenation of the members' probability vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import mlp
from .corpus import ClassWeights
from .errors import ConfigError, DataError, IdMismatch, MemberOrderMismatch

_SUM_TOL = 1e-6


@dataclass
class MemberProbabilities:
    """Per-example probability vectors from several member classifiers.

    All members must cover the same id set; binary members contribute
    (1-p, p) rows.  tensor has shape (n_members, n_examples, n_classes)
    with examples ordered by ascending id.
    """

    member_names: list[str]
    ids: list[int]
    tensor: np.ndarray

    @classmethod
    def from_members(
        cls, members: Sequence[tuple[str, Mapping[int, np.ndarray]]]
    ) -> "MemberProbabilities":
        if not members:
            raise ConfigError("need at least one member")
        names = [name for name, _ in members]
        ids = sorted(members[0][1])
        id_set = set(ids)
        for name, table in members:
            if set(table) != id_set:
                raise IdMismatch(f"member {name!r} covers a different id set")
        n_classes = len(next(iter(members[0][1].values())))
        tensor = np.empty((len(members), len(ids), n_classes), dtype=np.float64)
        for m, (name, table) in enumerate(members):
            for row, example_id in enumerate(ids):
                vec = np.asarray(table[example_id], dtype=np.float64)
                if vec.shape != (n_classes,):
                    raise DataError(
                        f"member {name!r}, id {example_id}: expected {n_classes} classes"
                    )
                if abs(vec.sum() - 1.0) > _SUM_TOL:
                    raise DataError(
                        f"member {name!r}, id {example_id}: probabilities sum to {vec.sum()}"
                    )
                tensor[m, row] = vec
        return cls(member_names=names, ids=ids, tensor=tensor)

    @property
    def n_classes(self) -> int:
        return self.tensor.shape[2]


@dataclass
class StackerParams:
    member_names: list[str]
    classes: tuple[str, ...]
    params: mlp.MlpParams
    arch: mlp.MlpArchitecture
    trained: bool = False


def soft_vote(
    probs: MemberProbabilities, member_weights: Sequence[float] | None = None
) -> dict[int, np.ndarray]:
    """Weighted arithmetic mean of member probability vectors per id.

    Weights default to uniform; they are normalized, so only ratios matter.
    """
    n_members = len(probs.member_names)
    if member_weights is None:
        w = np.full(n_members, 1.0 / n_members)
    else:
        w = np.asarray(member_weights, dtype=np.float64)
        if w.shape != (n_members,):
            raise ConfigError(f"{len(w)} weights for {n_members} members")
        if np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("member weights must be non-negative with positive sum")
        w = w / w.sum()
    averaged = np.tensordot(w, probs.tensor, axes=(0, 0))
    return {example_id: averaged[row] for row, example_id in enumerate(probs.ids)}


def _stack_inputs(probs: MemberProbabilities) -> np.ndarray:
    n_members, n_examples, n_classes = probs.tensor.shape
    return probs.tensor.transpose(1, 0, 2).reshape(n_examples, n_members * n_classes)


def train_stacker(
    probs: MemberProbabilities,
    labels: Mapping[int, str],
    weights: ClassWeights | Sequence[float],
    config: mlp.TrainConfig,
    classes: Sequence[str],
    train_fraction: float = 0.9,
) -> StackerParams:
    """Fit the logistic-regression meta-model on member probabilities.

    An internal seeded split provides the validation set that drives early
    stopping, mirroring the head-training protocol.
    """
    missing = [i for i in probs.ids if i not in labels]
    if missing:
        raise IdMismatch(f"labels missing for ids {missing[:5]}")
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.array([class_index[labels[i]] for i in probs.ids], dtype=np.int64)
    x = _stack_inputs(probs)

    binary = len(classes) == 2
    arch = mlp.MlpArchitecture(
        input_dim=x.shape[1],
        output_dim=1 if binary else len(classes),
        hidden=(),
        dropout_rate=0.0,
    )
    class_weight = weights.vector(classes) if isinstance(weights, ClassWeights) else list(weights)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(x))
    n_train = max(1, int(len(x) * train_fraction))
    if n_train == len(x):
        n_train = len(x) - 1
    if n_train < 1:
        raise ConfigError("not enough examples to split off a validation set")
    tr, va = order[:n_train], order[n_train:]
    result = mlp.train(arch, x[tr], y[tr], x[va], y[va], class_weight, config)
    return StackerParams(
        member_names=list(probs.member_names),
        classes=tuple(classes),
        params=result.params,
        arch=arch,
        trained=True,
    )


def stack_predict(params: StackerParams, probs: MemberProbabilities) -> dict[int, np.ndarray]:
    """Apply the trained meta-model; member order must match training order."""
    if probs.member_names != params.member_names:
        raise MemberOrderMismatch(
            f"members {probs.member_names} != trained order {params.member_names}"
        )
    if not params.trained:
        raise DataError("stacker params are untrained")
    x = _stack_inputs(probs)
    out, _ = mlp.forward(params.params, params.arch, x)
    if params.arch.binary:
        p = np.atleast_1d(out)
        matrix = np.stack([1.0 - p, p], axis=1)
    else:
        matrix = np.atleast_2d(out)
    return {example_id: matrix[row] for row, example_id in enumerate(probs.ids)}


def save_stacker(path, stacker: StackerParams) -> None:
    """Persist a stacker: one JSON header line, then the dense checkpoint blob."""
    header = {
        "member_names": stacker.member_names,
        "classes": list(stacker.classes),
        "trained": stacker.trained,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        mlp.write_checkpoint(fh, stacker.params, stacker.arch)


def load_stacker(path) -> StackerParams:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        params, arch = mlp.read_checkpoint(fh)
    return StackerParams(
        member_names=list(header["member_names"]),
        classes=tuple(header["classes"]),
        params=params,
        arch=arch,
        trained=bool(header["trained"]),
    )


def write_prob_file(path, member_name: str, probs: Mapping[int, np.ndarray]) -> None:
    """Probability exchange TSV: '#member=<name>' line, then id and per-class columns."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#member={member_name}\n")
        for example_id in sorted(probs):
            vec = np.asarray(probs[example_id], dtype=np.float64)
            cols = "\t".join(format(p, ".17g") for p in vec)
            fh.write(f"{example_id}\t{cols}\n")


def read_prob_file(path) -> tuple[str, dict[int, np.ndarray]]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("#member="):
            raise DataError(f"{path}: missing '#member=<name>' header line")
        name = first[len("#member="):]
        table: dict[int, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected id and >=2 probability columns")
            table[int(parts[0])] = np.array([float(p) for p in parts[1:]], dtype=np.float64)
    return name, table
