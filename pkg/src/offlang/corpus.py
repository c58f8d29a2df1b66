"""Dataset ingestion, confidence thresholding, splitting, and class weighting.

Supports the gold-labeled 2019 TSV layout (id, tweet, subtask_a, subtask_b,
subtask_c) and the 2020 confidence-scored layout (id, text, average, std).
The confidence reader is a generator so multi-million-row files stream
through in one pass with bounded memory.
"""

from __future__ import annotations

import csv
import enum
import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ConfigError, EmptyClass, MalformedRow, UnknownLabel

SUBTASK_LABELS: dict[str, tuple[str, ...]] = {
    "A": ("NOT", "OFF"),
    "C": ("IND", "GRP", "OTH"),
}

_OLID_LABEL_COLUMNS = {"A": "subtask_a", "B": "subtask_b", "C": "subtask_c"}


def subtask_labels(subtask: str) -> tuple[str, ...]:
    try:
        return SUBTASK_LABELS[subtask.upper()]
    except KeyError:
        raise ConfigError(f"unknown subtask {subtask!r}; expected A or C") from None


class Source(enum.Enum):
    GOLD = "gold"
    THRESHOLDED = "thresholded"


@dataclass(frozen=True)
class LabeledExample:
    id: int
    text: str
    label: str
    source: Source = Source.GOLD


@dataclass(frozen=True)
class ConfidenceRecord:
    id: int
    text: str
    avg_conf: float

    def __post_init__(self):
        if not 0.0 <= self.avg_conf <= 1.0:
            raise ConfigError(f"avg_conf out of [0, 1]: {self.avg_conf}")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1): {self.train_fraction}")


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights w = 1 / (N * C_i).

    Each class contributes counts[c] * weights[c] = 1/N, so the classes are
    equally important to the loss regardless of size.
    """

    weights: dict[str, float]
    counts: dict[str, int]
    n_classes: int

    def vector(self, class_order: Iterable[str]) -> list[float]:
        return [self.weights[c] for c in class_order]


def load_gold(path, subtask: str) -> list[LabeledExample]:
    """Read a gold-labeled TSV, keeping rows with a non-null label for subtask."""
    labels = subtask_labels(subtask)
    column = _OLID_LABEL_COLUMNS[subtask.upper()]
    examples = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            return examples
        try:
            id_col = header.index("id")
            text_col = header.index("tweet")
            label_col = header.index(column)
        except ValueError:
            raise MalformedRow(f"{path}: header missing id/tweet/{column} columns") from None
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    f"{path}:{rowno}: expected {len(header)} columns, got {len(row)}"
                )
            raw = row[label_col].strip()
            if not raw or raw.upper() == "NULL":
                continue
            label = raw.upper()
            if label not in labels:
                raise UnknownLabel(f"{path}:{rowno}: {raw!r} not in {labels}")
            examples.append(LabeledExample(id=int(row[id_col]), text=row[text_col], label=label))
    return examples


def iter_confidence(path, conf_column: str = "average") -> Iterator[ConfidenceRecord]:
    """Stream confidence-scored rows (single pass, bounded memory)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            return
        try:
            id_col = header.index("id")
            text_col = header.index("text")
            conf_col = header.index(conf_column)
        except ValueError:
            raise MalformedRow(f"{path}: header missing id/text/{conf_column} columns") from None
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    f"{path}:{rowno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                conf = float(row[conf_col])
            except ValueError:
                raise MalformedRow(f"{path}:{rowno}: bad confidence {row[conf_col]!r}") from None
            yield ConfidenceRecord(id=int(row[id_col]), text=row[text_col], avg_conf=conf)


def threshold_record(record: ConfidenceRecord, threshold: float = 0.4) -> LabeledExample:
    """Map one confidence score to an OFF/NOT label (avg_conf >= threshold -> OFF)."""
    label = "OFF" if record.avg_conf >= threshold else "NOT"
    return LabeledExample(id=record.id, text=record.text, label=label, source=Source.THRESHOLDED)


def threshold_labels(
    records: Iterable[ConfidenceRecord], threshold: float = 0.4
) -> list[LabeledExample]:
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1): {threshold}")
    return [threshold_record(r, threshold) for r in records]


def class_weights(examples: Iterable[LabeledExample], subtask: str) -> ClassWeights:
    """Cost-sensitive weights w = 1/(N * C_i) over the subtask's full label enum."""
    labels = subtask_labels(subtask)
    counts = {c: 0 for c in labels}
    for ex in examples:
        if ex.label not in counts:
            raise UnknownLabel(f"label {ex.label!r} not in subtask {subtask} enum {labels}")
        counts[ex.label] += 1
    missing = [c for c, n in counts.items() if n == 0]
    if missing:
        raise EmptyClass(f"no examples for class(es) {missing}; weighting undefined")
    n = len(labels)
    weights = {c: 1.0 / (n * counts[c]) for c in labels}
    total = sum(counts[c] * weights[c] for c in labels)
    assert math.isclose(total, 1.0, abs_tol=1e-9)
    return ClassWeights(weights=weights, counts=counts, n_classes=n)


def split(
    examples: list[LabeledExample], spec: SplitSpec
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Deterministic seeded shuffle, first floor(n * fraction) rows to train."""
    if not examples:
        raise ConfigError("cannot split an empty example list")
    shuffled = list(examples)
    random.Random(spec.seed).shuffle(shuffled)
    n_train = int(len(shuffled) * spec.train_fraction)
    return shuffled[:n_train], shuffled[n_train:]
