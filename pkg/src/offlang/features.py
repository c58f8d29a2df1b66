"""Binary container for per-example feature vectors, plus alignment/concat.

OFSFEAT1 layout, little-endian throughout, no padding or footer:

    magic        8 bytes ASCII "OFSFEAT1"
    name_len     u32
    model_name   name_len bytes UTF-8
    dim          u32
    record_count u64
    records      record_count x [example_id u64][dim x f32]

Values are stored as 32-bit floats; inputs are rounded to nearest-even at
construction so a write/read round-trip is bit-exact.  Records are written
in ascending id order, making files byte-deterministic.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    DataError,
    DuplicateId,
    EmptyIntersection,
    NonFiniteValue,
    TruncatedFile,
)

MAGIC = b"OFSFEAT1"

log = logging.getLogger(__name__)


@dataclass
class FeatureSet:
    """Fixed-dimension float32 vectors keyed by example id, tagged with a model name."""

    model_name: str
    dim: int
    records: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        coerced = {}
        for example_id, vec in self.records.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise DataError(
                    f"record {example_id}: vector shape {arr.shape} != ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise NonFiniteValue(f"record {example_id}: non-finite value")
            coerced[int(example_id)] = arr
        self.records = coerced

    def __eq__(self, other):
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (
            self.model_name == other.model_name
            and self.dim == other.dim
            and self.records.keys() == other.records.keys()
            and all(self.records[i].tobytes() == other.records[i].tobytes() for i in self.records)
        )


@dataclass
class AlignedFeatures:
    """Row-wise concatenation of several FeatureSets over their shared ids."""

    model_names: list[str]
    dim_total: int
    ids: list[int]
    matrix: np.ndarray  # shape (len(ids), dim_total), float32
    dropped: int = 0


def write_features(path, feature_set: FeatureSet) -> None:
    name = feature_set.model_name.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(name)))
        fh.write(name)
        fh.write(struct.pack("<I", feature_set.dim))
        fh.write(struct.pack("<Q", len(feature_set.records)))
        for example_id in sorted(feature_set.records):
            fh.write(struct.pack("<Q", example_id))
            fh.write(feature_set.records[example_id].astype("<f4", copy=False).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFile(f"unexpected EOF while reading {what}")
    return buf


def read_features(path) -> FeatureSet:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {magic!r}")
        (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
        name = _read_exact(fh, name_len, "model name").decode("utf-8")
        (dim,) = struct.unpack("<I", _read_exact(fh, 4, "dim"))
        if dim == 0:
            raise DataError(f"{path}: dim must be positive")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "record count"))
        records: dict[int, np.ndarray] = {}
        vec_bytes = 4 * dim
        for ordinal in range(count):
            (example_id,) = struct.unpack(
                "<Q", _read_exact(fh, 8, f"id of record {ordinal}")
            )
            raw = _read_exact(fh, vec_bytes, f"vector of record {ordinal}")
            vec = np.frombuffer(raw, dtype="<f4").astype(np.float32, copy=True)
            if not np.all(np.isfinite(vec)):
                raise NonFiniteValue(f"{path}: non-finite value in record {ordinal}")
            if example_id in records:
                raise DuplicateId(f"{path}: duplicate example id {example_id}")
            records[example_id] = vec
        trailing = fh.read(1)
        if trailing:
            raise DataError(f"{path}: trailing bytes after last record")
    return FeatureSet(model_name=name, dim=dim, records=records)


def align_concat(sets: list[FeatureSet]) -> AlignedFeatures:
    """Concatenate feature vectors over the sorted intersection of ids.

    Ids missing from any input are dropped; the total number of dropped
    records across inputs is reported in the result and logged.
    """
    if not sets:
        raise ConfigError("align_concat needs at least one FeatureSet")
    shared = set(sets[0].records)
    for fs in sets[1:]:
        shared &= fs.records.keys()
    if not shared:
        raise EmptyIntersection(
            "no example id is present in all feature sets: "
            + ", ".join(f"{fs.model_name}({len(fs.records)})" for fs in sets)
        )
    ids = sorted(shared)
    dims = [fs.dim for fs in sets]
    dim_total = sum(dims)
    matrix = np.empty((len(ids), dim_total), dtype=np.float32)
    for row, example_id in enumerate(ids):
        offset = 0
        for fs, dim in zip(sets, dims):
            matrix[row, offset:offset + dim] = fs.records[example_id]
            offset += dim
    dropped = sum(len(fs.records) - len(ids) for fs in sets)
    if dropped:
        log.warning("align_concat dropped %d record(s) not shared by all sets", dropped)
    return AlignedFeatures(
        model_names=[fs.model_name for fs in sets],
        dim_total=dim_total,
        ids=ids,
        matrix=matrix,
        dropped=dropped,
    )
