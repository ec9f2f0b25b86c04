"""Numeric primitives shared by every module.

Embedding storage, labeled sets, named deterministic random streams, basic
vector operations, and the EMB1 on-disk format. All arithmetic is 64-bit;
the storage format is 32-bit (widened on load).
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, FormatError, ShapeError

SampleId = int

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
_HEADER = struct.Struct("<III")  # version, n, d

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class RngStream:
    """A named deterministic random stream.

    Equal (seed, label) pairs yield identical draw sequences on every
    platform. Modules derive their own substreams by label, so adding a new
    consumer never perturbs the draws seen by an existing one.
    """

    seed: int
    label: str

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        digest = hashlib.sha256(self.label.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        ss = np.random.SeedSequence([self.seed & _SEED_MASK, *words])
        return np.random.Generator(np.random.PCG64(ss))


def substream(seed: int, label: str) -> np.random.Generator:
    return RngStream(seed, label).generator()


def derive_seed(seed: int, label: str) -> int:
    """Stable 63-bit integer seed derived from (seed, label)."""
    return int(substream(seed, label).integers(0, 1 << 63))


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """N samples of D-dimensional features plus their sample ids.

    Immutable after construction; ``data`` is a read-only float64 array.
    When ``normalized`` is set every row has unit Euclidean norm.
    """

    ids: tuple[int, ...]
    data: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True, order="C")
        if arr.ndim != 2:
            raise ShapeError(f"embedding data must be 2-D, got ndim={arr.ndim}")
        ids = tuple(int(i) for i in self.ids)
        if arr.shape[0] != len(ids):
            raise ShapeError(f"{len(ids)} ids for {arr.shape[0]} rows")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise DataError("empty embedding set")
        if any(i < 0 for i in ids):
            raise DataError("sample ids must be non-negative")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate sample ids")
        if not np.isfinite(arr).all():
            raise DataError("non-finite embedding values")
        if self.normalized:
            norms = np.linalg.norm(arr, axis=1)
            if np.abs(norms - 1.0).max() > 1e-9:
                raise DataError("normalized flag set but rows are not unit-norm")
        arr.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "_index", {i: k for k, i in enumerate(ids)})

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def row(self, sample_id: SampleId) -> np.ndarray:
        try:
            return self.data[self._index[sample_id]]  # type: ignore[attr-defined]
        except KeyError:
            raise DataError(f"unknown sample id {sample_id}") from None

    def rows(self, sample_ids: Iterable[SampleId]) -> np.ndarray:
        idx = self._index  # type: ignore[attr-defined]
        try:
            sel = [idx[i] for i in sample_ids]
        except KeyError as exc:
            raise DataError(f"unknown sample id {exc.args[0]}") from None
        return self.data[sel]

    def has_id(self, sample_id: SampleId) -> bool:
        return sample_id in self._index  # type: ignore[attr-defined]

    def with_ids(self, ids: Sequence[SampleId]) -> "EmbeddingSet":
        """Same data under a different id assignment."""
        return EmbeddingSet(tuple(ids), self.data, self.normalized)


class LabeledSet:
    """Grow-only map from sample id to a class index in [0, num_classes)."""

    def __init__(self, num_classes: int, entries: Mapping[SampleId, int] | None = None):
        if num_classes < 1:
            raise DataError(f"num_classes must be positive, got {num_classes}")
        self.num_classes = int(num_classes)
        self._entries: dict[int, int] = {}
        if entries:
            for sid, label in entries.items():
                self.add(sid, label)

    def add(self, sample_id: SampleId, label: int) -> None:
        sid, label = int(sample_id), int(label)
        if sid < 0:
            raise DataError(f"sample id must be non-negative, got {sid}")
        if not 0 <= label < self.num_classes:
            raise DataError(f"label {label} out of range [0, {self.num_classes})")
        if sid in self._entries:
            raise DataError(f"sample {sid} is already labeled")
        self._entries[sid] = label

    def label(self, sample_id: SampleId) -> int:
        try:
            return self._entries[int(sample_id)]
        except KeyError:
            raise DataError(f"sample {sample_id} has no label") from None

    def __contains__(self, sample_id: object) -> bool:
        return int(sample_id) in self._entries  # type: ignore[call-overload]

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> list[int]:
        return sorted(self._entries)

    def items_sorted(self) -> list[tuple[int, int]]:
        return sorted(self._entries.items())

    def as_dict(self) -> dict[int, int]:
        return dict(self._entries)

    def copy(self) -> "LabeledSet":
        return LabeledSet(self.num_classes, self._entries)


# ---------------------------------------------------------------------------
# vector operations
# ---------------------------------------------------------------------------


def normalize_rows(e: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm.

    Zero rows are rejected (the error names the offending sample id).
    """
    norms = np.linalg.norm(e.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError(f"zero row for sample id {e.ids[zero[0]]}")
    return EmbeddingSet(e.ids, e.data / norms[:, None], normalized=True)


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    return arr


def cosine_sim(u, v) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a, b = _as_vector(u, "u"), _as_vector(v, "v")
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def sq_euclidean(u, v) -> float:
    a, b = _as_vector(u, "u"), _as_vector(v, "v")
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    d = a - b
    return float(np.dot(d, d))


# ---------------------------------------------------------------------------
# EMB1 container and sidecars
# ---------------------------------------------------------------------------


def save_embeddings(e: EmbeddingSet, path: str | Path) -> None:
    """Write the matrix in the EMB1 container (float32 little-endian)."""
    data32 = e.data.astype("<f4")
    if not np.isfinite(data32).all():
        raise DataError("values overflow 32-bit storage")
    blob = EMB_MAGIC + _HEADER.pack(EMB_VERSION, e.n, e.dim) + data32.tobytes(order="C")
    Path(path).write_bytes(blob)


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or 'cannot read'}") from None


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or 'cannot read'}") from None


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an EMB1 file; ids are assigned positionally (0..N-1)."""
    blob = _read_bytes(path)
    if len(blob) < 4 + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    if blob[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    version, n, d = _HEADER.unpack_from(blob, 4)
    if version != EMB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if n == 0 or d == 0:
        raise DataError(f"{path}: empty matrix ({n}x{d})")
    expected = 4 + _HEADER.size + 4 * n * d
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    raw = np.frombuffer(blob, dtype="<f4", offset=4 + _HEADER.size)
    data = raw.astype(np.float64).reshape(n, d)
    if not np.isfinite(data).all():
        raise DataError(f"{path}: non-finite payload values")
    return EmbeddingSet(tuple(range(n)), data, normalized=False)


def save_labels(labels: LabeledSet, path: str | Path) -> None:
    """Write the label sidecar: one "id,classIndex" line per sample."""
    lines = [f"{sid},{label}\n" for sid, label in labels.items_sorted()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_labels(path: str | Path, num_classes: int | None = None) -> LabeledSet:
    """Read a label sidecar. ``num_classes`` defaults to max label + 1."""
    pairs: list[tuple[int, int]] = []
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'id,classIndex'")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: expected 'id,classIndex'") from None
    if not pairs:
        raise DataError(f"{path}: no labels")
    if num_classes is None:
        num_classes = max(label for _, label in pairs) + 1
    out = LabeledSet(num_classes)
    for sid, label in pairs:
        out.add(sid, label)
    return out


def load_embeddings_csv(path: str | Path) -> EmbeddingSet:
    """Import from CSV with header "id,f0,f1,...", one sample per line."""
    with io.StringIO(_read_text(path)) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip() != "id":
            raise FormatError(f"{path}: header must be 'id,f0,f1,...'")
        ids: list[int] = []
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                ids.append(int(rec[0]))
                rows.append([float(x) for x in rec[1:]])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed value") from None
    if not rows:
        raise DataError(f"{path}: no samples")
    return EmbeddingSet(tuple(ids), np.array(rows, dtype=np.float64))
