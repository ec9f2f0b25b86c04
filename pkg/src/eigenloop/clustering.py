"""KMeans with immovable anchor centers, eigen-sample selection, and
extrinsic clustering quality (BCubed precision).

Anchor centers are the features of already-labeled samples. They absorb
nearby samples but never move; only the K free centers are re-estimated,
so each free cluster ends up representing a region the labeled set does
not cover yet.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .core import EmbeddingSet, LabeledSet, SampleId, save_embeddings, substream
from .errors import ConfigError, ContractError, DataError, DegenerateInputError, ShapeError

INIT_MODES = ("random-sample", "kmeans++")
EMPTY_POLICIES = ("respawn-farthest", "drop")


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Fixed cluster centers: feature vectors of labeled samples."""

    vectors: np.ndarray
    origin_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        v = np.array(self.vectors, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ShapeError("anchor vectors must be a 2-D matrix")
        ids = tuple(int(i) for i in self.origin_ids)
        if v.shape[0] != len(ids):
            raise ShapeError(f"{len(ids)} origin ids for {v.shape[0]} anchor rows")
        if not np.isfinite(v).all():
            raise DataError("non-finite anchor vectors")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "origin_ids", ids)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def empty(cls, dim: int) -> "AnchorSet":
        return cls(np.empty((0, dim)), ())

    @classmethod
    def from_labeled(cls, features: EmbeddingSet, labeled: LabeledSet) -> "AnchorSet":
        ids = tuple(labeled.ids())
        return cls(features.rows(ids), ids)


@dataclass(frozen=True)
class KMeansConfig:
    t_max: int = 100
    init: str = "random-sample"
    empty_policy: str = "respawn-farthest"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.empty_policy not in EMPTY_POLICIES:
            raise ConfigError(
                f"empty_policy must be one of {EMPTY_POLICIES}, got {self.empty_policy!r}"
            )


@dataclass(eq=False)
class ClusterState:
    """Result of a constrained clustering run.

    ``centers`` rows [0, anchor_count) are the anchors, bit-identical to the
    input; the remaining ``new_count`` rows are the learned free centers.
    ``inertia_trace`` records the objective after each iteration.
    """

    centers: np.ndarray
    assignment: np.ndarray
    anchor_count: int
    new_count: int
    inertia_trace: list[float] = field(default_factory=list)

    @property
    def total_clusters(self) -> int:
        return self.anchor_count + self.new_count


def _dists_sq(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Exact per-pair squared distances, N x centers."""
    out = np.empty((x.shape[0], centers.shape[0]))
    for j in range(centers.shape[0]):
        diff = x - centers[j]
        out[:, j] = np.einsum("nd,nd->n", diff, diff)
    return out


def kmeans_pp_init(
    f: EmbeddingSet, k: int, existing: AnchorSet, seed: int
) -> np.ndarray:
    """Distance-squared weighted seeding of K new centers.

    Weights measure the distance to the nearest of the existing anchors and
    the inits already chosen; with no anchors the first pick is uniform.
    """
    x = f.data
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if existing.m and existing.vectors.shape[1] != f.dim:
        raise ShapeError("anchor dimension does not match embeddings")
    g = substream(seed, "kmeanspp")
    chosen: list[np.ndarray] = []
    if existing.m == 0:
        chosen.append(x[int(g.integers(f.n))].copy())
    while len(chosen) < k:
        ref = np.vstack([existing.vectors, *chosen]) if chosen or existing.m else None
        d2 = _dists_sq(x, ref).min(axis=1)
        total = float(d2.sum())
        if total == 0.0:
            if existing.m:
                raise DegenerateInputError("all points coincide with existing anchors")
            idx = int(g.integers(f.n))
        else:
            idx = int(g.choice(f.n, p=d2 / total))
        chosen.append(x[idx].copy())
    return np.array(chosen)


def ackmeans(
    f: EmbeddingSet,
    k: int,
    anchors: AnchorSet,
    cfg: KMeansConfig,
    init_centers: np.ndarray | None = None,
) -> ClusterState:
    """Lloyd iterations where the first m centers never move.

    Every sample is assigned to the nearest of all m+K centers (ties go to
    the lowest center index); only the K free centers are re-estimated, as
    the mean of the samples assigned to them. Stops at ``t_max`` iterations
    or when assignments reach a fixed point.
    """
    x = f.data
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > f.n:
        raise ConfigError(f"k={k} exceeds sample count {f.n}")
    if anchors.m and anchors.vectors.shape[1] != f.dim:
        raise ShapeError("anchor dimension does not match embeddings")
    m = anchors.m

    if init_centers is not None:
        init_centers = np.asarray(init_centers, dtype=np.float64)
        if init_centers.shape != (k, f.dim):
            raise ShapeError(f"init_centers must be ({k}, {f.dim})")
        free = init_centers.copy()
    elif cfg.init == "kmeans++":
        free = kmeans_pp_init(f, k, anchors, cfg.seed)
    else:
        g = substream(cfg.seed, "ackmeans/init")
        free = x[g.choice(f.n, size=k, replace=False)].copy()

    centers = np.vstack([anchors.vectors, free]) if m else free
    assignment: np.ndarray | None = None
    trace: list[float] = []
    moved_empty = False
    live = k  # free centers still present (drop policy may remove some)

    for _ in range(cfg.t_max):
        d2 = _dists_sq(x, centers)
        new_assignment = d2.argmin(axis=1)
        converged = (
            assignment is not None
            and not moved_empty
            and np.array_equal(new_assignment, assignment)
        )
        assignment = new_assignment
        if converged:
            break

        moved_empty = False
        nearest = d2.min(axis=1)
        drop: list[int] = []
        for j in range(m, m + live):
            members = x[assignment == j]
            if members.shape[0] == 0:
                if cfg.empty_policy == "respawn-farthest":
                    centers[j] = x[int(nearest.argmax())]
                    moved_empty = True
                else:
                    drop.append(j)
            else:
                centers[j] = members.mean(axis=0)
        if drop:
            keep = np.array([j for j in range(centers.shape[0]) if j not in drop])
            centers = centers[keep]
            remap = np.full(m + live, -1, dtype=np.int64)
            remap[keep] = np.arange(keep.size)
            assignment = remap[assignment]
            live -= len(drop)
            moved_empty = True
        trace.append(float(_dists_sq(x, centers)[np.arange(f.n), assignment].sum()))

    assert assignment is not None
    if m:
        centers[:m] = anchors.vectors  # defensive: anchors pass through untouched
    return ClusterState(centers, assignment.astype(np.int64), m, live, trace)


def inertia(f: EmbeddingSet, state: ClusterState) -> float:
    """Sum of squared distances from each sample to its assigned center."""
    if state.centers.shape[1] != f.dim:
        raise ShapeError("center dimension does not match embeddings")
    diff = f.data - state.centers[state.assignment]
    return float(np.einsum("nd,nd->n", diff, diff).sum())


class EigenSelection(NamedTuple):
    picks: list[tuple[int, SampleId]]  # (free cluster index, sample id)
    skipped: list[int]  # free clusters that were empty or fully labeled


def select_eigen_samples(
    f: EmbeddingSet, state: ClusterState, already_labeled: Iterable[SampleId]
) -> EigenSelection:
    """Most representative unlabeled member of each free cluster.

    Representative = nearest to the cluster center by squared Euclidean
    distance; ties break toward the smallest sample id. Clusters whose
    members are all labeled (or empty) are skipped and reported.
    """
    if state.new_count < 1:
        raise ContractError("no free clusters to select from")
    labeled = set(int(i) for i in already_labeled)
    ids = np.array(f.ids)
    picks: list[tuple[int, SampleId]] = []
    skipped: list[int] = []
    for j in range(state.anchor_count, state.anchor_count + state.new_count):
        member_idx = np.flatnonzero(state.assignment == j)
        member_idx = member_idx[[int(ids[i]) not in labeled for i in member_idx]]
        if member_idx.size == 0:
            skipped.append(j)
            continue
        diff = f.data[member_idx] - state.centers[j]
        d2 = np.einsum("nd,nd->n", diff, diff)
        best = d2.min()
        tied = member_idx[d2 == best]
        picks.append((j, int(ids[tied].min())))
    return EigenSelection(picks, skipped)


def bcubed_precision(assignment: Mapping[SampleId, int], truth: LabeledSet) -> float:
    """Mean over samples of (same-true-label members of its cluster) / (cluster size)."""
    if not assignment:
        raise DataError("empty assignment")
    by_cluster: dict[int, list[int]] = {}
    for sid, cluster in assignment.items():
        if sid not in truth:
            raise DataError(f"sample {sid} has no true label")
        by_cluster.setdefault(int(cluster), []).append(truth.label(sid))
    total = 0.0
    for labels in by_cluster.values():
        counts = Counter(labels)
        size = len(labels)
        total += sum(counts[lab] / size for lab in labels)
    return total / len(assignment)


def export_cluster_state(
    f: EmbeddingSet, state: ClusterState, csv_path: str | Path, centers_path: str | Path
) -> None:
    """CSV of per-sample assignments plus the centers in EMB1."""
    lines = ["sample_id,cluster,is_anchor_cluster\n"]
    for sid, cluster in zip(f.ids, state.assignment):
        lines.append(f"{sid},{int(cluster)},{int(cluster) < state.anchor_count}\n")
    Path(csv_path).write_text("".join(lines), encoding="utf-8")
    centers = EmbeddingSet(tuple(range(state.centers.shape[0])), state.centers)
    save_embeddings(centers, centers_path)
