"""Synthetic source/target populations with controllable class structure
and domain shift, standing in for large-scale image datasets at desk scale."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EmbeddingSet, LabeledSet, substream
from .errors import ConfigError, ShapeError

_MIN_CENTER_SEPARATION = 1e-6


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian mixture: one seeded random center per class."""

    classes: int
    per_class: int
    dim: int
    center_scale: float
    noise_sigma: float
    seed: int

    def __post_init__(self) -> None:
        if self.classes < 1:
            raise ConfigError(f"classes must be positive, got {self.classes}")
        if self.per_class < 1:
            raise ConfigError(f"per_class must be >= 1, got {self.per_class}")
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if self.center_scale <= 0:
            raise ConfigError(f"center_scale must be positive, got {self.center_scale}")
        if self.noise_sigma <= 0:
            raise ConfigError(f"noise_sigma must be positive, got {self.noise_sigma}")


def class_centers(spec: MixtureSpec) -> np.ndarray:
    """Seeded class centers of norm == center_scale, pairwise separated.

    Depends only on (seed, classes, dim, center_scale), so specs that differ
    in sample counts or noise share the same centers.
    """
    g = substream(spec.seed, "synth/centers")
    centers = np.empty((spec.classes, spec.dim))
    for c in range(spec.classes):
        while True:
            v = g.normal(size=spec.dim)
            v *= spec.center_scale / np.linalg.norm(v)
            if c == 0 or np.linalg.norm(centers[:c] - v, axis=1).min() >= _MIN_CENTER_SEPARATION:
                centers[c] = v
                break
    return centers


def gen_mixture(spec: MixtureSpec, split: str = "") -> tuple[EmbeddingSet, LabeledSet]:
    """Draw classes*per_class samples plus their ground-truth labels.

    ``split`` only relabels the noise stream: splits share class centers but
    draw independent noise, which is how train/test populations of the same
    domain are produced.
    """
    centers = class_centers(spec)
    g = substream(spec.seed, f"synth/noise/{split}")
    n = spec.classes * spec.per_class
    data = np.empty((n, spec.dim))
    labels = LabeledSet(spec.classes)
    for c in range(spec.classes):
        lo = c * spec.per_class
        data[lo : lo + spec.per_class] = centers[c] + spec.noise_sigma * g.normal(
            size=(spec.per_class, spec.dim)
        )
        for i in range(lo, lo + spec.per_class):
            labels.add(i, c)
    return EmbeddingSet(tuple(range(n)), data), labels


@dataclass(frozen=True, eq=False)
class DomainShift:
    """Affine domain shift x -> scale * R x + translation.

    R is orthogonal with determinant 1; the shipped constructor rotates in
    one seeded random 2-plane so the shift is parameterized by a single
    interpretable angle.
    """

    rotation: np.ndarray
    translation: np.ndarray
    scale: float

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=np.float64, copy=True)
        t = np.array(self.translation, dtype=np.float64, copy=True)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ShapeError("rotation must be a square matrix")
        if t.shape != (r.shape[0],):
            raise ShapeError("translation dimension does not match rotation")
        if self.scale <= 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if np.abs(r @ r.T - np.eye(r.shape[0])).max() > 1e-9:
            raise ConfigError("rotation is not orthogonal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ConfigError("rotation determinant is not 1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "DomainShift":
        return cls(np.eye(dim), np.zeros(dim), 1.0)

    @classmethod
    def in_random_plane(
        cls,
        dim: int,
        angle: float,
        translation: np.ndarray | None = None,
        scale: float = 1.0,
        seed: int = 0,
    ) -> "DomainShift":
        """Rotation by ``angle`` in a seeded random 2-plane of the space."""
        g = substream(seed, "synth/shift-plane")
        u = g.normal(size=dim)
        u /= np.linalg.norm(u)
        while True:
            v = g.normal(size=dim)
            v -= (v @ u) * u
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                v /= nv
                break
        c, s = math.cos(angle) - 1.0, math.sin(angle)
        r = np.eye(dim) + c * (np.outer(u, u) + np.outer(v, v)) + s * (np.outer(v, u) - np.outer(u, v))
        if translation is None:
            translation = np.zeros(dim)
        return cls(r, np.asarray(translation, dtype=np.float64), scale)


def apply_shift(e: EmbeddingSet, shift: DomainShift) -> EmbeddingSet:
    """Map every row x to scale * R x + translation."""
    if shift.dim != e.dim:
        raise ShapeError(f"shift dimension {shift.dim} != embedding dimension {e.dim}")
    out = shift.scale * (e.data @ shift.rotation.T) + shift.translation
    return EmbeddingSet(e.ids, out, normalized=False)


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A generated source/target/test triple plus the shift that links them.

    Target and test sample the same shifted mixture with independent noise;
    test ids continue after the target ids so the pools never collide.
    """

    source: EmbeddingSet
    source_labels: LabeledSet
    target: EmbeddingSet
    target_labels: LabeledSet
    test: EmbeddingSet
    test_labels: LabeledSet
    shift: DomainShift


# Shipped benchmark: small enough for fast runs, shifted hard enough that
# source-only pretraining clusters the target poorly.
STANDARD_BENCHMARK = dict(
    classes=5,
    per_class_source=400,
    per_class_target=100,
    per_class_test=100,
    dim=16,
    noise_sigma=0.35,
    center_scale=3.0,
    shift_angle=math.pi / 3,
    shift_translation_norm=1.5,
    shift_scale=1.0,
)


def make_benchmark(
    seed: int,
    *,
    classes: int = 5,
    per_class_source: int = 400,
    per_class_target: int = 100,
    per_class_test: int = 100,
    dim: int = 16,
    noise_sigma: float = 0.35,
    center_scale: float = 3.0,
    shift_angle: float = math.pi / 3,
    shift_translation_norm: float = 1.5,
    shift_scale: float = 1.0,
) -> Benchmark:
    src_spec = MixtureSpec(classes, per_class_source, dim, center_scale, noise_sigma, seed)
    tgt_spec = MixtureSpec(classes, per_class_target, dim, center_scale, noise_sigma, seed)
    test_spec = MixtureSpec(classes, per_class_test, dim, center_scale, noise_sigma, seed)

    source, source_labels = gen_mixture(src_spec, split="source")
    target, target_labels = gen_mixture(tgt_spec, split="target")
    test, test_labels = gen_mixture(test_spec, split="test")

    direction = substream(seed, "synth/shift-translation").normal(size=dim)
    translation = shift_translation_norm * direction / np.linalg.norm(direction)
    shift = DomainShift.in_random_plane(dim, shift_angle, translation, shift_scale, seed)

    target = apply_shift(target, shift)
    test = apply_shift(test, shift)

    # keep target/test ids disjoint: they live in one experiment
    offset = target.n
    test = test.with_ids([i + offset for i in test.ids])
    shifted_test_labels = LabeledSet(classes)
    for sid, label in test_labels.items_sorted():
        shifted_test_labels.add(sid + offset, label)

    return Benchmark(source, source_labels, target, target_labels, test, shifted_test_labels, shift)
