import numpy as np
import pytest

from eigenloop.clustering import AnchorSet, KMeansConfig, ackmeans, bcubed_precision
from eigenloop.core import EmbeddingSet
from eigenloop.errors import ConfigError, ShapeError
from eigenloop.synth import (
    DomainShift,
    MixtureSpec,
    apply_shift,
    class_centers,
    gen_mixture,
    make_benchmark,
)


class TestGenMixture:
    def test_counts_and_labels(self):
        e, labels = gen_mixture(MixtureSpec(2, 3, 2, 1.0, 0.1, seed=5))
        assert e.n == 6 and e.dim == 2
        assert [labels.label(i) for i in range(6)] == [0, 0, 0, 1, 1, 1]

    def test_seeded_determinism(self):
        spec = MixtureSpec(3, 4, 5, 2.0, 0.3, seed=11)
        a, _ = gen_mixture(spec)
        b, _ = gen_mixture(spec)
        assert np.array_equal(a.data, b.data)

    def test_tiny_sigma_collapses_to_centers(self):
        # derived: with sigma -> 0 every sample sits on its class center
        spec = MixtureSpec(3, 10, 4, 2.0, 1e-9, seed=3)
        e, labels = gen_mixture(spec)
        centers = class_centers(spec)
        radii = [
            np.linalg.norm(e.row(i) - centers[labels.label(i)]) for i in range(e.n)
        ]
        assert max(radii) < 1e-6

    def test_centers_distinct_and_scaled(self):
        spec = MixtureSpec(8, 1, 6, 3.0, 0.1, seed=0)
        centers = class_centers(spec)
        assert np.allclose(np.linalg.norm(centers, axis=1), 3.0)
        for i in range(8):
            for j in range(i + 1, 8):
                assert np.linalg.norm(centers[i] - centers[j]) >= 1e-6

    def test_splits_share_centers_not_noise(self):
        spec = MixtureSpec(2, 5, 3, 2.0, 0.2, seed=7)
        a, _ = gen_mixture(spec, split="train")
        b, _ = gen_mixture(spec, split="test")
        assert not np.array_equal(a.data, b.data)
        # class means agree up to noise scatter because centers are shared
        assert np.linalg.norm(a.data[:5].mean(0) - b.data[:5].mean(0)) < 1.0

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            MixtureSpec(2, 0, 3, 1.0, 0.1, seed=0)
        with pytest.raises(ConfigError):
            MixtureSpec(2, 1, 1, 1.0, 0.1, seed=0)
        with pytest.raises(ConfigError):
            MixtureSpec(2, 1, 3, 1.0, 0.0, seed=0)


class TestApplyShift:
    def test_identity_is_bit_exact(self):
        e, _ = gen_mixture(MixtureSpec(2, 4, 3, 1.0, 0.2, seed=1))
        out = apply_shift(e, DomainShift.identity(3))
        assert np.array_equal(out.data, e.data)

    def test_pure_translation(self):
        # dyadic values keep x + t exact, so the difference is exactly t
        g = np.random.default_rng(1)
        data = g.integers(-8, 8, size=(6, 3)).astype(float) / 4.0
        e = EmbeddingSet(tuple(range(6)), data)
        t = np.array([1.0, -2.0, 0.5])
        out = apply_shift(e, DomainShift(np.eye(3), t, 1.0))
        assert np.array_equal(out.data - e.data, np.tile(t, (e.n, 1)))

    def test_translation_shifts_rows(self):
        e, _ = gen_mixture(MixtureSpec(2, 4, 3, 1.0, 0.2, seed=1))
        t = np.array([1.0, -2.0, 0.5])
        out = apply_shift(e, DomainShift(np.eye(3), t, 1.0))
        assert np.abs(out.data - e.data - t).max() < 1e-12

    def test_scale_doubles_distances(self):
        # derived: compare full pairwise distance matrices before/after
        e, _ = gen_mixture(MixtureSpec(2, 5, 4, 1.0, 0.3, seed=2))
        out = apply_shift(e, DomainShift(np.eye(4), np.zeros(4), 2.0))

        def dists(x):
            return np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)

        assert np.abs(dists(out.data) - 2.0 * dists(e.data)).max() < 1e-9

    def test_rotation_is_orthogonal(self):
        shift = DomainShift.in_random_plane(6, 1.1, seed=4)
        r = shift.rotation
        assert np.abs(r @ r.T - np.eye(6)).max() <= 1e-9
        assert abs(np.linalg.det(r) - 1.0) <= 1e-9

    def test_rotation_preserves_norms(self):
        e, _ = gen_mixture(MixtureSpec(2, 5, 6, 1.0, 0.3, seed=2))
        out = apply_shift(e, DomainShift.in_random_plane(6, 0.8, seed=4))
        assert np.allclose(
            np.linalg.norm(out.data, axis=1), np.linalg.norm(e.data, axis=1), atol=1e-9
        )

    def test_dimension_mismatch(self):
        e, _ = gen_mixture(MixtureSpec(2, 2, 3, 1.0, 0.2, seed=1))
        with pytest.raises(ShapeError):
            apply_shift(e, DomainShift.identity(4))

    def test_invalid_shift_rejected(self):
        with pytest.raises(ConfigError):
            DomainShift(np.eye(3) * 2, np.zeros(3), 1.0)
        with pytest.raises(ConfigError):
            DomainShift(np.eye(3), np.zeros(3), 0.0)

    def test_isometry_preserves_bcubed(self):
        # clustering computed consistently before/after a scale-1 shift
        e, labels = gen_mixture(MixtureSpec(3, 20, 5, 3.0, 0.4, seed=6))
        shifted = apply_shift(
            e, DomainShift.in_random_plane(5, 0.9, np.ones(5), 1.0, seed=8)
        )
        cfg = KMeansConfig(seed=21)
        before = ackmeans(e, 3, AnchorSet.empty(5), cfg)
        after = ackmeans(shifted, 3, AnchorSet.empty(5), cfg)
        b0 = bcubed_precision(dict(zip(e.ids, before.assignment)), labels)
        b1 = bcubed_precision(dict(zip(shifted.ids, after.assignment)), labels)
        assert b0 == pytest.approx(b1, abs=1e-12)


class TestBenchmark:
    def test_shapes_and_disjoint_ids(self):
        bench = make_benchmark(3, per_class_source=20, per_class_target=10, per_class_test=5)
        assert bench.source.n == 100 and bench.target.n == 50 and bench.test.n == 25
        assert not set(bench.target.ids) & set(bench.test.ids)
        for sid in bench.test.ids:
            bench.test_labels.label(sid)

    def test_deterministic(self):
        a = make_benchmark(9, per_class_source=8, per_class_target=4, per_class_test=2)
        b = make_benchmark(9, per_class_source=8, per_class_target=4, per_class_test=2)
        assert np.array_equal(a.target.data, b.target.data)
        assert np.array_equal(a.test.data, b.test.data)

    def test_translation_norm(self):
        bench = make_benchmark(5, per_class_source=4, per_class_target=4, per_class_test=4)
        assert np.linalg.norm(bench.shift.translation) == pytest.approx(1.5)
