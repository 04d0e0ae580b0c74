"""Data-model invariants: induced vectors, coreset validation."""

import numpy as np
import pytest

from lrthin.data import Coreset, PointSet, ThinConfig, induced_prob_vectors


class TestInducedVectors:
    def test_uniform_definition(self):
        p, q = induced_prob_vectors(4, Coreset([0, 2], 4))
        assert np.allclose(p, [0.25, 0.25, 0.25, 0.25])
        assert np.allclose(q, [0.5, 0.0, 0.5, 0.0])

    def test_multiplicity(self):
        _, q = induced_prob_vectors(2, Coreset([1, 1], 2))
        assert np.allclose(q, [0.0, 1.0])

    def test_mass_conservation(self):
        p, q = induced_prob_vectors(3, Coreset([0], 3))
        diff = p - q
        assert np.allclose(diff, [-2 / 3, 1 / 3, 1 / 3])
        assert abs(diff.sum()) < 1e-15

    def test_both_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(2, 50))
            k = int(rng.integers(1, n + 1))
            idx = rng.integers(0, n, size=k)
            p, q = induced_prob_vectors(n, Coreset(idx, n))
            assert abs(p.sum() - 1.0) < 1e-12
            assert abs(q.sum() - 1.0) < 1e-12

    def test_weight_norm_identity_for_distinct_indices(self):
        # ||p - q||^2 = 1/n_out - 1/n_in when indices are distinct.
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 60))
            k = int(rng.integers(1, n + 1))
            idx = rng.permutation(n)[:k]
            p, q = induced_prob_vectors(n, Coreset(idx, n))
            assert abs(((p - q) ** 2).sum() - (1 / k - 1 / n)) < 1e-12


class TestValidation:
    def test_point_set_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PointSet(np.array([[1.0, np.nan]]))

    def test_point_set_shape(self):
        with pytest.raises(ValueError):
            PointSet(np.ones(3))

    def test_point_set_immutable(self):
        ps = PointSet(np.ones((2, 2)))
        with pytest.raises(ValueError):
            ps.points[0, 0] = 5.0

    def test_coreset_bounds(self):
        with pytest.raises(ValueError):
            Coreset([4], 4)
        with pytest.raises(ValueError):
            Coreset([-1], 4)
        with pytest.raises(ValueError):
            Coreset([], 4)

    def test_universe_mismatch(self):
        with pytest.raises(ValueError):
            induced_prob_vectors(5, Coreset([0], 4))

    def test_thin_config_validation(self):
        with pytest.raises(ValueError):
            ThinConfig(algorithm="bogus")
        with pytest.raises(ValueError):
            ThinConfig(algorithm="kh", delta=1.5)
        cfg = ThinConfig(algorithm="kh_compress", g=2)
        assert cfg.g == 2
