"""KS, Hill, standardisation, and the zero-concentration metric."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats as sps

from perpetua.errors import DegenerateSample, NonPositive, TooSmall
from perpetua.stats import (
    hill_index,
    hill_plateau,
    ks_statistic,
    ks_two_sample,
    standardize,
    zero_concentration_scale,
)


class TestKs:
    def test_identical_samples(self):
        x = np.random.default_rng(0).normal(size=500)
        assert ks_statistic(x, x) == 0.0

    def test_disjoint_supports(self):
        assert ks_statistic(np.arange(100), np.arange(100) + 1000) == 1.0

    def test_null_uniform_level(self):
        rng = np.random.default_rng(1)
        d = ks_two_sample(rng.random(10**5), rng.random(10**5)).statistic
        assert d < 0.012

    def test_symmetry_and_permutation_invariance(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=300), rng.normal(1.0, 1.0, size=400)
        assert ks_statistic(x, y) == ks_statistic(y, x)
        assert ks_statistic(rng.permutation(x), y) == ks_statistic(x, y)

    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=777), rng.normal(0.2, 1.3, size=1234)
        ours = ks_two_sample(x, y)
        ref = sps.ks_2samp(x, y)
        assert abs(ours.statistic - ref.statistic) < 1e-12
        assert abs(ours.pvalue - ref.pvalue) < 0.02

    def test_too_small(self):
        with pytest.raises(TooSmall):
            ks_two_sample(np.arange(10), np.arange(100))


class TestHill:
    @pytest.mark.parametrize("alpha, tol", [(1.5, 0.15), (2.5, 0.25)])
    def test_exact_pareto(self, alpha, tol):
        rng = np.random.default_rng(4)
        x = (1.0 - rng.random(10**5)) ** (-1.0 / alpha)
        est = hill_index(x, 1000)
        assert abs(est.alpha - alpha) <= tol
        assert est.stderr == est.alpha / np.sqrt(1000)

    def test_exponential_not_heavy(self):
        rng = np.random.default_rng(5)
        verdict = hill_plateau(rng.exponential(1.0, 10**5))
        assert not verdict.heavy

    def test_pareto_heavy(self):
        rng = np.random.default_rng(6)
        verdict = hill_plateau((1.0 - rng.random(10**5)) ** (-1.0 / 1.5))
        assert verdict.heavy

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        x = (1.0 - rng.random(20000)) ** (-1.0 / 2.0)
        a = hill_index(x, 200).alpha
        b = hill_index(123.456 * x, 200).alpha
        assert abs(a - b) <= 1e-12 * a

    def test_guards(self):
        rng = np.random.default_rng(8)
        x = rng.exponential(1.0, 10**4)
        with pytest.raises(TooSmall):
            hill_index(x, 30)
        with pytest.raises(TooSmall):
            hill_index(x, x.size // 2)
        with pytest.raises(NonPositive):
            hill_index(np.concatenate([[-1.0], x]), 100)


class TestStandardize:
    def test_idempotent(self):
        rng = np.random.default_rng(9)
        x = rng.normal(3.0, 5.0, 4001)
        once = standardize(x)
        twice = standardize(once)
        assert np.abs(once - twice).max() <= 1e-12

    def test_affine_invariance(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=2000)
        a = standardize(x)
        b = standardize(4.2 * x - 17.0)
        assert np.abs(a - b).max() <= 1e-9

    def test_gaussian_shapes_match(self):
        rng = np.random.default_rng(11)
        a = standardize(rng.normal(5.0, 9.0, 3 * 10**4))
        b = standardize(rng.normal(0.0, 1.0, 3 * 10**4))
        assert ks_two_sample(a, b).passed

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            standardize(np.ones(100))


class TestZeroConcentration:
    def test_tight_sample(self):
        rng = np.random.default_rng(12)
        assert zero_concentration_scale(rng.normal(0.0, 1e-3, 10**4)) < 0.01

    def test_wide_sample(self):
        rng = np.random.default_rng(13)
        assert zero_concentration_scale(rng.normal(0.0, 5.0, 10**4)) > 0.5

    def test_point_mass_at_zero(self):
        assert zero_concentration_scale(np.zeros(100)) == 0.0
