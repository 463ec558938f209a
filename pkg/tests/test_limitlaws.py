"""Reference limit laws: mixture structure, closed forms, simulation oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats as sps

from perpetua import engine, limitlaws
from perpetua.distributions import SojournLaw
from perpetua.errors import EmptyHeavySet, NonConvergent, NotConstantA, NotCritical
from perpetua.perpetuity import StateFns
from perpetua.semimarkov import SemiMarkovModel
from perpetua.stats import hill_index, ks_two_sample

EXP = SojournLaw.exponential


def _probe_mixture(weights):
    comps = tuple((lambda j: (lambda rng, size: np.full(size, float(j))))(j) for j in range(len(weights)))
    return limitlaws.MixtureLimitLaw(weights=np.asarray(weights, dtype=float), components=comps, tag="T1")


class TestMixtureLimitLaw:
    def test_mixing_frequencies_match_weights(self):
        rng = np.random.default_rng(0)
        weights = np.array([0.2, 0.5, 0.3])
        law = _probe_mixture(weights)
        draws = law.sample(rng, 20000)
        for j, w in enumerate(weights):
            se = math.sqrt(w * (1 - w) / draws.size)
            assert abs((draws == j).mean() - w) <= 3 * se


class TestTheorem1:
    def test_zero_b_gives_zero(self, swap_exp_model, rng):
        fns = StateFns(np.array([1.0, 0.5]), np.zeros(2))
        law = limitlaws.theorem1_law(swap_exp_model, fns, rng)
        assert np.all(law.sample(rng, 200) == 0.0)

    def test_constant_coefficients_collapse(self, swap_exp_model, rng):
        # constant a, b: the accumulation converges to b/a deterministically
        a, b = 0.8, 1.2
        fns = StateFns(np.array([a, a]), np.array([b, b]))
        law = limitlaws.theorem1_law(swap_exp_model, fns, rng)
        draws = law.sample(rng, 500)
        assert np.abs(draws - b / a).max() < 1e-9

    def test_requires_positive_drift(self, swap_exp_model, rng):
        fns = StateFns(np.array([-1.0, -0.5]), np.ones(2))
        with pytest.raises(NonConvergent):
            limitlaws.theorem1_law(swap_exp_model, fns, rng)

    def test_against_long_horizon_simulation(self, swap_exp_model, stable_fns):
        law = limitlaws.theorem1_law(swap_exp_model, stable_fns, np.random.default_rng(1))
        ref = law.sample(np.random.default_rng(2), 5000)
        bf = engine.phi_i_batch(
            swap_exp_model, 200.0, 5000, np.random.default_rng(3), stable_fns.a, stable_fns.a, stable_fns.b
        )
        sim = bf.i_sign * np.exp(bf.log_abs_i)
        assert ks_two_sample(ref, sim).passed

    def test_sample_signature(self, swap_exp_model, stable_fns, rng):
        law = limitlaws.theorem1_law(swap_exp_model, stable_fns, rng)
        phi, val = limitlaws.theorem1_sample(swap_exp_model, stable_fns, rng, law=law)
        assert phi == 0.0 and isinstance(val, float)


class TestTheorem2a:
    def test_coordinates_identical(self, swap_unit_model, rng):
        fns = StateFns(np.array([1.0, -1.0]), np.ones(2))
        law = limitlaws.theorem2a_law(swap_unit_model, fns, rng, var_reps=4000)
        s = law.sample(rng, 500)
        assert np.array_equal(s[:, 0], s[:, 1])

    def test_unit_fixture_marginal_is_standard_normal(self, swap_unit_model):
        # sigma_j^2 = Var(W1 - W2) = 2 and mean cycle length 2: scale 1
        fns = StateFns(np.array([1.0, -1.0]), np.ones(2))
        law = limitlaws.theorem2a_law(swap_unit_model, fns, np.random.default_rng(4), var_reps=10**5)
        s = law.sample(np.random.default_rng(5), 3 * 10**4)[:, 0]
        assert sps.kstest(s, sps.norm.cdf).pvalue > 0.005

    def test_component_variance_cross_check(self, swap_exp_model):
        from perpetua.perpetuity import cycle_integral_variance

        fns = StateFns(np.array([0.5, -1.5]), np.ones(2))
        law = limitlaws.theorem2a_law(swap_exp_model, fns, np.random.default_rng(6), var_reps=4 * 10**4)
        s = law.sample(np.random.default_rng(7), 4 * 10**4)[:, 0]
        civ = cycle_integral_variance(swap_exp_model, 0, fns.a, 4 * 10**4, np.random.default_rng(8))
        mixture_var = civ.estimate / swap_exp_model.mean_cycle_length(0)
        # the two-state mixture shares the asymptotic variance rate across anchors
        assert abs(s.var() - mixture_var) < 0.05 * mixture_var


def _critical_pair_quadrature_cdfs():
    """Grid quadrature of the joint density of (endpoint, running max)."""
    xs = np.linspace(-6.0, 6.0, 1201)
    es = np.linspace(0.0, 6.0, 601)
    x, e = np.meshgrid(xs, es, indexing="ij")
    dens = np.sqrt(2.0 / math.pi) * (2.0 * e - x) * np.exp(-0.5 * (2.0 * e - x) ** 2)
    dens = np.where(x < e, dens, 0.0)
    cell = (xs[1] - xs[0]) * (es[1] - es[0])
    mass = dens * cell

    cdf_x = np.cumsum(mass.sum(axis=1))
    cdf_e = np.cumsum(mass.sum(axis=0))
    diff = e - x
    dgrid = np.linspace(0.0, 8.0, 401)
    cdf_d = np.array([mass[diff <= d].sum() for d in dgrid])

    def interp(grid, cdf):
        return lambda q: np.interp(q, grid, np.clip(cdf, 0.0, 1.0), left=0.0, right=1.0)

    return interp(xs, cdf_x), interp(es, cdf_e), interp(dgrid, cdf_d)


class TestTheorem2b:
    def test_requires_critical_drift(self, swap_unit_model, rng):
        fns = StateFns(np.array([1.0, -0.5]), np.ones(2))
        with pytest.raises(NotCritical):
            limitlaws.theorem2b_law(swap_unit_model, fns, rng, var_reps=2000)

    def test_support_and_half_normal_marginal(self, swap_unit_model):
        fns = StateFns(np.array([1.0, -1.0]), np.ones(2))
        law = limitlaws.theorem2b_law(swap_unit_model, fns, np.random.default_rng(9), var_reps=10**5)
        s = law.sample(np.random.default_rng(10), 3 * 10**4)
        assert np.all(s[:, 1] >= 0)
        assert np.all(s[:, 1] >= s[:, 0])
        # scale is 1 for this fixture, so the max marginal is half-normal
        assert sps.kstest(s[:, 1], sps.halfnorm.cdf).pvalue > 0.005

    def test_joint_against_quadrature(self, swap_unit_model):
        fns = StateFns(np.array([1.0, -1.0]), np.ones(2))
        law = limitlaws.theorem2b_law(swap_unit_model, fns, np.random.default_rng(11), var_reps=10**5)
        s = law.sample(np.random.default_rng(12), 2 * 10**4)
        cdf_x, cdf_e, cdf_d = _critical_pair_quadrature_cdfs()
        assert sps.kstest(s[:, 0], cdf_x).pvalue > 0.005
        assert sps.kstest(s[:, 1], cdf_e).pvalue > 0.005
        assert sps.kstest(s[:, 1] - s[:, 0], cdf_d).pvalue > 0.005


class TestTheorem3Params:
    def test_all_positive_heavy_gives_beta_minus_one(self):
        model = SemiMarkovModel(
            [[0, 1], [1, 0]],
            {(0, 1): SojournLaw.pareto(1.5, 1.0), (1, 0): EXP(1.0)},
        )
        fns = StateFns(np.array([0.25, -1.0]), np.ones(2))
        p = limitlaws.theorem3_params(model, fns)
        assert np.all(p.beta == -1.0)
        assert p.heavy_minus == ()

    def test_hand_computed_scales(self, heavy_model):
        fns = StateFns(np.array([0.5, -1.0]), np.ones(2))
        p = limitlaws.theorem3_params(heavy_model, fns)
        ahat = -1.0 - p.e_pi_a
        want = 2.0 * 0.5 * 1.0 * abs(ahat) ** 1.5
        assert p.e_pi_a == -0.625
        assert np.allclose(p.alpha_minus, want)
        assert np.allclose(p.alpha_plus, 0.0)
        assert np.all(p.beta == 1.0)
        assert np.allclose(p.sigma, want ** (1 / 1.5))

    def test_mirror_symmetry(self, heavy_model):
        # negate a and relabel nothing: plus and minus sets swap, so the
        # skewness flips sign while the scale is unchanged
        fns = StateFns(np.array([0.5, -1.0]), np.ones(2))
        p1 = limitlaws.theorem3_params(heavy_model, fns)
        p2 = limitlaws.theorem3_params(heavy_model, StateFns(-fns.a, fns.b))
        assert np.allclose(p1.sigma, p2.sigma)
        assert np.allclose(p1.beta, -p2.beta)

    def test_no_heavy_tails(self, swap_exp_model):
        with pytest.raises(EmptyHeavySet):
            limitlaws.theorem3_params(swap_exp_model, StateFns(np.ones(2), np.ones(2)))

    def test_embedded_return_count_is_inverse_mu(self, heavy_model):
        # the closed form uses 1/mu_j as the mean embedded return count
        cb = engine.cycle_stats(heavy_model, 0, 2 * 10**4, np.random.default_rng(13))
        se = cb.steps.std(ddof=1) / math.sqrt(cb.steps.size)
        assert abs(cb.steps.mean() - 1.0 / heavy_model.mu[0]) <= 4 * se + 1e-9

    def test_tail_count_oracle(self, heavy_model):
        # positive-tail constant of the centred cycle integral: with heavy
        # transitions out of state 0 (ahat > 0), x^alpha P[C > x] -> alpha_plus
        model = SemiMarkovModel(
            [[0, 1], [1, 0]],
            {(0, 1): SojournLaw.pareto(1.5, 1.0), (1, 0): EXP(1.0)},
            initial=[1.0, 0.0],
        )
        fns = StateFns(np.array([0.25, -1.0]), np.ones(2))
        p = limitlaws.theorem3_params(model, fns)
        ahat = fns.a - p.e_pi_a
        ints = engine.cycle_integrals(model, 0, 2 * 10**5, np.random.default_rng(14), ahat)
        x = np.quantile(ints, 0.999)
        got = x**p.alpha * (ints > x).mean()
        assert abs(got - p.alpha_plus[0]) / p.alpha_plus[0] < 0.4


class TestTheorem3Laws:
    def _params(self, beta):
        return limitlaws.StableCaseParams(
            alpha=1.5,
            sigma=np.array([1.0, 1.0]),
            beta=np.array([beta, beta]),
            alpha_plus=np.zeros(2),
            alpha_minus=np.zeros(2),
            heavy_plus=(),
            heavy_minus=(),
            e_pi_a=0.0,
        )

    def test_t3a_coordinates_equal_and_symmetric(self, swap_unit_model, rng):
        law = limitlaws.theorem3a_law(self._params(0.0), swap_unit_model)
        s = law.sample(rng, 2 * 10**4)
        assert np.array_equal(s[:, 0], s[:, 1])
        assert abs((s[:, 0] > 0).mean() - 0.5) < 0.012

    def test_t3a_tail_index(self, heavy_model):
        fns = StateFns(np.array([0.5, -1.0]), np.ones(2))
        p = limitlaws.theorem3_params(heavy_model, fns)
        law = limitlaws.theorem3a_law(p, heavy_model)
        s = law.sample(np.random.default_rng(15), 4 * 10**4)[:, 0]
        pos = s[s > 0]
        est = hill_index(pos, len(pos) // 50)
        assert abs(est.alpha - 1.5) < 0.2

    def test_t3b_support_and_criticality(self, swap_unit_model, rng):
        law = limitlaws.theorem3b_law(self._params(0.2), swap_unit_model, steps=512)
        s = law.sample(rng, 5000)
        assert np.all(s[:, 1] >= np.maximum(s[:, 0], 0.0) - 1e-12)
        bad = self._params(0.0)
        object.__setattr__(bad, "e_pi_a", -0.3)
        with pytest.raises(NotCritical):
            limitlaws.theorem3b_law(bad, swap_unit_model)

    def test_t3b_gaussian_boundary(self, swap_unit_model):
        # alpha -> 2 reduces to the Brownian pair shape up to sqrt(2) scale
        # (sigma matched to the critical fixture's cycle deviation sqrt(2))
        p = limitlaws.StableCaseParams(
            alpha=2.0,
            sigma=np.array([math.sqrt(2.0), math.sqrt(2.0)]),
            beta=np.zeros(2),
            alpha_plus=np.zeros(2),
            alpha_minus=np.zeros(2),
            heavy_plus=(),
            heavy_minus=(),
            e_pi_a=0.0,
        )
        law = limitlaws.theorem3b_law(p, swap_unit_model, steps=2048)
        s = law.sample(np.random.default_rng(16), 2 * 10**4)
        fns = StateFns(np.array([1.0, -1.0]), np.ones(2))
        ref_law = limitlaws.theorem2b_law(swap_unit_model, fns, np.random.default_rng(17), var_reps=10**5)
        ref = ref_law.sample(np.random.default_rng(18), 2 * 10**4)
        assert ks_two_sample(s[:, 1], math.sqrt(2.0) * ref[:, 1]).statistic < 0.025


class TestTheorem4a:
    def test_zero_b(self, swap_exp_model, rng):
        fns = StateFns(np.array([-0.5, -0.5]), np.zeros(2))
        law = limitlaws.theorem4a_law(swap_exp_model, fns, rng)
        assert np.all(law.sample(rng, 200) == 0.0)

    def test_requires_constant_negative(self, swap_exp_model, rng):
        with pytest.raises(NotConstantA):
            limitlaws.theorem4a_law(swap_exp_model, StateFns(np.array([-0.5, -0.4]), np.ones(2)), rng)
        with pytest.raises(NotConstantA):
            limitlaws.theorem4a_law(swap_exp_model, StateFns(np.array([0.5, 0.5]), np.ones(2)), rng)

    def test_against_simulation(self, swap_exp_model):
        a = -0.2
        fns = StateFns(np.array([a, a]), np.array([1.0, 0.5]))
        t = 50.0 / abs(a)
        law = limitlaws.theorem4a_law(swap_exp_model, fns, np.random.default_rng(19))
        ref = law.sample(np.random.default_rng(20), 4000)
        bf = engine.phi_i_batch(swap_exp_model, t, 4000, np.random.default_rng(21), fns.a, fns.a, fns.b)
        sim = bf.i_sign * np.exp(bf.log_abs_i + a * t)
        assert ks_two_sample(ref, sim).passed


class TestTheorem4b:
    def test_constant_b_exact(self, swap_exp_model):
        fns = StateFns(np.zeros(2), np.array([1.7, 1.7]))
        report = limitlaws.theorem4b_check(swap_exp_model, fns, np.random.default_rng(22))
        assert report.e_pi_b == swap_exp_model.expected_pi_a(fns.b)
        assert np.all(report.clt_scale == 0.0)
        t = 100.0
        bf = engine.phi_i_batch(swap_exp_model, t, 50, np.random.default_rng(23), fns.a, fns.a, fns.b)
        vals = bf.i_sign * np.exp(bf.log_abs_i)
        assert np.abs(vals - 1.7 * t).max() <= 1e-10 * 1.7 * t

    def test_sign_flip(self, swap_exp_model, rng):
        fns = StateFns(np.zeros(2), np.array([1.0, -2.0]))
        r1 = limitlaws.theorem4b_check(swap_exp_model, fns, rng, var_reps=4000)
        r2 = limitlaws.theorem4b_check(swap_exp_model, StateFns(np.zeros(2), -fns.b), rng, var_reps=4000)
        assert r1.e_pi_b == -r2.e_pi_b

    def test_requires_zero_a(self, swap_exp_model, rng):
        with pytest.raises(NotConstantA):
            limitlaws.theorem4b_check(swap_exp_model, StateFns(np.array([0.0, 0.1]), np.ones(2)), rng)

    def test_clt_scale_matches_simulation(self, swap_exp_model):
        fns = StateFns(np.zeros(2), np.array([1.0, -1.0]))
        report = limitlaws.theorem4b_check(swap_exp_model, fns, np.random.default_rng(24), var_reps=10**5)
        t = 10**4
        bf = engine.phi_i_batch(swap_exp_model, t, 400, np.random.default_rng(25), fns.a, fns.a, fns.b)
        vals = bf.i_sign * np.exp(bf.log_abs_i)
        stat = (vals - t * report.e_pi_b) / math.sqrt(t)
        assert abs(stat.std(ddof=1) - report.clt_scale[0]) < 0.15 * report.clt_scale[0]
