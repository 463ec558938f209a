"""Environment validation, simulation, long-run laws, cycles and residuals."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats as sps

from perpetua.distributions import SojournLaw
from perpetua.errors import (
    MissingSojournLaw,
    NeverHits,
    NotIrreducible,
    OutOfRange,
    RowSumError,
    SelfLoopError,
)
from perpetua import engine
from perpetua.semimarkov import (
    SemiMarkovModel,
    cycle_index,
    limiting_pi,
    mean_cycle_length,
    pi_star_sample,
    residual_times,
    simulate,
    stationary_embedded,
    validate,
)
from perpetua.stats import ks_two_sample

EXP = SojournLaw.exponential


def _full_sojourn(p, law=None):
    law = law or EXP(1.0)
    return {(i, j): law for i in range(len(p)) for j in range(len(p)) if p[i][j] > 0}


class TestValidate:
    def test_valid_swap(self):
        p = [[0, 1], [1, 0]]
        model = validate(p, _full_sojourn(p))
        assert model.n_states == 2

    def test_self_loop(self):
        p = [[0.2, 0.8], [1, 0]]
        with pytest.raises(SelfLoopError):
            validate(p, _full_sojourn(p))

    def test_row_sum(self):
        with pytest.raises(RowSumError):
            validate([[0, 0.9], [1, 0]], {(0, 1): EXP(1.0), (1, 0): EXP(1.0)})

    def test_unreachable_state(self):
        p = [[0, 1, 0], [1, 0, 0], [0.5, 0.5, 0]]
        with pytest.raises(NotIrreducible):
            validate(p, _full_sojourn(p))

    def test_missing_law(self):
        with pytest.raises(MissingSojournLaw):
            validate([[0, 1], [1, 0]], {(0, 1): EXP(1.0)})

    def test_initial_must_be_probability(self):
        with pytest.raises(ValueError):
            validate([[0, 1], [1, 0]], _full_sojourn([[0, 1], [1, 0]]), initial=[0.5, 0.1])


class TestStationary:
    def test_swap_symmetric(self, swap_exp_model):
        assert np.allclose(stationary_embedded(swap_exp_model), [0.5, 0.5])

    def test_cyclic_three(self, cyclic3_model):
        assert np.allclose(stationary_embedded(cyclic3_model), [1 / 3] * 3)

    def test_against_chain_frequency_oracle(self):
        p = [[0, 1, 0], [0.5, 0, 0.5], [1, 0, 0]]
        model = validate(p, _full_sojourn(p))
        mu = stationary_embedded(model)
        assert np.abs(mu @ model.transition - mu).max() <= 1e-10
        rng = np.random.default_rng(0)
        counts = np.zeros(3)
        state = 0
        cum = np.cumsum(p, axis=1)
        for _ in range(10**6):
            counts[state] += 1
            state = int(np.searchsorted(cum[state], rng.random(), side="right"))
        assert np.abs(counts / counts.sum() - mu).max() < 0.005


class TestLimitingPi:
    def test_swap_mean_weighting(self):
        model = validate(
            [[0, 1], [1, 0]],
            {(0, 1): EXP(1.0), (1, 0): SojournLaw.uniform(2.5, 3.5)},
        )
        assert np.allclose(limiting_pi(model), [0.25, 0.75])

    def test_equal_means_gives_mu(self, cyclic3_model):
        assert np.allclose(limiting_pi(cyclic3_model), stationary_embedded(cyclic3_model))

    def test_occupation_oracle(self, swap_exp_model):
        rng = np.random.default_rng(1)
        traj = simulate(swap_exp_model, 2 * 10**4, rng)
        occ = traj.occupation_fractions()
        assert np.abs(occ - limiting_pi(swap_exp_model)).max() < 0.02


class TestSimulate:
    def test_states_alternate(self, swap_exp_model, rng):
        traj = simulate(swap_exp_model, 100.0, rng)
        assert np.all(np.diff(traj.states) != 0)
        assert np.all(traj.durations > 0)
        assert traj.coverage >= traj.horizon

    def test_renewal_rate(self, swap_unit_model):
        rng = np.random.default_rng(2)
        horizon = 10**4
        traj = simulate(swap_unit_model, horizon, rng)
        # unit-mean sojourns: one jump per unit time on average
        assert abs(traj.n_segments - horizon) <= 3 * math.sqrt(horizon)

    def test_sojourns_match_law(self, swap_exp_model):
        rng = np.random.default_rng(3)
        traj = simulate(swap_exp_model, 4000.0, rng)
        durs = traj.durations[:-1][traj.states[:-1] == 1]  # transitions 1 -> 0
        fresh = swap_exp_model.sojourn[(1, 0)].sample(rng, durs.size)
        assert ks_two_sample(durs, fresh).passed


class TestCycles:
    def test_start_state_hit_at_zero(self, swap_exp_model, rng):
        traj = simulate(swap_exp_model, 50.0, rng)
        ci = cycle_index(traj, 0)
        assert ci.hits[0] == 0.0
        assert np.all(np.diff(ci.hits) > 0)

    def test_cycle_lengths_iid(self, swap_exp_model):
        rng = np.random.default_rng(4)
        traj = simulate(swap_exp_model, 3 * 10**4, rng)
        lengths = np.diff(cycle_index(traj, 0).hits)
        assert ks_two_sample(lengths[0::2], lengths[1::2]).passed

    def test_never_hits(self, swap_exp_model, rng):
        traj = simulate(swap_exp_model, 0.1, rng)
        missing = 1 if traj.states[0] == 0 and traj.n_segments == 1 else None
        if missing is not None:
            with pytest.raises(NeverHits):
                cycle_index(traj, missing)

    def test_g_before_first_hit_is_none(self, swap_exp_model, rng):
        traj = simulate(swap_exp_model, 50.0, rng)
        ci = cycle_index(traj, 1)  # start state is 0, so the first hit is positive
        assert ci.g(0.5 * ci.hits[0]) is None

    def test_residuals(self, swap_exp_model):
        rng = np.random.default_rng(5)
        traj = simulate(swap_exp_model, 200.0, rng)
        ci = cycle_index(traj, 0)
        k = ci.n_cycles // 2
        back, fwd = residual_times(ci, float(ci.hits[k]))
        assert back == 0.0
        t = 0.5 * (ci.hits[k] + ci.hits[k + 1])
        back, fwd = residual_times(ci, t)
        assert abs((back + fwd) - (ci.hits[k + 1] - ci.hits[k])) < 1e-12
        with pytest.raises(OutOfRange):
            residual_times(ci, float(ci.hits[-1]) + 1.0)

    def test_backward_residual_law(self, swap_exp_model):
        # at large t the backward residual follows the integrated-tail law of
        # the cycle length W1 + W2 with W1 ~ Exp(1), W2 ~ Exp(2)
        rng = np.random.default_rng(6)
        t_query = 30.0
        values = []
        for _ in range(4000):
            # generous slack so the cycle containing t_query always closes
            traj = simulate(swap_exp_model, t_query + 25.0, rng)
            values.append(residual_times(cycle_index(traj, 0), t_query)[0])
        mean_len = 1.5

        def integrated_tail_cdf(x):
            x = np.asarray(x, dtype=float)
            surv = 2.0 * np.exp(-x) - 0.5 * np.exp(-2.0 * x)  # int_x^inf P[C > y] dy
            return 1.0 - surv / mean_len

        res = sps.kstest(np.array(values), integrated_tail_cdf)
        assert res.pvalue > 0.01


class TestMeanCycleLength:
    @pytest.mark.parametrize(
        "laws, want",
        [
            ({(0, 1): EXP(1.0), (1, 0): EXP(1.0)}, 2.0),
            ({(0, 1): EXP(1.0), (1, 0): SojournLaw.uniform(2.5, 3.5)}, 4.0),
        ],
    )
    def test_swap_analytic(self, laws, want):
        model = validate([[0, 1], [1, 0]], laws)
        for j in (0, 1):
            assert abs(mean_cycle_length(model, j) - want) < 1e-12

    def test_cyclic_three(self, cyclic3_model):
        assert abs(mean_cycle_length(cyclic3_model, 0) - 3.0) < 1e-12

    @pytest.mark.parametrize("anchor", [0, 1])
    def test_monte_carlo_oracle(self, swap_exp_model, anchor):
        rng = np.random.default_rng(7)
        lengths = engine.cycle_stats(swap_exp_model, anchor, 2 * 10**4, rng).length
        se = lengths.std(ddof=1) / math.sqrt(lengths.size)
        assert abs(lengths.mean() - mean_cycle_length(swap_exp_model, anchor)) < 4 * se


class TestPiStar:
    def test_exponential_rates_fixed_point(self):
        # both successors exponential with the same rate: the size-biased
        # averaged sojourn is again that exponential
        p = [[0, 0.3, 0.7], [1, 0, 0], [1, 0, 0]]
        laws = {(0, 1): EXP(1.7), (0, 2): EXP(1.7), (1, 0): EXP(1.0), (2, 0): EXP(1.0)}
        model = validate(p, laws)
        rng = np.random.default_rng(8)
        draws = pi_star_sample(model, 0, rng, 10**5)
        res = sps.kstest(draws, sps.expon(scale=1 / 1.7).cdf)
        assert res.pvalue > 0.01

    def test_exponential_mixture_formula(self):
        p = [[0, 0.4, 0.6], [1, 0, 0], [1, 0, 0]]
        lam = {(0, 1): 0.5, (0, 2): 3.0}
        laws = {k: EXP(v) for k, v in lam.items()}
        laws.update({(1, 0): EXP(1.0), (2, 0): EXP(1.0)})
        model = validate(p, laws)
        rng = np.random.default_rng(9)
        draws = pi_star_sample(model, 0, rng, 10**5)
        w = np.array([p[0][1] / lam[(0, 1)], p[0][2] / lam[(0, 2)]])
        w = w / w.sum()

        def mixture_cdf(x):
            x = np.asarray(x, dtype=float)[:, None]
            rates = np.array([lam[(0, 1)], lam[(0, 2)]])
            return 1.0 - (w * np.exp(-rates * x)).sum(axis=1)

        res = sps.kstest(draws, mixture_cdf)
        assert res.pvalue > 0.01

    def test_single_successor_reduces_to_equilibrium(self, cyclic3_model):
        law = cyclic3_model.sojourn[(1, 2)]
        a = pi_star_sample(cyclic3_model, 1, np.random.default_rng(10), 3 * 10**4)
        b = law.equilibrium_sample(np.random.default_rng(11), 3 * 10**4)
        assert ks_two_sample(a, b).passed

    def test_mean_identity(self, swap_exp_model):
        # E pi* = sum_k P_jk m_jk E[eq of F_jk] / m_j; one successor here,
        # and E[eq] = E[W^2] / (2 E[W]) by the integrated-tail density
        law = swap_exp_model.sojourn[(0, 1)]
        second, _ = integrate.quad(lambda x: 2.0 * x * law.survival(x), 0, np.inf)
        want = second / (2.0 * law.mean())
        rng = np.random.default_rng(12)
        draws = pi_star_sample(swap_exp_model, 0, rng, 10**5)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - want) < 3.5 * se


class TestModuleInvariants:
    def test_pi_positive_and_normalised(self, swap_exp_model, cyclic3_model, heavy_model):
        for model in (swap_exp_model, cyclic3_model, heavy_model):
            pi = limiting_pi(model)
            assert abs(pi.sum() - 1.0) <= 1e-12
            assert np.all(pi > 0)
            mu = stationary_embedded(model)
            assert np.abs(mu @ model.transition - mu).max() <= 1e-10
