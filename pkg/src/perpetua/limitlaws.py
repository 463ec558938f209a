"""Sampleable reference laws for every long-time limit of the functionals.

Each law is a pi-weighted mixture: draw an anchor state U from the
occupation law, then draw that state's component independently.  The
builders precompute per-state scales (cycle variances, stable parameters)
once; the returned MixtureLimitLaw then samples in bulk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .distributions import (
    StableParams,
    brownian_max_pair_sample,
    stable_sample,
    sup_stable_path_sample,
)
from .errors import (
    EmptyHeavySet,
    InfiniteVarianceSuspected,
    NonConvergent,
    NotConstantA,
    NotCritical,
)
from .numerics import log_g_fun
from .perpetuity import StateFns, cycle_integral_variance
from .semimarkov import SemiMarkovModel, pi_star_sample
from .sre import CyclePairSampler, StartAnchoredPairSampler, check_conditions

_CRITICAL_TOL = 1e-12
_SRE_TOL = 1e-12


@dataclass(frozen=True)
class MixtureLimitLaw:
    """Mixture over anchor states: pick U ~ weights, then draw component U."""

    weights: np.ndarray
    components: tuple
    tag: str
    dim: int = 1

    def sample(self, rng: np.random.Generator, size=None):
        scalar = size is None
        n = 1 if scalar else int(size)
        picks = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty(n) if self.dim == 1 else np.empty((n, self.dim))
        for j in range(len(self.components)):
            mask = picks == j
            cnt = int(mask.sum())
            if cnt:
                out[mask] = self.components[j](rng, cnt)
        if scalar:
            return out[0]
        return out


def _require_stable_regime(model, fns, rng, check_reps=2000):
    anchor = int(np.argmax(model.pi))
    diag = check_conditions(CyclePairSampler(model, anchor, fns), check_reps, rng)
    if diag.verdict != "convergent":
        raise NonConvergent(
            f"cycle pair at anchor {anchor} is {diag.verdict}: E log A = {diag.e_log_a:.4f}"
        )


def theorem1_law(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    sre_tol: float = _SRE_TOL,
    check_reps: int = 2000,
) -> MixtureLimitLaw:
    """Limit law of the accumulation coordinate in the convergent regime.

    Component at anchor j: g(a_j, b_j, T) + exp(-a_j T) V_j with T a
    size-biased averaged sojourn at j and V_j the stationary solution of
    the cycle-pair affine recursion at j.
    """
    if model.expected_pi_a(fns.a) <= 0:
        raise NonConvergent("convergent-regime law needs a positive occupation-average drift")
    _require_stable_regime(model, fns, rng, check_reps)

    def component(j: int):
        pair = CyclePairSampler(model, j, fns)
        a_j = float(fns.a[j])
        b_j = float(fns.b[j])

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            t = np.atleast_1d(pi_star_sample(model, j, rng, size))
            v = engine.sre_backward(pair.draw_log, size, rng, tol=sre_tol)
            gs, gl = log_g_fun(a_j, b_j, t)
            with np.errstate(over="ignore"):
                return gs * np.exp(gl) + np.exp(-a_j * t) * v

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T1", dim=1)


def theorem1_sample(model, fns, rng, law: MixtureLimitLaw | None = None):
    """One draw of the pair (decay limit, accumulation limit) = (0, mixture)."""
    law = theorem1_law(model, fns, rng) if law is None else law
    return 0.0, float(law.sample(rng))


def _sigma_scales(model, fns_vec, rng, var_reps):
    """Per-state sqrt(cycle variance / mean cycle length) with divergence guard."""
    scales = np.empty(model.n_states)
    for j in range(model.n_states):
        civ = cycle_integral_variance(model, j, fns_vec, var_reps, rng)
        if civ.infinite_variance_suspected:
            raise InfiniteVarianceSuspected(
                f"cycle variance at anchor {j} failed to stabilise ({civ.estimate:.3g})"
            )
        scales[j] = math.sqrt(civ.estimate / model.mean_cycle_length(j))
    return scales


def theorem2a_law(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    var_reps: int = 20_000,
) -> MixtureLimitLaw:
    """Gaussian mixture limit of the sqrt(t)-scaled centred log functionals.

    Both coordinates share one normal draw: the decay and accumulation logs
    fluctuate together to first order.
    """
    scales = _sigma_scales(model, fns.a, rng, var_reps)

    def component(j: int):
        s = float(scales[j])

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            n = s * rng.standard_normal(size)
            return np.column_stack([n, n])

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T2a", dim=2)


def theorem2a_sample(model, fns, rng, law: MixtureLimitLaw | None = None):
    law = theorem2a_law(model, fns, rng) if law is None else law
    x, y = law.sample(rng)
    return float(x), float(y)


def theorem2b_law(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    var_reps: int = 20_000,
) -> MixtureLimitLaw:
    """Critical-case limit: scaled Brownian (endpoint, running max) mixture."""
    drift = model.expected_pi_a(fns.a)
    if abs(drift) > _CRITICAL_TOL:
        raise NotCritical(f"occupation-average drift is {drift!r}, not 0")
    if not np.any(fns.b != 0):
        raise ValueError("critical-case law needs b not identically zero")
    scales = _sigma_scales(model, fns.a, rng, var_reps)

    def component(j: int):
        s = float(scales[j])

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            f1, f2 = brownian_max_pair_sample(rng, size)
            return np.column_stack([s * f1, s * f2])

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T2b", dim=2)


def theorem2b_sample(model, fns, rng, law: MixtureLimitLaw | None = None):
    law = theorem2b_law(model, fns, rng) if law is None else law
    x, y = law.sample(rng)
    return float(x), float(y)


@dataclass(frozen=True)
class StableCaseParams:
    """Closed-form stable mixture parameters for the heavy-tailed regime.

    heavy_plus/heavy_minus are the transitions carrying the dominant
    regularly varying sojourn tails, split by the sign of the centred
    coefficient at their departure state.
    """

    alpha: float
    sigma: np.ndarray
    beta: np.ndarray
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    heavy_plus: tuple
    heavy_minus: tuple
    e_pi_a: float


def theorem3_params(
    model: SemiMarkovModel,
    fns: StateFns,
    alpha: float | None = None,
    tail_constants: dict | None = None,
) -> StableCaseParams:
    """Assemble the per-state stable scale and skewness from the marginal data.

    Uses the mean embedded return count 1/mu_j together with the per
    transition tail constants c_il and centred coefficients; only
    transitions whose sojourn tail index equals the dominant (smallest)
    index participate.
    """
    e_pi_a = model.expected_pi_a(fns.a)
    ahat = fns.a - e_pi_a

    tails = {}
    for (i, j), law in model.sojourn.items():
        spec = law.tail()
        if spec is not None:
            tails[(i, j)] = spec
    if not tails:
        raise EmptyHeavySet("no transition carries a regularly varying sojourn law")
    if alpha is None:
        alpha = min(spec.index for spec in tails.values())
    heavy = {key: spec for key, spec in tails.items() if abs(spec.index - alpha) < 1e-9}
    if not heavy:
        raise EmptyHeavySet(f"no transition has tail index {alpha}")
    if not (1.0 < alpha < 2.0):
        raise EmptyHeavySet(f"dominant tail index {alpha} outside (1, 2)")

    heavy_plus = tuple(sorted(k for k in heavy if ahat[k[0]] > 0))
    heavy_minus = tuple(sorted(k for k in heavy if ahat[k[0]] < 0))

    def c_of(key):
        if tail_constants is not None and key in tail_constants:
            return float(tail_constants[key])
        return heavy[key].constant

    plus_sum = sum(
        model.mu[i] * model.transition[i, l] * c_of((i, l)) * ahat[i] ** alpha
        for (i, l) in heavy_plus
    )
    minus_sum = sum(
        model.mu[i] * model.transition[i, l] * c_of((i, l)) * abs(ahat[i]) ** alpha
        for (i, l) in heavy_minus
    )
    steps_per_cycle = 1.0 / model.mu  # mean embedded return count at each anchor
    alpha_plus = steps_per_cycle * plus_sum
    alpha_minus = steps_per_cycle * minus_sum
    total = alpha_plus + alpha_minus
    sigma = total ** (1.0 / alpha)
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = np.where(total > 0, (alpha_minus - alpha_plus) / np.where(total > 0, total, 1.0), 0.0)
    return StableCaseParams(
        alpha=float(alpha),
        sigma=sigma,
        beta=beta,
        alpha_plus=alpha_plus,
        alpha_minus=alpha_minus,
        heavy_plus=heavy_plus,
        heavy_minus=heavy_minus,
        e_pi_a=e_pi_a,
    )


def _stable_mixture_scales(params: StableCaseParams, model: SemiMarkovModel) -> np.ndarray:
    lengths = np.array([model.mean_cycle_length(j) for j in range(model.n_states)])
    return params.sigma * lengths ** (-1.0 / params.alpha)


def theorem3a_law(params: StableCaseParams, model: SemiMarkovModel) -> MixtureLimitLaw:
    """Heavy-tail analogue of the Gaussian limit: one shared stable draw."""
    scales = _stable_mixture_scales(params, model)

    def component(j: int):
        s = float(scales[j])
        sp = StableParams(alpha=params.alpha, skew=float(params.beta[j]))

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            v = s * stable_sample(sp, rng, size)
            return np.column_stack([v, v])

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T3a", dim=2)


def theorem3a_sample(params, model, rng, law: MixtureLimitLaw | None = None):
    law = theorem3a_law(params, model) if law is None else law
    x, y = law.sample(rng)
    return float(x), float(y)


def theorem3b_law(
    params: StableCaseParams,
    model: SemiMarkovModel,
    steps: int = 2**14,
) -> MixtureLimitLaw:
    """Critical heavy-tail limit: scaled (endpoint, supremum) of a stable path."""
    if abs(params.e_pi_a) > _CRITICAL_TOL:
        raise NotCritical(f"occupation-average drift is {params.e_pi_a!r}, not 0")
    scales = _stable_mixture_scales(params, model)

    def component(j: int):
        s = float(scales[j])
        beta_j = float(params.beta[j])

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            end, sup = sup_stable_path_sample(params.alpha, beta_j, steps, rng, size=size)
            return np.column_stack([s * end, s * sup])

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T3b", dim=2)


def theorem3b_sample(params, model, steps, rng, law: MixtureLimitLaw | None = None):
    law = theorem3b_law(params, model, steps) if law is None else law
    x, y = law.sample(rng)
    return float(x), float(y)


def theorem4a_law(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    sre_tol: float = _SRE_TOL,
    check_reps: int = 2000,
) -> MixtureLimitLaw:
    """Limit of exp(a t) * accumulation for a constant negative decay rate.

    Component at anchor j adds the pre-hit piece, integrated from the
    model's own initial state up to the first entry into j, to the cycle
    fixed point discounted back through exp(a tau0).
    """
    a_vals = np.unique(fns.a)
    if a_vals.size != 1:
        raise NotConstantA("this regime needs a state-independent decay coefficient")
    a = float(a_vals[0])
    if a >= 0:
        raise NotConstantA(f"decay coefficient must be negative, got {a}")

    anchor = int(np.argmax(model.pi))
    diag = check_conditions(StartAnchoredPairSampler(model, anchor, fns), check_reps, rng)
    if diag.verdict != "convergent":
        raise NonConvergent(f"start-anchored cycle pair is {diag.verdict}")

    def component(j: int):
        pair = StartAnchoredPairSampler(model, j, fns)

        def draw(rng: np.random.Generator, size: int) -> np.ndarray:
            targets = np.full(size, j, dtype=np.int64)
            tau0, pre = engine.pre_hit_batch(model, targets, rng, a, fns.b)
            v = engine.sre_backward(pair.draw_log, size, rng, tol=sre_tol)
            return pre + np.exp(a * tau0) * v

        return draw

    comps = tuple(component(j) for j in range(model.n_states))
    return MixtureLimitLaw(weights=model.pi, components=comps, tag="T4a", dim=1)


def theorem4a_sample(model, fns, rng, law: MixtureLimitLaw | None = None):
    law = theorem4a_law(model, fns, rng) if law is None else law
    return float(law.sample(rng))


@dataclass(frozen=True)
class Theorem4bReport:
    """Zero-decay regime summary: linear drift and, when finite, CLT scales."""

    e_pi_b: float
    clt_scale: np.ndarray | None
    variances: np.ndarray | None
    infinite_variance_suspected: bool


def theorem4b_check(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    var_reps: int = 20_000,
) -> Theorem4bReport:
    """Exact linear growth rate of the accumulation plus its CLT scale.

    Requires the decay coefficient to vanish identically; a constant b then
    makes the accumulation exactly b*t, reported with zero scale.
    """
    if np.any(fns.a != 0):
        raise NotConstantA("zero-decay regime needs a identically 0")
    e_pi_b = model.expected_pi_a(fns.b)
    if np.unique(fns.b).size == 1:
        zeros = np.zeros(model.n_states)
        return Theorem4bReport(e_pi_b=e_pi_b, clt_scale=zeros, variances=zeros, infinite_variance_suspected=False)
    variances = np.empty(model.n_states)
    scales = np.empty(model.n_states)
    suspected = False
    for j in range(model.n_states):
        civ = cycle_integral_variance(model, j, fns.b, var_reps, rng)
        variances[j] = civ.estimate
        scales[j] = math.sqrt(civ.estimate / model.mean_cycle_length(j))
        suspected = suspected or civ.infinite_variance_suspected
    if suspected:
        return Theorem4bReport(e_pi_b=e_pi_b, clt_scale=None, variances=variances, infinite_variance_suspected=True)
    return Theorem4bReport(e_pi_b=e_pi_b, clt_scale=scales, variances=variances, infinite_variance_suspected=False)
