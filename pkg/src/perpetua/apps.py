"""Exact simulators for the two flagship applications.

Both applications are driven through their closed state-space forms, never
by ODE/SDE stepping: the bifurcation radius satisfies
rho_t^{-2} = rho_0^{-2} phi_t(2a) + 2 i_t(2a, b), and the transformed
diffusion satisfies h(X_t) = h(x0) phi_t(a) + sqrt(i_t(2a, b^2)) N given
the environment path.  Steppers exist only as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import CaseMismatch, DomainError, NonPositiveB, NoSignChange, UnsupportedAlpha
from .limitlaws import MixtureLimitLaw, theorem1_law, theorem3_params
from .numerics import signed_log_add
from .perpetuity import StateFns, functional_at_times
from .semimarkov import SemiMarkovModel, Trajectory, simulate
from .sre import CyclePairSampler, KestenResult, kesten_exponent

_REJECTION_RATE_LIMIT = 1e-3


@dataclass(frozen=True)
class HTransform:
    """Monotone transform linearising the diffusion, with its inverse and kernel.

    beta is the diffusion kernel (h' = 1/beta); (range_lo, range_hi) bound
    the open range of h, outside which the inverse is undefined.
    """

    name: str
    h: callable
    h_inv: callable
    beta: callable
    beta_prime: callable
    range_lo: float
    range_hi: float

    @staticmethod
    def identity() -> "HTransform":
        return HTransform(
            name="identity",
            h=lambda x: x,
            h_inv=lambda y: y,
            beta=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            beta_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            range_lo=-math.inf,
            range_hi=math.inf,
        )

    @staticmethod
    def arctan() -> "HTransform":
        return HTransform(
            name="arctan",
            h=np.arctan,
            h_inv=np.tan,
            beta=lambda x: np.asarray(x, dtype=float) ** 2 + 1.0,
            beta_prime=lambda x: 2.0 * np.asarray(x, dtype=float),
            range_lo=-math.pi / 2.0,
            range_hi=math.pi / 2.0,
        )

    @staticmethod
    def exp() -> "HTransform":
        return HTransform(
            name="exp",
            h=np.exp,
            h_inv=np.log,
            beta=lambda x: np.exp(-np.asarray(x, dtype=float)),
            beta_prime=lambda x: -np.exp(-np.asarray(x, dtype=float)),
            range_lo=0.0,
            range_hi=math.inf,
        )

    @staticmethod
    def by_name(name: str) -> "HTransform":
        try:
            return {"identity": HTransform.identity, "arctan": HTransform.arctan, "exp": HTransform.exp}[name]()
        except KeyError:
            raise ValueError(f"unknown transform {name!r}") from None


@dataclass(frozen=True)
class PitchforkState:
    """Radius-squared path of the modulated bifurcation along one environment."""

    rho0: float
    times: np.ndarray
    rho_sq: np.ndarray
    trajectory: Trajectory


def _pitchfork_fns(fns: StateFns) -> StateFns:
    if np.any(fns.b <= 0):
        raise NonPositiveB("bifurcation dynamics need b(j) > 0 for every state")
    return StateFns(2.0 * fns.a, fns.b)


def pitchfork_path_on(traj: Trajectory, fns: StateFns, rho0: float, times) -> PitchforkState:
    """Evaluate the closed-form radius along a frozen environment path."""
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    fns2 = _pitchfork_fns(fns)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    folds = functional_at_times(traj, fns2, times)
    log_inv = np.array(
        [np.logaddexp(-2.0 * math.log(rho0) + f.log_phi, math.log(2.0) + f.log_abs_i) for f in folds]
    )
    return PitchforkState(rho0=float(rho0), times=times, rho_sq=np.exp(-log_inv), trajectory=traj)


def pitchfork_path(
    model: SemiMarkovModel,
    fns: StateFns,
    rho0: float,
    times,
    rng: np.random.Generator,
) -> PitchforkState:
    """Simulate one environment and evaluate the exact radius path on it."""
    horizon = float(np.max(np.atleast_1d(times)))
    traj = simulate(model, max(horizon, 1e-9), rng)
    return pitchfork_path_on(traj, fns, rho0, times)


def pitchfork_stationary_law(model: SemiMarkovModel, fns: StateFns, rng: np.random.Generator) -> MixtureLimitLaw:
    _pitchfork_fns(fns)
    return theorem1_law(model, StateFns(2.0 * fns.a, fns.b), rng)


def pitchfork_stationary_sample(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    size=None,
    law: MixtureLimitLaw | None = None,
):
    """Draw from the long-time law of the squared radius: 1 / (2 Z)."""
    law = pitchfork_stationary_law(model, fns, rng) if law is None else law
    z = law.sample(rng, size)
    return 1.0 / (2.0 * z)


@dataclass(frozen=True)
class SmallBallResult:
    """Small-ball decay exponent of the stationary radius near zero."""

    nu_star: float
    per_state: tuple[KestenResult, ...]


def smallball_exponent(
    model: SemiMarkovModel,
    fns: StateFns,
    rng: np.random.Generator,
    reps: int = 200_000,
    bracket: tuple[float, float] = (0.02, 2.0),
) -> SmallBallResult:
    """Tail exponent of 1/rho^2_inf: min over anchors of the root of E[A^nu] = 1.

    A is the squared-decay cycle factor exp(-2 int of a over the cycle);
    a root exists only when some state has a negative coefficient while the
    occupation-average drift stays positive.
    """
    if float(np.min(fns.a)) >= 0:
        raise NoSignChange("all a(j) >= 0: the cycle factor never exceeds 1")
    fns2 = StateFns(2.0 * fns.a, fns.b)
    results = []
    for j in range(model.n_states):
        pair = CyclePairSampler(model, j, fns2)
        results.append(kesten_exponent(pair, bracket, reps, rng))
    nu_star = min(r.nu for r in results)
    return SmallBallResult(nu_star=nu_star, per_state=tuple(results))


def _h_checked_inverse(h: HTransform, values: np.ndarray) -> np.ndarray:
    return h.h_inv(values)


def _gaussian_value_with_rejection(
    h: HTransform,
    hx0_phi: np.ndarray,
    sqrt_i: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """h(x0)*phi + sqrt(i)*N, redrawing N while the value leaves h's range.

    Rejections are counted; a rate above 1e-3 aborts loudly rather than
    silently distorting the output law.
    """
    size = hx0_phi.size
    val = hx0_phi + sqrt_i * rng.standard_normal(size)
    if math.isinf(h.range_lo) and math.isinf(h.range_hi):
        return val
    rejections = 0
    bad = (val <= h.range_lo) | (val >= h.range_hi)
    rounds = 0
    while bad.any():
        rounds += 1
        rejections += int(bad.sum())
        if rounds > 200:
            raise DomainError(f"transform {h.name}: values stuck outside the range")
        val[bad] = hx0_phi[bad] + sqrt_i[bad] * rng.standard_normal(int(bad.sum()))
        bad = (val <= h.range_lo) | (val >= h.range_hi)
    if rejections > _REJECTION_RATE_LIMIT * size and rejections > 2:
        raise DomainError(
            f"transform {h.name}: rejection rate {rejections / size:.2e} exceeds {_REJECTION_RATE_LIMIT}"
        )
    return val


def gou_sample(
    model: SemiMarkovModel,
    fns: StateFns,
    h: HTransform,
    x0: float,
    t: float,
    rng: np.random.Generator,
    size=None,
):
    """Exact draw(s) of the transformed diffusion at time t.

    Simulates fresh environment paths, computes phi(a) and i(2a, b^2) on
    each, and maps the conditionally Gaussian value back through h^{-1}.
    """
    scalar = size is None
    n = 1 if scalar else int(size)
    bf = engine.phi_i_batch(model, t, n, rng, fns.a, 2.0 * fns.a, fns.b**2)
    hx0_phi = float(h.h(x0)) * np.exp(bf.log_phi)
    sqrt_i = np.exp(0.5 * bf.log_abs_i) * (bf.i_sign > 0)
    val = _gaussian_value_with_rejection(h, hx0_phi, sqrt_i, rng)
    out = _h_checked_inverse(h, val)
    return float(out[0]) if scalar else out


def gou_stationary_sample(
    model: SemiMarkovModel,
    fns: StateFns,
    h: HTransform,
    rng: np.random.Generator,
    size=None,
    law: MixtureLimitLaw | None = None,
):
    """Long-time law of the transformed diffusion: h^{-1}(sqrt(Z) N)."""
    law = theorem1_law(model, StateFns(2.0 * fns.a, fns.b**2), rng) if law is None else law
    scalar = size is None
    n = 1 if scalar else int(size)
    z = np.atleast_1d(law.sample(rng, n))
    sqrt_z = np.sqrt(np.maximum(z, 0.0))
    val = _gaussian_value_with_rejection(h, np.zeros(n), sqrt_z, rng)
    out = _h_checked_inverse(h, val)
    return float(out[0]) if scalar else out


def _stable_noise_fns(fns: StateFns, alpha_star: float) -> StateFns:
    if not (1.0 < alpha_star < 2.0):
        raise UnsupportedAlpha(f"stable noise index must lie in (1, 2), got {alpha_star}")
    if np.any(fns.b < 0):
        raise ValueError("stable-noise dynamics need b(j) >= 0")
    return StateFns(alpha_star * fns.a, fns.b**alpha_star)


def stable_ou_sample(
    model: SemiMarkovModel,
    fns: StateFns,
    alpha_star: float,
    x0: float,
    t: float,
    rng: np.random.Generator,
    size=None,
):
    """Exact draw(s) of the linear diffusion driven by symmetric stable noise.

    Conditional on the path, X_t = x0 phi(a) + |i(alpha* a, b^alpha*)|^(1/alpha*) S
    with S a standard symmetric stable variate of index alpha*.
    """
    from .distributions import StableParams, stable_sample

    noise_fns = _stable_noise_fns(fns, alpha_star)
    scalar = size is None
    n = 1 if scalar else int(size)
    bf = engine.phi_i_batch(model, t, n, rng, fns.a, noise_fns.a, noise_fns.b)
    s = stable_sample(StableParams(alpha=alpha_star), rng, n)
    out = x0 * np.exp(bf.log_phi) + np.exp(bf.log_abs_i / alpha_star) * (bf.i_sign != 0) * s
    return float(out[0]) if scalar else out


def stable_ou_stationary_sample(
    model: SemiMarkovModel,
    fns: StateFns,
    alpha_star: float,
    rng: np.random.Generator,
    size=None,
    law: MixtureLimitLaw | None = None,
):
    """Long-time law under stable noise: |Z*|^(1/alpha*) times a fresh stable draw."""
    from .distributions import StableParams, stable_sample

    noise_fns = _stable_noise_fns(fns, alpha_star)
    law = theorem1_law(model, noise_fns, rng) if law is None else law
    scalar = size is None
    n = 1 if scalar else int(size)
    z = np.atleast_1d(law.sample(rng, n))
    s = stable_sample(StableParams(alpha=alpha_star), rng, n)
    out = np.abs(z) ** (1.0 / alpha_star) * s
    return float(out[0]) if scalar else out


_PITCHFORK_CASES = {"pitchfork-b1", "pitchfork-b2", "pitchfork-c1", "pitchfork-c2", "pitchfork-d1", "pitchfork-d2"}
_OU_CASES = {"ou-b1", "ou-b2", "ou-c1", "ou-c2", "ou-d1", "ou-d2"}


def divergence_transforms(
    model: SemiMarkovModel,
    fns: StateFns,
    case: str,
    t: float,
    rng: np.random.Generator,
    size=None,
    rho0: float = 1.0,
    h: HTransform | None = None,
    x0: float = 1.0,
    alpha: float | None = None,
):
    """Theorem-appropriate scaled statistic of a simulated application path.

    Case tags pair an application ("pitchfork" or "ou") with a regime:
    b1/b2 for the finite-variance divergent/critical cases, c1/c2 for their
    heavy-tailed analogues, d1/d2 for constant decay (negative / zero).
    Pass/fail judgement lives with the verification statistics, not here.
    """
    if case not in _PITCHFORK_CASES | _OU_CASES:
        raise CaseMismatch(f"unknown case tag {case!r}")
    drift = model.expected_pi_a(fns.a)
    regime = case.split("-")[1]
    if regime in ("b1", "c1") and drift >= 0:
        raise CaseMismatch(f"{case} needs a negative occupation-average drift, got {drift}")
    if regime in ("b2", "c2") and abs(drift) > 1e-12:
        raise CaseMismatch(f"{case} needs zero occupation-average drift, got {drift}")
    if regime in ("d1", "d2"):
        vals = np.unique(fns.a)
        if vals.size != 1:
            raise CaseMismatch(f"{case} needs a constant decay coefficient")
        if regime == "d1" and vals[0] >= 0:
            raise CaseMismatch(f"{case} needs a negative constant, got {vals[0]}")
        if regime == "d2" and vals[0] != 0:
            raise CaseMismatch(f"{case} needs a zero constant, got {vals[0]}")
    if regime in ("c1", "c2"):
        if alpha is None:
            alpha = theorem3_params(model, fns).alpha

    scalar = size is None
    n = 1 if scalar else int(size)

    if case in _PITCHFORK_CASES:
        fns2 = _pitchfork_fns(fns)
        if rho0 <= 0:
            raise ValueError("rho0 must be positive")
        bf = engine.phi_i_batch(model, t, n, rng, fns2.a, fns2.a, fns2.b)
        log_inv = np.logaddexp(-2.0 * math.log(rho0) + bf.log_phi, math.log(2.0) + bf.log_abs_i)
        if regime == "b1":
            out = (log_inv + 2.0 * t * drift) / math.sqrt(t)
        elif regime == "b2":
            out = log_inv / math.sqrt(t)
        elif regime == "c1":
            out = (log_inv + 2.0 * t * drift) / t ** (1.0 / alpha)
        elif regime == "c2":
            out = log_inv / t ** (1.0 / alpha)
        elif regime == "d1":
            out = np.exp(log_inv + 2.0 * float(fns.a[0]) * t)
        else:
            out = np.exp(log_inv - math.log(t))
    else:
        h = HTransform.identity() if h is None else h
        bf = engine.phi_i_batch(model, t, n, rng, fns.a, 2.0 * fns.a, fns.b**2)
        nvals = rng.standard_normal(n)
        hx0 = float(h.h(x0))
        s_log, l_log = signed_log_add(
            np.full(n, np.sign(hx0), dtype=np.int8),
            math.log(abs(hx0)) if hx0 != 0 else -math.inf + np.zeros(n),
            np.sign(nvals).astype(np.int8),
            0.5 * bf.log_abs_i + np.log(np.abs(nvals)),
        )
        log_habs = np.where(s_log == 0, -np.inf, l_log)
        if regime == "b1":
            out = (log_habs + t * drift) / math.sqrt(t)
        elif regime == "b2":
            out = log_habs / math.sqrt(t)
        elif regime == "c1":
            out = (log_habs + t * drift) / t ** (1.0 / alpha)
        elif regime == "c2":
            out = log_habs / t ** (1.0 / alpha)
        elif regime == "d1":
            out = s_log * np.exp(log_habs + float(fns.a[0]) * t)
        else:
            out = s_log * np.exp(log_habs - 0.5 * math.log(t))

    return float(out[0]) if scalar else out
