"""Exact evaluation of the discounted path functionals along a trajectory.

The pair tracked is (decay factor, discounted accumulation):

    phi_t = exp(-int_0^t a(Y_r) dr),
    i_t   = int_0^t b(Y_s) exp(-int_s^t a(Y_r) dr) ds.

Both are folded segment by segment in signed-log space, because in the
divergent regimes log|i_t| grows linearly in t and linear doubles overflow
near t ~ 700 / |drift|.  An exact zero of i is tracked by sign 0 rather
than log(0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import NeverHits, OutOfRange
from .numerics import NEG_INF, log_g_fun, signed_log_add, signed_log_to_float
from .semimarkov import CycleIndex, SemiMarkovModel, Trajectory


@dataclass(frozen=True)
class StateFns:
    """Per-state coefficient vectors driving the functionals."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be equal-length vectors")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class SignedLogFunctional:
    """Numerically stable state of the (phi, i) fold.

    phi = exp(log_phi) > 0 always; i = i_sign * exp(log_abs_i) with
    i_sign in {-1, 0, +1} and log_abs_i = -inf exactly when i_sign = 0.
    """

    log_phi: float = 0.0
    i_sign: int = 0
    log_abs_i: float = NEG_INF

    @property
    def phi(self) -> float:
        return math.exp(self.log_phi)

    @property
    def i(self) -> float:
        return float(signed_log_to_float(self.i_sign, self.log_abs_i))


def g_fun(c: float, d: float, x: float) -> float:
    """Segment integral int_0^x d*exp(-c(x-s)) ds in linear arithmetic.

    Returns x*d when c = 0 and (d/c)(1 - exp(-xc)) otherwise; |xc| below
    1e-8 takes a two-term series so the c -> 0 limit is continuous.
    """
    s, l = log_g_fun(c, d, x)
    return float(signed_log_to_float(s, l))


def accumulate(f: SignedLogFunctional, state: int, dt: float, fns: StateFns) -> SignedLogFunctional:
    """Extend the fold by one sojourn of length dt in the given state."""
    if dt <= 0:
        raise ValueError("segment duration must be positive")
    a = float(fns.a[state])
    b = float(fns.b[state])
    log_phi = f.log_phi - a * dt
    gs, gl = log_g_fun(a, b, dt)
    i_sign, log_abs_i = signed_log_add(f.i_sign, f.log_abs_i - a * dt, gs, gl)
    return SignedLogFunctional(log_phi, int(i_sign), float(log_abs_i))


def functional_at_times(traj: Trajectory, fns: StateFns, times) -> list[SignedLogFunctional]:
    """Evaluate the fold at each query time in one pass over the segments."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(times > traj.coverage):
        raise OutOfRange(f"query times must lie in [0, {traj.coverage}]")
    order = np.argsort(times, kind="stable")
    out: list[SignedLogFunctional] = [None] * len(times)  # type: ignore[list-item]
    f = SignedLogFunctional()
    seg = 0
    consumed = 0.0  # epoch up to which f is folded
    for qi in order:
        t = float(times[qi])
        while seg < traj.n_segments and traj.epochs[seg + 1] <= t:
            f = accumulate(f, int(traj.states[seg]), float(traj.durations[seg]), fns)
            consumed = float(traj.epochs[seg + 1])
            seg += 1
        if t > consumed:
            partial = accumulate(f, int(traj.states[seg]), t - consumed, fns)
        else:
            partial = f
        out[qi] = partial
    return out


def compute_phi_i(traj: Trajectory, fns: StateFns, t: float) -> SignedLogFunctional:
    """Fold over all segments intersecting [0, t], truncating the last one."""
    return functional_at_times(traj, fns, [t])[0]


@dataclass(frozen=True)
class CycleQuantities:
    """Per-cycle multiplicative/additive pair at an anchor state, in log form.

    Cycle i carries l_i = exp(-int of a over the cycle) > 0 and the
    discounted increment q_i; the pre-cycle pair covers [0, first hit) and
    equals (1, 0) when the trajectory starts at the anchor.
    """

    log_l: np.ndarray
    q_sign: np.ndarray
    log_abs_q: np.ndarray
    pre_log_l: float
    pre_q_sign: int
    pre_log_abs_q: float

    @property
    def n_cycles(self) -> int:
        return len(self.log_l)

    @property
    def l(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_l)

    @property
    def q(self) -> np.ndarray:
        return signed_log_to_float(self.q_sign, self.log_abs_q)

    @property
    def pre_pair(self) -> tuple[float, float]:
        return math.exp(self.pre_log_l), float(signed_log_to_float(self.pre_q_sign, self.pre_log_abs_q))


def cycle_quantities(traj: Trajectory, ci: CycleIndex, fns: StateFns) -> CycleQuantities:
    """Fold the functionals over each complete anchor-to-anchor cycle.

    Concatenating the pre-cycle pair with the per-cycle pairs through the
    affine composition reproduces the full fold at any renewal epoch, which
    the test suite checks against compute_phi_i directly.
    """
    if ci.n_cycles < 1:
        raise NeverHits(f"no complete cycle at state {ci.target} before the horizon")

    def fold(seg_lo: int, seg_hi: int) -> SignedLogFunctional:
        f = SignedLogFunctional()
        for k in range(seg_lo, seg_hi):
            f = accumulate(f, int(traj.states[k]), float(traj.durations[k]), fns)
        return f

    pre = fold(0, int(ci.segment_hits[0]))
    log_l = np.empty(ci.n_cycles)
    q_sign = np.empty(ci.n_cycles, dtype=np.int8)
    log_abs_q = np.empty(ci.n_cycles)
    for i in range(ci.n_cycles):
        f = fold(int(ci.segment_hits[i]), int(ci.segment_hits[i + 1]))
        log_l[i] = f.log_phi
        q_sign[i] = f.i_sign
        log_abs_q[i] = f.log_abs_i
    return CycleQuantities(
        log_l=log_l,
        q_sign=q_sign,
        log_abs_q=log_abs_q,
        pre_log_l=pre.log_phi,
        pre_q_sign=pre.i_sign,
        pre_log_abs_q=pre.log_abs_i,
    )


@dataclass(frozen=True)
class CycleVariance:
    """Monte-Carlo variance of a centred cycle integral, with a stability flag."""

    estimate: float
    stderr: float
    infinite_variance_suspected: bool
    reps: int


# relative change of the running variance over the last half of the sample
# above which the estimate is treated as non-Cauchy (heavy-tail suspicion)
_CAUCHY_REL_TOL = 0.25


def cycle_integral_variance(
    model: SemiMarkovModel,
    j: int,
    f,
    reps: int,
    rng: np.random.Generator,
) -> CycleVariance:
    """Variance of int over one cycle of (f(Y_s) - pi-average of f) ds.

    The integrand is centred internally by the exact occupation average, so
    a constant f yields (numerically) zero.  The flag trips when the running
    estimate over the last half of the replications moves by more than 25%,
    the signature of an infinite-variance integrand.
    """
    f = np.asarray(f, dtype=float)
    fhat = f - model.expected_pi_a(f)
    ints = engine.cycle_integrals(model, j, reps, rng, fhat)
    half = ints[: reps // 2]
    v_half = float(np.var(half, ddof=1))
    v_full = float(np.var(ints, ddof=1))
    suspected = False
    if v_full > 0:
        suspected = abs(v_full - v_half) > _CAUCHY_REL_TOL * v_full
    # standard error of the sample variance from the fourth central moment
    centred = ints - ints.mean()
    m4 = float(np.mean(centred**4))
    se = math.sqrt(max(m4 - v_full**2, 0.0) / reps)
    return CycleVariance(estimate=v_full, stderr=se, infinite_variance_suspected=suspected, reps=reps)
