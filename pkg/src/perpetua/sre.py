"""Affine stochastic recurrence machinery: X =d= A X + B.

Pair samplers deliver iid (A, B) draws with A > 0 reported in log form so
that heavy excursions of the multiplicative part never overflow.  On top
of them sit contraction diagnostics, backward-series stationary sampling,
the moment recursion, and the tail-exponent root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import engine
from .errors import MomentDiverges, NonConvergent, NoSignChange
from .perpetuity import StateFns
from .semimarkov import SemiMarkovModel

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


class ConstantPair:
    """Degenerate sampler for a fixed (A, B) pair."""

    def __init__(self, a: float, b: float):
        if a < 0:
            raise ValueError("A must be nonnegative")
        self.a = float(a)
        self.b = float(b)
        self._log_a = math.log(a) if a > 0 else -math.inf

    def draw_log(self, rng: np.random.Generator, size: int):
        return np.full(size, self._log_a), np.full(size, self.b)


class CyclePairSampler:
    """(A, B) = (decay, discounted increment) over fresh anchored cycles."""

    def __init__(self, model: SemiMarkovModel, anchor: int, fns: StateFns):
        self.model = model
        self.anchor = int(anchor)
        self.fns = fns

    def draw_log(self, rng: np.random.Generator, size: int):
        cb = engine.cycle_stats(self.model, self.anchor, size, rng, a=self.fns.a, b=self.fns.b)
        return cb.log_l, cb.q


class StartAnchoredPairSampler:
    """(A, B) = (1/L, Q/L): increments discounted from the cycle start.

    With a constant decay coefficient a this is
    (exp(a * cycle length), int over the cycle of b(Y_s) exp(a (s - start)) ds).
    """

    def __init__(self, model: SemiMarkovModel, anchor: int, fns: StateFns):
        self.model = model
        self.anchor = int(anchor)
        self.fns = fns

    def draw_log(self, rng: np.random.Generator, size: int):
        cb = engine.cycle_stats(self.model, self.anchor, size, rng, a=self.fns.a, b=self.fns.b)
        with np.errstate(over="ignore"):
            b = cb.q_sign * np.exp(cb.log_abs_q - cb.log_l)
        return -cb.log_l, b


def draw_pairs(sampler, rng: np.random.Generator, size: int):
    """Linear (A, B) draws; prefer draw_log for anything tail-sensitive."""
    log_a, b = sampler.draw_log(rng, size)
    with np.errstate(over="ignore"):
        return np.exp(log_a), b


@dataclass(frozen=True)
class SreDiagnostics:
    """Monte-Carlo contraction check for an affine pair sampler."""

    e_log_a: float
    e_log_a_ci: tuple[float, float]
    e_log_plus_b: float
    e_log_plus_b_stderr: float
    verdict: str  # "convergent" | "divergent" | "inconclusive"


def check_conditions(sampler, reps: int, rng: np.random.Generator) -> SreDiagnostics:
    """Estimate E log A and E log+ |B| with normal-approximation 99% CIs.

    The verdict is convergent only when the whole CI for E log A sits
    strictly below zero and the log+ |B| estimate is finite.
    """
    if reps < 1000:
        raise ValueError("need at least 1e3 replications for the contraction check")
    log_a, b = sampler.draw_log(rng, reps)
    mean_la = float(np.mean(log_a))
    if math.isinf(mean_la):  # P[A = 0] > 0 contracts immediately
        ci = (mean_la, mean_la)
    else:
        se_la = float(np.std(log_a, ddof=1) / math.sqrt(reps))
        ci = (mean_la - _Z99 * se_la, mean_la + _Z99 * se_la)
    log_plus = np.log(np.maximum(np.abs(b), 1.0))
    mean_lb = float(np.mean(log_plus))
    se_lb = float(np.std(log_plus, ddof=1) / math.sqrt(reps))
    if ci[1] < 0 and math.isfinite(mean_lb):
        verdict = "convergent"
    elif ci[0] > 0:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return SreDiagnostics(mean_la, ci, mean_lb, se_lb, verdict)


def stationary_sample(
    sampler,
    tol: float,
    rng: np.random.Generator,
    size=None,
    cap: int = 10_000_000,
):
    """Backward-series draw(s) of the stationary law of X = A X + B.

    Truncates when the running product of A's falls below tol, so the
    truncation error is bounded by tol times the magnitude of the tail.
    """
    scalar = size is None
    n = 1 if scalar else int(size)
    out = engine.sre_backward(sampler.draw_log, n, rng, tol=tol, cap=cap)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class SreMoments:
    """Moment-recursion output E[X], ..., E[X^m] with batch standard errors."""

    values: np.ndarray
    stderrs: np.ndarray


def sre_moments(
    sampler,
    order: int,
    reps: int,
    rng: np.random.Generator,
    batches: int = 16,
) -> SreMoments:
    """Recursive moments of the affine fixed point from MC mixed moments.

    Uses E[X^m] (1 - E A^m) = sum_{k<m} C(m,k) E[A^k B^{m-k}] E[X^k]; the
    mixed moments are estimated per batch and the recursion rerun per batch
    to yield joint standard errors.  Raises when E[A^m] cannot be bounded
    away from 1.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    log_a, b = sampler.draw_log(rng, reps)
    with np.errstate(over="ignore"):
        a = np.exp(log_a)

    # divergence guard on the pooled sample
    for m in range(1, order + 1):
        am = a**m
        est = float(np.mean(am))
        se = float(np.std(am, ddof=1) / math.sqrt(reps))
        if est + _Z99 * se >= 1.0:
            raise MomentDiverges(f"E[A^{m}] = {est:.4f} +- {se:.4f} is not below 1")

    def recursion(av: np.ndarray, bv: np.ndarray) -> np.ndarray:
        vals = np.zeros(order + 1)
        vals[0] = 1.0
        for m in range(1, order + 1):
            eam = float(np.mean(av**m))
            acc = 0.0
            for k in range(m):
                mixed = float(np.mean(av**k * bv ** (m - k)))
                acc += math.comb(m, k) * mixed * vals[k]
            vals[m] = acc / (1.0 - eam)
        return vals[1:]

    pooled = recursion(a, b)
    idx = np.array_split(np.arange(reps), batches)
    per_batch = np.array([recursion(a[s], b[s]) for s in idx])
    stderr = per_batch.std(axis=0, ddof=1) / math.sqrt(batches)
    return SreMoments(values=pooled, stderrs=stderr)


@dataclass(frozen=True)
class KestenResult:
    """Root of log E[A^nu] = 0 located by common-random-number bisection."""

    nu: float
    bracket: tuple[float, float]
    h_at_nu: float
    h_stderr: float


def kesten_exponent(
    sampler,
    bracket: tuple[float, float],
    reps: int,
    rng: np.random.Generator,
    width_tol: float = 1e-3,
) -> KestenResult:
    """Find the positive tail exponent nu solving E[A^nu] = 1.

    h(nu) = log E[A^nu] is estimated by logsumexp over a fresh batch of
    log A draws per refinement level; within a level the same batch is
    reused across nu evaluations to tame the Monte-Carlo noise.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def h(nu: float, log_a: np.ndarray) -> float:
        return float(logsumexp(nu * log_a) - math.log(len(log_a)))

    log_a, _ = sampler.draw_log(rng, reps)
    if not (h(lo, log_a) < 0 < h(hi, log_a)):
        raise NoSignChange(
            f"no root in ({lo}, {hi}): h(lo) = {h(lo, log_a):.4f}, h(hi) = {h(hi, log_a):.4f}"
        )
    while hi - lo > width_tol:
        log_a, _ = sampler.draw_log(rng, reps)
        mid = 0.5 * (lo + hi)
        if h(mid, log_a) > 0:
            hi = mid
        else:
            lo = mid
    nu = 0.5 * (lo + hi)
    log_a, _ = sampler.draw_log(rng, reps)
    x = nu * log_a
    h_final = h(nu, log_a)
    # delta method: se(log mean(Y)) ~ sd(Y) / (mean(Y) sqrt(n)) with Y = A^nu
    with np.errstate(over="ignore"):
        y = np.exp(x)
    se = float(np.std(y, ddof=1) / (np.mean(y) * math.sqrt(reps)))
    return KestenResult(nu=nu, bracket=(lo, hi), h_at_nu=h_final, h_stderr=se)
