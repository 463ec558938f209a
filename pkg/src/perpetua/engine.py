"""Vectorised lockstep engine for replication-heavy runs.

All independent replications of a path functional advance segment by
segment in lockstep numpy arrays, with finished lanes compacted away.
The scalar folds in perpetuity/semimarkov are the reference semantics;
the test suite pins both routes against each other on shared seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergent
from .numerics import NEG_INF, log_g_fun, signed_log_add
from .semimarkov import SemiMarkovModel


@dataclass(frozen=True)
class BatchFunctionals:
    """Terminal fold state of a batch of independent paths."""

    log_phi: np.ndarray
    i_sign: np.ndarray
    log_abs_i: np.ndarray
    end_state: np.ndarray


def phi_i_batch(
    model: SemiMarkovModel,
    t: float,
    size: int,
    rng: np.random.Generator,
    a_phi,
    a_acc=None,
    b_acc=None,
) -> BatchFunctionals:
    """Fold `size` fresh paths up to time t, truncating the final segment.

    The decay coordinate uses the vector a_phi; the accumulation coordinate
    may use a different coefficient pair (a_acc, b_acc), which is how the
    diffusion representations obtain phi(a) and i(2a, b^2) on one path.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    a_phi = np.asarray(a_phi, dtype=float)
    a_acc = a_phi if a_acc is None else np.asarray(a_acc, dtype=float)
    b_acc = np.zeros_like(a_phi) if b_acc is None else np.asarray(b_acc, dtype=float)

    out_log_phi = np.zeros(size)
    out_i_sign = np.zeros(size, dtype=np.int8)
    out_log_abs_i = np.full(size, NEG_INF)
    out_end_state = np.zeros(size, dtype=np.int64)

    lanes = np.arange(size)
    state = np.asarray(model.draw_initial(rng, size))
    clock = np.zeros(size)
    log_phi = np.zeros(size)
    i_sign = np.zeros(size, dtype=np.int8)
    log_abs_i = np.full(size, NEG_INF)

    while lanes.size:
        nxt = model.draw_next(state, rng)
        dur = model.draw_durations(state, nxt, rng)
        crossing = clock + dur >= t
        eff = np.where(crossing, t - clock, dur)

        a1 = a_phi[state]
        a2 = a_acc[state]
        gs, gl = log_g_fun(a2, b_acc[state], eff)
        i_sign, log_abs_i = signed_log_add(i_sign, log_abs_i - a2 * eff, gs, gl)
        log_phi = log_phi - a1 * eff

        if crossing.any():
            done = lanes[crossing]
            out_log_phi[done] = log_phi[crossing]
            out_i_sign[done] = i_sign[crossing]
            out_log_abs_i[done] = log_abs_i[crossing]
            out_end_state[done] = state[crossing]

        live = ~crossing
        lanes = lanes[live]
        state = nxt[live]
        clock = (clock + dur)[live]
        log_phi = log_phi[live]
        i_sign = i_sign[live]
        log_abs_i = log_abs_i[live]

    return BatchFunctionals(out_log_phi, out_i_sign, out_log_abs_i, out_end_state)


@dataclass(frozen=True)
class CycleBatch:
    """Per-cycle statistics for independent anchor-to-anchor excursions."""

    log_l: np.ndarray
    q_sign: np.ndarray
    log_abs_q: np.ndarray
    length: np.ndarray
    steps: np.ndarray
    f_integral: np.ndarray | None = None

    @property
    def q(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.q_sign * np.exp(self.log_abs_q)


def cycle_stats(
    model: SemiMarkovModel,
    anchor: int,
    size: int,
    rng: np.random.Generator,
    a=None,
    b=None,
    f=None,
) -> CycleBatch:
    """Simulate `size` fresh cycles of the environment anchored at one state.

    Each lane starts at the anchor and runs the embedded chain until its
    first return, folding log L = -int a, the discounted increment Q, the
    cycle duration, the embedded step count and, optionally, the plain
    integral of a per-state vector f.
    """
    n = model.n_states
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    want_f = f is not None
    fv = np.asarray(f, dtype=float) if want_f else None

    out_log_l = np.zeros(size)
    out_q_sign = np.zeros(size, dtype=np.int8)
    out_log_abs_q = np.full(size, NEG_INF)
    out_length = np.zeros(size)
    out_steps = np.zeros(size, dtype=np.int64)
    out_f = np.zeros(size) if want_f else None

    lanes = np.arange(size)
    state = np.full(size, anchor, dtype=np.int64)
    log_l = np.zeros(size)
    q_sign = np.zeros(size, dtype=np.int8)
    log_abs_q = np.full(size, NEG_INF)
    length = np.zeros(size)
    steps = np.zeros(size, dtype=np.int64)
    f_int = np.zeros(size) if want_f else None

    while lanes.size:
        nxt = model.draw_next(state, rng)
        dur = model.draw_durations(state, nxt, rng)
        av = a[state]
        gs, gl = log_g_fun(av, b[state], dur)
        q_sign, log_abs_q = signed_log_add(q_sign, log_abs_q - av * dur, gs, gl)
        log_l = log_l - av * dur
        length = length + dur
        steps = steps + 1
        if want_f:
            f_int = f_int + fv[state] * dur

        closing = nxt == anchor
        if closing.any():
            done = lanes[closing]
            out_log_l[done] = log_l[closing]
            out_q_sign[done] = q_sign[closing]
            out_log_abs_q[done] = log_abs_q[closing]
            out_length[done] = length[closing]
            out_steps[done] = steps[closing]
            if want_f:
                out_f[done] = f_int[closing]

        live = ~closing
        lanes = lanes[live]
        state = nxt[live]
        log_l = log_l[live]
        q_sign = q_sign[live]
        log_abs_q = log_abs_q[live]
        length = length[live]
        steps = steps[live]
        if want_f:
            f_int = f_int[live]

    return CycleBatch(out_log_l, out_q_sign, out_log_abs_q, out_length, out_steps, out_f)


def cycle_integrals(model: SemiMarkovModel, anchor: int, size: int, rng, f) -> np.ndarray:
    """Plain integrals of f(Y_s) ds over `size` independent anchored cycles."""
    return cycle_stats(model, anchor, size, rng, f=f).f_integral


def pre_hit_batch(
    model: SemiMarkovModel,
    targets: np.ndarray,
    rng: np.random.Generator,
    a_const: float,
    b,
) -> tuple[np.ndarray, np.ndarray]:
    """First-hit times and exponentially weighted integrals before the hit.

    For lane with target j, simulates the environment from its own initial
    distribution until it first enters j, returning tau0 and
    int_0^tau0 b(Y_s) exp(a_const * s) ds (zero when the start is already j).
    Requires a_const <= 0 so the weight stays bounded.
    """
    if a_const > 0:
        raise ValueError("pre-hit integral needs a_const <= 0")
    targets = np.asarray(targets, dtype=np.int64)
    size = targets.size
    b = np.asarray(b, dtype=float)

    out_tau = np.zeros(size)
    out_int = np.zeros(size)

    state = np.asarray(model.draw_initial(rng, size))
    at_target = state == targets
    lanes = np.nonzero(~at_target)[0]
    state = state[lanes]
    tgt = targets[lanes]
    clock = np.zeros(lanes.size)
    acc = np.zeros(lanes.size)

    while lanes.size:
        nxt = model.draw_next(state, rng)
        dur = model.draw_durations(state, nxt, rng)
        gs, gl = log_g_fun(-a_const, b[state], dur)
        with np.errstate(over="ignore"):
            acc = acc + gs * np.exp(gl + a_const * clock)
        clock = clock + dur

        hit = nxt == tgt
        if hit.any():
            done = lanes[hit]
            out_tau[done] = clock[hit]
            out_int[done] = acc[hit]
        live = ~hit
        lanes = lanes[live]
        state = nxt[live]
        tgt = tgt[live]
        clock = clock[live]
        acc = acc[live]

    return out_tau, out_int


def sre_backward(
    draw_log,
    size: int,
    rng: np.random.Generator,
    tol: float = 1e-12,
    cap: int = 10_000_000,
) -> np.ndarray:
    """Backward-series draws of the affine fixed point, one per lane.

    Sums (prod_{i<k} A_i) B_k until the running product drops below tol;
    `draw_log(rng, m)` must yield m fresh iid pairs (log A, B).  Raises
    NonConvergent when any lane is still above tol after `cap` terms.
    """
    out = np.zeros(size)
    lanes = np.arange(size)
    cum_log = np.zeros(size)
    log_tol = np.log(tol)
    terms = 0
    while lanes.size:
        terms += 1
        if terms > cap:
            raise NonConvergent(f"running product above tol after {cap} terms for {lanes.size} lanes")
        log_a, bval = draw_log(rng, lanes.size)
        with np.errstate(over="ignore"):
            out[lanes] += np.exp(cum_log) * bval
        cum_log = cum_log + log_a
        done = cum_log < log_tol
        if done.any():
            live = ~done
            lanes = lanes[live]
            cum_log = cum_log[live]
    return out
