"""Finite-state semi-Markov environment: validation, simulation, long-run laws.

The environment is an embedded jump chain with zero diagonal plus one
sojourn law per admissible transition; the sojourn drawn in state i is
conditioned on the next state j.  Validation enforces irreducibility and
finite mean sojourns, which together guarantee non-explosion and a
limiting occupation law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import SojournLaw
from .errors import (
    MissingSojournLaw,
    NeverHits,
    NotIrreducible,
    OutOfRange,
    RowSumError,
    SelfLoopError,
)

_ROW_TOL = 1e-12
_DENSE_SOLVE_LIMIT = 200


class SemiMarkovModel:
    """Validated environment: transition matrix, sojourn table, initial law.

    Instances are immutable after construction and safe to share across
    workers; every sampling method takes an explicit generator.
    """

    def __init__(self, transition, sojourn, initial=None, states=None):
        p = np.array(transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 2:
            raise ValueError("transition matrix must be square with at least 2 states")
        n = p.shape[0]
        if np.any(p < 0):
            raise RowSumError("transition probabilities must be nonnegative")
        diag = np.diagonal(p)
        if np.any(diag != 0):
            bad = int(np.nonzero(diag)[0][0])
            raise SelfLoopError(f"state {bad} has a self-loop probability {diag[bad]}")
        sums = p.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > _ROW_TOL):
            bad = int(np.argmax(off))
            raise RowSumError(f"row {bad} sums to {sums[bad]!r}, not 1")
        p = p / sums[:, None]

        table: dict[tuple[int, int], SojournLaw] = {}
        for (i, j), law in dict(sojourn).items():
            if not isinstance(law, SojournLaw):
                raise MissingSojournLaw(f"entry for transition ({i}, {j}) is not a SojournLaw")
            table[(int(i), int(j))] = law
        for i in range(n):
            for j in range(n):
                if p[i, j] > 0 and (i, j) not in table:
                    raise MissingSojournLaw(f"transition ({i}, {j}) has positive probability but no sojourn law")

        if not _strongly_connected(p > 0):
            raise NotIrreducible("support graph of the embedded chain is not strongly connected")

        if initial is None:
            q = np.full(n, 1.0 / n)
        else:
            q = np.array(initial, dtype=float)
            if q.shape != (n,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
                raise ValueError("initial distribution must be a probability vector over the states")
            q = q / q.sum()

        self.transition = p
        self.transition.setflags(write=False)
        self.sojourn = table
        self.initial = q
        self.initial.setflags(write=False)
        self.states = tuple(states) if states is not None else tuple(str(i) for i in range(n))
        self.n_states = n

        # derived quantities used throughout
        m = np.zeros((n, n))
        for (i, j), law in table.items():
            m[i, j] = law.mean()
        self.sojourn_mean = m
        self.state_mean = (p * m).sum(axis=1)  # mean unconditional sojourn per state
        self.mu = _stationary_embedded(p)
        w = self.mu * self.state_mean
        self.pi = w / w.sum()
        self._cum_rows = np.cumsum(p, axis=1)
        self._pairs = sorted(table)

    # -- long-run laws -------------------------------------------------------

    def mean_cycle_length(self, j: int) -> float:
        """Expected duration between successive visits to the anchor state."""
        return float(np.dot(self.mu, self.state_mean) / self.mu[j])

    def expected_pi_a(self, values) -> float:
        """Occupation-weighted average of a per-state vector."""
        return float(np.dot(self.pi, np.asarray(values, dtype=float)))

    # -- sampling -------------------------------------------------------------

    def draw_next(self, state, rng: np.random.Generator):
        """Vectorised next-state draw for an int array of current states."""
        state = np.asarray(state)
        u = rng.random(state.shape)
        cum = self._cum_rows[state]
        return (u[..., None] >= cum).sum(axis=-1)

    def draw_durations(self, state, nxt, rng: np.random.Generator):
        """Vectorised sojourn draws grouped by (state, next) transition."""
        state = np.asarray(state)
        nxt = np.asarray(nxt)
        out = np.empty(state.shape, dtype=float)
        for (i, j) in self._pairs:
            mask = (state == i) & (nxt == j)
            cnt = int(mask.sum())
            if cnt:
                out[mask] = self.sojourn[(i, j)].sample(rng, cnt)
        return out

    def draw_initial(self, rng: np.random.Generator, size=None):
        return rng.choice(self.n_states, size=size, p=self.initial)


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]

    def reach(a):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            for w in np.nonzero(a[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return seen

    return bool(reach(adj).all() and reach(adj.T).all())


def _stationary_embedded(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    if n <= _DENSE_SOLVE_LIMIT:
        a = p.T - np.eye(n)
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        mu = np.linalg.solve(a, b)
    else:
        mu = np.full(n, 1.0 / n)
        for _ in range(100_000):
            nxt = mu @ p
            if np.abs(nxt - mu).max() < 1e-15:
                mu = nxt
                break
            mu = nxt
        mu = mu / mu.sum()
    residual = np.abs(mu @ p - mu).max()
    if residual > 1e-10 or np.any(mu <= 0):
        raise NotIrreducible(f"stationary solve failed (residual {residual:.2e})")
    return mu


def validate(transition, sojourn, initial=None, states=None) -> SemiMarkovModel:
    """Check all model invariants on raw inputs and return the normalised model."""
    return SemiMarkovModel(transition, sojourn, initial=initial, states=states)


def stationary_embedded(model: SemiMarkovModel) -> np.ndarray:
    """Stationary law of the embedded jump chain (mu = mu P)."""
    return model.mu


def limiting_pi(model: SemiMarkovModel) -> np.ndarray:
    """Long-run occupation law: pi_j proportional to mu_j times mean sojourn."""
    return model.pi


@dataclass(frozen=True)
class Trajectory:
    """One realisation of the environment as (state, duration) segments.

    Durations are strictly positive and consecutive states differ; the total
    duration is at least the horizon (the final segment may overhang it).
    """

    states: np.ndarray
    durations: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "epochs", np.concatenate(([0.0], np.cumsum(self.durations))))

    @property
    def n_segments(self) -> int:
        return len(self.states)

    @property
    def coverage(self) -> float:
        return float(self.epochs[-1])

    def state_at(self, t: float) -> int:
        if t < 0 or t > self.coverage:
            raise OutOfRange(f"time {t} outside [0, {self.coverage}]")
        k = int(np.searchsorted(self.epochs, t, side="right") - 1)
        return int(self.states[min(k, self.n_segments - 1)])

    def occupation_fractions(self, upto: float | None = None) -> np.ndarray:
        """Fraction of [0, upto] spent in each state (defaults to the horizon)."""
        t = self.horizon if upto is None else float(upto)
        if t <= 0 or t > self.coverage:
            raise OutOfRange(f"time {t} outside (0, {self.coverage}]")
        clipped = np.minimum(self.epochs[1:], t) - np.minimum(self.epochs[:-1], t)
        n = int(self.states.max()) + 1
        out = np.zeros(max(n, 2))
        np.add.at(out, self.states, np.maximum(clipped, 0.0))
        return out / t


def simulate(model: SemiMarkovModel, horizon: float, rng: np.random.Generator) -> Trajectory:
    """Sample the environment until the first jump epoch at or past the horizon."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    states: list[int] = []
    durations: list[float] = []
    state = int(model.draw_initial(rng))
    clock = 0.0
    cum = model._cum_rows
    table = model.sojourn
    while clock < horizon:
        nxt = int((rng.random() >= cum[state]).sum())
        dur = float(table[(state, nxt)].sample(rng))
        states.append(state)
        durations.append(dur)
        clock += dur
        state = nxt
    return Trajectory(np.array(states, dtype=np.int64), np.array(durations), float(horizon))


@dataclass(frozen=True)
class CycleIndex:
    """Hitting epochs of one anchor state along a trajectory.

    hits[k] is the k-th entry epoch into the anchor (hits[0] = 0 when the
    trajectory starts there); segment_hits holds the corresponding segment
    indices, so cycle k spans segments segment_hits[k] .. segment_hits[k+1)-1.
    """

    target: int
    hits: np.ndarray
    segment_hits: np.ndarray

    @property
    def n_cycles(self) -> int:
        return max(len(self.hits) - 1, 0)

    def g(self, t: float) -> int | None:
        """Index of the last hit at or before t; None before the first hit."""
        k = int(np.searchsorted(self.hits, t, side="right") - 1)
        return None if k < 0 else k


def cycle_index(traj: Trajectory, j: int) -> CycleIndex:
    """Locate every entry into state j (an entry opens each matching segment)."""
    mask = traj.states == j
    if not mask.any():
        raise NeverHits(f"state {j} is never visited before the horizon")
    seg = np.nonzero(mask)[0]
    return CycleIndex(target=int(j), hits=traj.epochs[seg], segment_hits=seg)


def residual_times(ci: CycleIndex, t: float) -> tuple[float, float]:
    """Backward and forward residual times at t within a covered cycle."""
    g = ci.g(t)
    if g is None:
        raise OutOfRange(f"time {t} precedes the first hit of state {ci.target}")
    if g + 1 >= len(ci.hits):
        raise OutOfRange(f"cycle containing {t} extends past the simulated trajectory")
    return float(t - ci.hits[g]), float(ci.hits[g + 1] - t)


def mean_cycle_length(model: SemiMarkovModel, j: int) -> float:
    return model.mean_cycle_length(j)


def pi_star_sample(model: SemiMarkovModel, j: int, rng: np.random.Generator, size=None):
    """Draw a size-biased averaged sojourn at state j.

    Picks the successor k with probability P_jk * m_jk / m_j, then draws the
    equilibrium transform of that transition's law; the resulting survival is
    the normalised integrated tail of the averaged sojourn at j.
    """
    row = model.transition[j]
    weights = row * model.sojourn_mean[j] / model.state_mean[j]
    succ = np.nonzero(weights > 0)[0]
    w = weights[succ]
    w = w / w.sum()
    scalar = size is None
    n = 1 if scalar else int(size)
    picks = rng.choice(len(succ), size=n, p=w)
    out = np.empty(n)
    for idx, k in enumerate(succ):
        mask = picks == idx
        cnt = int(mask.sum())
        if cnt:
            out[mask] = model.sojourn[(j, int(k))].equilibrium_sample(rng, cnt)
    return float(out[0]) if scalar else out
