"""Parametric sojourn-time families and heavy-tail sampling primitives.

Every supported family is absolutely continuous on (0, inf) with no atom
at zero and a finite analytic mean; laws violating either are rejected at
construction.  The module also hosts the ingredients the limit-law
reference samplers are built from: skewed stable variates, the Brownian
(endpoint, running maximum) pair, and a discretised stable-path supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InfiniteMean, UnsupportedAlpha

_FAMILIES = ("exponential", "pareto", "weibull", "gamma", "lognormal", "uniform")

# probability tolerance of the integrated-tail bisection
_EQ_TOL = 1e-10


@dataclass(frozen=True)
class TailSpec:
    """Regular-variation descriptor: survival(x) ~ constant * x**(-index)."""

    index: float
    constant: float


@dataclass(frozen=True)
class SojournLaw:
    """A validated sojourn-time distribution from one of the supported families."""

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown sojourn family {self.family!r}")
        p = self.params
        if self.family == "exponential":
            (rate,) = p
            if rate <= 0:
                raise ValueError("exponential rate must be > 0")
        elif self.family == "pareto":
            shape, scale = p
            if scale <= 0:
                raise ValueError("pareto scale must be > 0")
            if shape <= 1:
                raise InfiniteMean(f"pareto shape {shape} <= 1 has no finite mean")
        elif self.family == "weibull":
            shape, scale = p
            if shape <= 0 or scale <= 0:
                raise ValueError("weibull shape and scale must be > 0")
        elif self.family == "gamma":
            shape, scale = p
            if shape <= 0 or scale <= 0:
                raise ValueError("gamma shape and scale must be > 0")
        elif self.family == "lognormal":
            _, sigma = p
            if sigma <= 0:
                raise ValueError("lognormal sigma must be > 0")
        elif self.family == "uniform":
            lo, hi = p
            if lo < 0 or hi <= lo:
                raise ValueError("uniform support needs 0 <= lo < hi")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def exponential(rate: float) -> "SojournLaw":
        return SojournLaw("exponential", (float(rate),))

    @staticmethod
    def pareto(shape: float, scale: float = 1.0) -> "SojournLaw":
        return SojournLaw("pareto", (float(shape), float(scale)))

    @staticmethod
    def weibull(shape: float, scale: float = 1.0) -> "SojournLaw":
        return SojournLaw("weibull", (float(shape), float(scale)))

    @staticmethod
    def gamma(shape: float, scale: float = 1.0) -> "SojournLaw":
        return SojournLaw("gamma", (float(shape), float(scale)))

    @staticmethod
    def lognormal(mu: float, sigma: float) -> "SojournLaw":
        return SojournLaw("lognormal", (float(mu), float(sigma)))

    @staticmethod
    def uniform(lo: float, hi: float) -> "SojournLaw":
        return SojournLaw("uniform", (float(lo), float(hi)))

    # -- analytics ---------------------------------------------------------

    def mean(self) -> float:
        f, p = self.family, self.params
        if f == "exponential":
            return 1.0 / p[0]
        if f == "pareto":
            shape, scale = p
            return shape * scale / (shape - 1.0)
        if f == "weibull":
            shape, scale = p
            return scale * math.gamma(1.0 + 1.0 / shape)
        if f == "gamma":
            shape, scale = p
            return shape * scale
        if f == "lognormal":
            mu, sigma = p
            return math.exp(mu + 0.5 * sigma * sigma)
        lo, hi = p
        return 0.5 * (lo + hi)

    def survival(self, x):
        """P[W > x]; equals 1 at x = 0 and is nonincreasing."""
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        if f == "exponential":
            out = np.exp(-p[0] * x)
        elif f == "pareto":
            shape, scale = p
            out = np.where(x < scale, 1.0, (scale / np.maximum(x, scale)) ** shape)
        elif f == "weibull":
            shape, scale = p
            out = np.exp(-((x / scale) ** shape))
        elif f == "gamma":
            shape, scale = p
            out = special.gammaincc(shape, x / scale)
        elif f == "lognormal":
            mu, sigma = p
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(x, 1e-320)) - mu) / sigma
            out = np.where(x <= 0, 1.0, special.ndtr(-z))
        else:
            lo, hi = p
            out = np.clip((hi - x) / (hi - lo), 0.0, 1.0)
            out = np.where(x < lo, 1.0, out)
        return out if out.ndim else float(out)

    def tail(self) -> TailSpec | None:
        """Regular-variation data; only the Pareto family is heavy-tailed."""
        if self.family != "pareto":
            return None
        shape, scale = self.params
        return TailSpec(index=shape, constant=scale**shape)

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        f, p = self.family, self.params
        if f == "exponential":
            return rng.exponential(1.0 / p[0], size)
        if f == "pareto":
            shape, scale = p
            u = rng.random(size)
            return scale * (1.0 - u) ** (-1.0 / shape)
        if f == "weibull":
            shape, scale = p
            return scale * rng.weibull(shape, size)
        if f == "gamma":
            shape, scale = p
            return rng.gamma(shape, scale, size)
        if f == "lognormal":
            mu, sigma = p
            return rng.lognormal(mu, sigma, size)
        lo, hi = p
        return rng.uniform(lo, hi, size)

    def equilibrium_sample(self, rng: np.random.Generator, size=None):
        """Draw from the integrated-tail transform with density survival(x)/mean.

        Exponential and Pareto use analytic inverses; the remaining families
        bisect the closed-form integrated-tail CDF to 1e-10 in probability.
        """
        u = rng.random(size)
        f, p = self.family, self.params
        if f == "exponential":
            return -np.log1p(-u) / p[0]
        if f == "pareto":
            shape, scale = p
            m = self.mean()
            split = (shape - 1.0) / shape  # integrated-tail mass below the scale point
            body = u * m
            tail = scale * (shape * (1.0 - u)) ** (-1.0 / (shape - 1.0))
            return np.where(u < split, body, tail)
        out = self._equilibrium_bisect(np.atleast_1d(np.asarray(u, dtype=float)))
        if size is None:
            return float(out[0])
        return out

    def integrated_tail_cdf(self, x):
        """CDF of the equilibrium law: (int_0^x survival) / mean."""
        x = np.asarray(x, dtype=float)
        m = self.mean()
        f, p = self.family, self.params
        if f == "exponential":
            out = 1.0 - np.exp(-p[0] * x)
        elif f == "pareto":
            shape, scale = p
            below = np.minimum(x, scale)
            above = np.maximum(x, scale)
            tail_part = scale**shape * (scale ** (1.0 - shape) - above ** (1.0 - shape)) / (shape - 1.0)
            out = (below + np.where(x > scale, tail_part, 0.0)) / m
        elif f == "weibull":
            shape, scale = p
            z = (x / scale) ** shape
            out = (x * np.exp(-z) + m * special.gammainc(1.0 + 1.0 / shape, z)) / m
        elif f == "gamma":
            shape, scale = p
            z = x / scale
            out = (x * special.gammaincc(shape, z) + m * special.gammainc(shape + 1.0, z)) / m
        elif f == "lognormal":
            mu, sigma = p
            with np.errstate(divide="ignore"):
                lx = np.log(np.maximum(x, 1e-320))
            part = x * special.ndtr(-(lx - mu) / sigma) + m * special.ndtr((lx - mu - sigma * sigma) / sigma)
            out = np.where(x <= 0, 0.0, part / m)
        else:
            lo, hi = p
            width = hi - lo
            mid = lo + (width**2 - np.clip(hi - x, 0.0, width) ** 2) / (2.0 * width)
            out = np.where(x < lo, np.maximum(x, 0.0), mid) / m
        return np.clip(out, 0.0, 1.0)

    def _equilibrium_bisect(self, u: np.ndarray) -> np.ndarray:
        lo = np.zeros_like(u)
        hi = np.full_like(u, max(self.mean(), 1.0))
        for _ in range(200):
            need = self.integrated_tail_cdf(hi) < u
            if not need.any():
                break
            hi[need] *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            g = self.integrated_tail_cdf(mid)
            high = g >= u
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
            if np.max(np.abs(g - u)) <= _EQ_TOL and np.max(hi - lo) <= _EQ_TOL * max(self.mean(), 1.0):
                break
        return 0.5 * (lo + hi)


# module-level operation surface -------------------------------------------


def sojourn_sample(law: SojournLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


def mean(law: SojournLaw) -> float:
    return law.mean()


def survival(law: SojournLaw, x):
    return law.survival(x)


def equilibrium_sample(law: SojournLaw, rng: np.random.Generator, size=None):
    return law.equilibrium_sample(rng, size)


# -- stable laws -------------------------------------------------------------


@dataclass(frozen=True)
class StableParams:
    """Index/scale/skew/shift of a stable law, restricted to index in (1, 2].

    The characteristic function convention is
    log E exp(i t X) = -(scale**alpha) |t|**alpha (1 - i*skew*sign(t)*tan(pi*alpha/2))
                       + i*shift*t,
    so alpha = 2 is Normal(shift, 2*scale**2).  The index-1 branch, which
    needs a logarithmic correction, is rejected as out of range.
    """

    alpha: float
    scale: float = 1.0
    skew: float = 0.0
    shift: float = 0.0

    def __post_init__(self):
        if not (1.0 < self.alpha <= 2.0):
            raise UnsupportedAlpha(f"stable index must lie in (1, 2], got {self.alpha}")
        if self.scale <= 0:
            raise ValueError("stable scale must be > 0")
        if not (-1.0 <= self.skew <= 1.0):
            raise ValueError("stable skewness must lie in [-1, 1]")

    def char_function(self, theta):
        """Analytic characteristic function at the given real frequencies."""
        theta = np.asarray(theta, dtype=float)
        a, s, b, mu = self.alpha, self.scale, self.skew, self.shift
        core = -(s**a) * np.abs(theta) ** a * (1.0 - 1j * b * np.sign(theta) * math.tan(math.pi * a / 2.0))
        return np.exp(core + 1j * mu * theta)


def stable_tail_constant(alpha: float) -> float:
    """Reciprocal of int_0^inf x**(-alpha) sin(x) dx, for alpha in (1, 2).

    x**alpha * P[S > x] tends to this constant times (1+skew)/2 * scale**alpha.
    """
    if not (1.0 < alpha < 2.0):
        raise UnsupportedAlpha("tail constant defined for index in (1, 2)")
    return (1.0 - alpha) / (math.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0))


def stable_sample(p: StableParams, rng: np.random.Generator, size=None):
    """Draw stable variates by the polar (uniform angle, exponential) transform."""
    a, b = p.alpha, p.skew
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = np.maximum(rng.exponential(1.0, size), 1e-300)
    tan_half = math.tan(math.pi * a / 2.0) if a < 2.0 else 0.0
    theta0 = math.atan(b * tan_half) / a
    prefac = (1.0 + (b * tan_half) ** 2) ** (1.0 / (2.0 * a))
    core = (
        prefac
        * np.sin(a * (u + theta0))
        / np.cos(u) ** (1.0 / a)
        * (np.cos(u - a * (u + theta0)) / w) ** ((1.0 - a) / a)
    )
    return p.shift + p.scale * core


def brownian_max_pair_sample(rng: np.random.Generator, size=None):
    """Joint draw of (endpoint, running maximum) of a standard Brownian path on [0, 1].

    Uses the change of variables U = 2*max - endpoint, which is chi(3df)
    distributed, with the endpoint conditionally Uniform(-U, U).  The scheme
    is held to a fine-random-walk oracle in the test suite before trust.
    """
    scalar = size is None
    n = 1 if scalar else int(size)
    g = rng.standard_normal((n, 3))
    u = np.sqrt(np.sum(g * g, axis=1))
    x = rng.uniform(-u, u)
    endpoint = x
    running_max = 0.5 * (u + x)
    if scalar:
        return float(endpoint[0]), float(running_max[0])
    return endpoint, running_max


def sup_stable_path_sample(
    alpha: float,
    beta: float,
    steps: int,
    rng: np.random.Generator,
    size=None,
    chunk: int = 2048,
):
    """(endpoint, running max) of a unit-time stable path on an Euler grid.

    The endpoint is exact in law; the supremum is the partial-sum maximum,
    floored at 0 since the path starts there, and is a biased (low)
    approximation that improves as the grid refines.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    params = StableParams(alpha=alpha, skew=beta)
    scalar = size is None
    n = 1 if scalar else int(size)
    scale = float(steps) ** (-1.0 / alpha)
    carry = np.zeros(n)
    best = np.zeros(n)  # sup over [0,1] includes u = 0 where the path is 0
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        inc = scale * stable_sample(params, rng, (n, m))
        np.cumsum(inc, axis=1, out=inc)
        inc += carry[:, None]
        np.maximum(best, inc.max(axis=1), out=best)
        carry = inc[:, -1].copy()
        done += m
    if scalar:
        return float(carry[0]), float(best[0])
    return carry, best
