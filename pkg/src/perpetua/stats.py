"""Verification statistics: two-sample KS, Hill tail index, standardisation.

All functions take array-likes, sort defensively, and return plain floats
or small result records.  Acceptance thresholds elsewhere are phrased on
the KS statistic D directly at fixed sample sizes; the asymptotic p-value
is reported for context only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, NonPositive, TooSmall


def as_sample(x) -> np.ndarray:
    """Sorted 1-d float view of the data; the Sample invariant everywhere."""
    arr = np.sort(np.asarray(x, dtype=float).ravel())
    if arr.size < 1:
        raise TooSmall("empty sample")
    return arr


@dataclass(frozen=True)
class KsReport:
    statistic: float
    pvalue: float
    n: int
    m: int
    significance: float

    @property
    def passed(self) -> bool:
        return self.pvalue >= self.significance


def kolmogorov_sf(z: float) -> float:
    """Asymptotic Kolmogorov survival function Q(z) = 2 sum (-1)^{k-1} e^{-2k^2z^2}."""
    if z <= 0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * z * z)
        total += (-1.0) ** (k - 1) * term
        if term < 1e-18:
            break
    return float(min(max(2.0 * total, 0.0), 1.0))


def ks_statistic(x, y) -> float:
    """Exact sup-norm distance between the two empirical CDFs."""
    xs = as_sample(x)
    ys = as_sample(y)
    grid = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, grid, side="right") / xs.size
    cdf_y = np.searchsorted(ys, grid, side="right") / ys.size
    return float(np.abs(cdf_x - cdf_y).max())


def ks_two_sample(x, y, significance: float = 0.01) -> KsReport:
    """Two-sample KS test with asymptotic p-value at effective size nm/(n+m)."""
    xs = as_sample(x)
    ys = as_sample(y)
    if xs.size < 50 or ys.size < 50:
        raise TooSmall("two-sample KS needs at least 50 points per sample")
    d = ks_statistic(xs, ys)
    en = xs.size * ys.size / (xs.size + ys.size)
    p = kolmogorov_sf(math.sqrt(en) * d)
    return KsReport(statistic=d, pvalue=p, n=xs.size, m=ys.size, significance=significance)


@dataclass(frozen=True)
class HillEstimate:
    alpha: float
    stderr: float
    k: int


def hill_index(x, k: int) -> HillEstimate:
    """Hill tail-index estimator on the k largest order statistics."""
    xs = as_sample(x)
    n = xs.size
    if k < 50:
        raise TooSmall("hill estimator needs k >= 50")
    if k > n // 10:
        raise TooSmall(f"k = {k} exceeds n/10 = {n // 10}")
    if xs[0] <= 0:
        raise NonPositive("hill estimator needs strictly positive values")
    top = xs[n - k :]
    ref = xs[n - k - 1]
    alpha = k / float(np.sum(np.log(top / ref)))
    return HillEstimate(alpha=alpha, stderr=alpha / math.sqrt(k), k=k)


@dataclass(frozen=True)
class HillVerdict:
    heavy: bool
    estimates: tuple[float, ...]
    fractions: tuple[float, ...]


# the plateau rule: estimates at k = n/200, n/100, n/50 must sit within
# 20% spread of their mean for a "heavy" verdict
_PLATEAU_FRACTIONS = (1 / 200, 1 / 100, 1 / 50)
_PLATEAU_SPREAD = 0.20


def hill_plateau(x) -> HillVerdict:
    """Heavy-tail verdict: does the Hill estimate plateau across k choices?"""
    xs = as_sample(x)
    n = xs.size
    ests = []
    for frac in _PLATEAU_FRACTIONS:
        k = max(int(n * frac), 50)
        ests.append(hill_index(xs, k).alpha)
    spread = max(ests) - min(ests)
    heavy = spread <= _PLATEAU_SPREAD * float(np.mean(ests))
    return HillVerdict(heavy=heavy, estimates=tuple(ests), fractions=_PLATEAU_FRACTIONS)


def standardize(x) -> np.ndarray:
    """(x - median) / IQR on the sorted sample; scale- and location-free."""
    xs = as_sample(x)
    med = float(np.median(xs))
    q75, q25 = np.percentile(xs, [75, 25])
    iqr = float(q75 - q25)
    if iqr <= 0:
        raise DegenerateSample("zero interquartile range")
    return (xs - med) / iqr


def zero_concentration_scale(x) -> float:
    """Smallest eps with P[|X| > eps] <= eps, estimated from the sample.

    The probability-metric distance of the sample law to the point mass at
    zero; used to check that a difference statistic collapses.
    """
    ax = np.sort(np.abs(np.asarray(x, dtype=float).ravel()))
    n = ax.size
    # exceedance fraction just above ax[i] is (n-1-i)/n; the metric is the
    # minimax of (threshold, exceedance) over the sorted thresholds
    frac_above = (n - 1 - np.arange(n)) / n
    return float(np.minimum.reduce(np.maximum(ax, frac_above)))
