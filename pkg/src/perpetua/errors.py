"""Exception types shared across the toolkit."""

from __future__ import annotations


class PerpetuaError(Exception):
    """Base class for all toolkit errors."""


class InfiniteMean(PerpetuaError):
    """A sojourn law whose analytic mean diverges."""


class UnsupportedAlpha(PerpetuaError):
    """Stable index outside the supported range (1, 2]."""


class RowSumError(PerpetuaError):
    """A transition-matrix row does not sum to one."""


class SelfLoopError(PerpetuaError):
    """Nonzero diagonal entry in the embedded transition matrix."""


class NotIrreducible(PerpetuaError):
    """The embedded chain's support graph is not strongly connected."""


class MissingSojournLaw(PerpetuaError):
    """A transition with positive probability has no sojourn law."""


class NeverHits(PerpetuaError):
    """The trajectory never reaches the requested anchor state."""


class OutOfRange(PerpetuaError):
    """Query time outside the simulated coverage."""


class NonConvergent(PerpetuaError):
    """The backward series of the affine recursion failed to contract."""


class MomentDiverges(PerpetuaError):
    """A requested moment of the affine fixed point cannot be ruled finite."""


class NoSignChange(PerpetuaError):
    """Root bracket for the tail exponent shows no sign change."""


class EmptyHeavySet(PerpetuaError):
    """No transition carries a regularly varying sojourn law."""


class NotCritical(PerpetuaError):
    """Operation requires the drift to vanish exactly."""


class NotConstantA(PerpetuaError):
    """Operation requires a state-independent decay coefficient."""


class InfiniteVarianceSuspected(PerpetuaError):
    """Running variance estimate of a cycle integral failed to stabilise."""


class NonPositiveB(PerpetuaError):
    """Pitchfork dynamics need a strictly positive cubic coefficient."""


class DomainError(PerpetuaError):
    """A transformed value left the range of the monotone transform."""


class CaseMismatch(PerpetuaError):
    """Requested divergence case is inconsistent with the model's regime."""


class TooSmall(PerpetuaError):
    """Sample too small for the requested statistic."""


class NonPositive(PerpetuaError):
    """Tail-index estimation needs strictly positive observations."""


class DegenerateSample(PerpetuaError):
    """Zero interquartile range; sample cannot be standardised."""


class ParseError(PerpetuaError):
    """Malformed experiment configuration text."""


class ValidationError(PerpetuaError):
    """Config parsed but violates a model or regime precondition."""

    def __init__(self, message: str, cause_code: str | None = None):
        super().__init__(message)
        self.cause_code = cause_code
