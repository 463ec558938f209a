"""Shared fixtures: small models exercising each regime."""

from __future__ import annotations

import numpy as np
import pytest

from perpetua.distributions import SojournLaw
from perpetua.perpetuity import StateFns
from perpetua.semimarkov import SemiMarkovModel


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def swap_exp_model():
    """Two-state swap chain with exponential sojourns, started in state 0."""
    return SemiMarkovModel(
        [[0, 1], [1, 0]],
        {(0, 1): SojournLaw.exponential(1.0), (1, 0): SojournLaw.exponential(2.0)},
        initial=[1.0, 0.0],
    )


@pytest.fixture
def swap_unit_model():
    """Symmetric swap chain, Exp(1) both ways: pi = (1/2, 1/2)."""
    return SemiMarkovModel(
        [[0, 1], [1, 0]],
        {(0, 1): SojournLaw.exponential(1.0), (1, 0): SojournLaw.exponential(1.0)},
        initial=[1.0, 0.0],
    )


@pytest.fixture
def cyclic3_model():
    """Deterministic 3-cycle with unit-mean sojourns of mixed families."""
    return SemiMarkovModel(
        [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
        {
            (0, 1): SojournLaw.exponential(1.0),
            (1, 2): SojournLaw.uniform(0.5, 1.5),
            (2, 0): SojournLaw.gamma(2.0, 0.5),
        },
    )


@pytest.fixture
def heavy_model():
    """Swap chain with a heavy Pareto(1.5) sojourn out of state 1."""
    return SemiMarkovModel(
        [[0, 1], [1, 0]],
        {(0, 1): SojournLaw.exponential(1.0), (1, 0): SojournLaw.pareto(1.5, 1.0)},
        initial=[1.0, 0.0],
    )


@pytest.fixture
def stable_fns():
    """Positive-drift coefficients for the convergent regime."""
    return StateFns(np.array([1.0, 0.5]), np.array([1.0, 1.0]))
