"""Shared helpers: hypothesis profile and seeded state factories."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncqm import ModelParams, QuantumState, build_fock

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def interior_state(rng: np.random.Generator, cutoff: int, margin: int) -> QuantumState:
    """Dense normalized random state supported strictly below level cutoff - margin."""
    top = cutoff - margin
    block = rng.standard_normal((top, top)) + 1j * rng.standard_normal((top, top))
    op = np.zeros((cutoff, cutoff), dtype=complex)
    op[:top, :top] = block
    return QuantumState(op).normalized()


def full_state(rng: np.random.Generator, cutoff: int) -> QuantumState:
    """Normalized random state with support on every level, boundary included."""
    op = rng.standard_normal((cutoff, cutoff)) + 1j * rng.standard_normal((cutoff, cutoff))
    return QuantumState(op).normalized()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def ctx01():
    """The workhorse context: theta = 0.1, unit constants, 30 retained levels."""
    return build_fock(ModelParams(theta=0.1, cutoff=30))
