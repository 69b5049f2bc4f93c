"""Shared fixtures for the GBC mass tests."""

import pytest

from ..gbc_mass.mass_integrals import IdentityConfig
from ..gbc_mass.models import ModelSpec, make_model


@pytest.fixture
def schwarzschild():
    return make_model(ModelSpec("schwarzschild", {"n": 3, "m": 1.0}))


@pytest.fixture
def schwarzschild_graph():
    return make_model(ModelSpec("schwarzschild-graph", {"m": 1.0}))


@pytest.fixture
def flat_inclusion():
    return make_model(ModelSpec("flat-inclusion", {"n": 5, "d": 6}))


@pytest.fixture
def quick_config():
    """A coarse ladder that keeps flux tests fast."""
    return IdentityConfig(
        radii=(25.0, 50.0, 100.0, 200.0),
        nodes_per_angle=4,
        radial_shells=10,
        radial_nodes=8,
        fit_exponent_hint=1.0,
        correction_terms=2,
    )
