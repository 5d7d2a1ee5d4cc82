"""Shared fixtures: the four-agent demo network used across the suite."""

from fractions import Fraction
from random import Random

import pytest

from encons.graph import GainPair, Topology
from encons.paillier import keygen

DEMO_EDGES = ((0, 1), (0, 2), (1, 2), (2, 3))
DEMO_POSITIONS = (Fraction(20), Fraction(30), Fraction(50), Fraction(90))
DEMO_VELOCITIES = (Fraction(30), Fraction(-20), Fraction(10), Fraction(-40))


@pytest.fixture
def demo_topology():
    """Four agents, unit weights, the variation budget of the bundled configs."""
    return Topology.build(4, DEMO_EDGES, Fraction(1), delta_a=Fraction(1, 50))


@pytest.fixture
def tenth_topology():
    """Same shape with 0.1 weights; its Laplacian spectrum is known in closed form."""
    return Topology.build(4, DEMO_EDGES, Fraction(1, 10), delta_a=Fraction(1, 50))


@pytest.fixture
def demo_gains():
    return GainPair(Fraction(3, 10), Fraction(6, 10))


@pytest.fixture(scope="session")
def fast_keypair():
    # 64 bits keeps property runs quick while leaving plenty of headroom for
    # every encoding exercised below
    return keygen(64, Random("encons-test-key"))
