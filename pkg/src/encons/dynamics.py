"""Double-integrator consensus dynamics with per-round coupling weights.

Each agent carries a position and a velocity and updates once per round with
unit step: p <- p + v, v <- v + u, where the input u_i sums weighted position
and velocity differences toward each neighbor.  All arithmetic is generic over
the numeric type of the inputs, so trajectories can be run in floats or
exactly in :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .graph import Edge, GainPair, RoundWeights, Topology

Real = Union[int, float, Fraction]
WeightSchedule = Union[None, Sequence[RoundWeights], Callable[[int], RoundWeights]]

__all__ = [
    "AgentState",
    "Trajectory",
    "contribution",
    "step",
    "simulate",
    "aggregated_transition",
    "detect_local_agreement",
    "detect_practical_consensus",
]


@dataclass(frozen=True)
class AgentState:
    position: Real
    velocity: Real


def contribution(gains: GainPair, weight: Real, agent: AgentState, neighbor: AgentState) -> Real:
    """One neighbor's additive term in the agent's input.

    The term is weight * (gamma1 * (p_j - p_i) + gamma2 * (v_j - v_i)) where
    i is the agent receiving the contribution.
    """
    return weight * (
        gains.gamma1 * (neighbor.position - agent.position)
        + gains.gamma2 * (neighbor.velocity - agent.velocity)
    )


def step(
    positions: Sequence[Real],
    velocities: Sequence[Real],
    gains: GainPair,
    weights: RoundWeights,
    edges: Sequence[Edge],
) -> tuple[list[Real], list[Real], list[Real], dict[tuple[int, int], Real]]:
    """Advance every agent one round.

    Returns the new positions and velocities, the applied inputs, and the
    per-directed-pair contributions keyed (receiver, sender).  The reverse
    direction of an edge is the exact negation of the forward one.
    """
    n = len(positions)
    inputs: list[Real] = [0] * n
    contribs: dict[tuple[int, int], Real] = {}
    for i, j in edges:
        w = weights.weight(i, j)
        term = contribution(
            gains,
            w,
            AgentState(positions[i], velocities[i]),
            AgentState(positions[j], velocities[j]),
        )
        contribs[(i, j)] = term
        contribs[(j, i)] = -term
        inputs[i] = inputs[i] + term
        inputs[j] = inputs[j] - term
    new_positions = [positions[i] + velocities[i] for i in range(n)]
    new_velocities = [velocities[i] + inputs[i] for i in range(n)]
    return new_positions, new_velocities, inputs, contribs


@dataclass
class Trajectory:
    """A full closed-loop run: rounds + 1 state rows, rounds input rows."""

    positions: list[list[Real]]
    velocities: list[list[Real]]
    inputs: list[list[Real]]
    contributions: list[dict[tuple[int, int], Real]]

    @property
    def rounds(self) -> int:
        return len(self.inputs)

    @property
    def n_agents(self) -> int:
        return len(self.positions[0])

    def state(self, round_index: int, agent: int) -> AgentState:
        return AgentState(
            self.positions[round_index][agent],
            self.velocities[round_index][agent],
        )

    def pair_gap(self, round_index: int, i: int, j: int) -> Real:
        return abs(self.positions[round_index][i] - self.positions[round_index][j])

    def max_pair_gap(self, round_index: int) -> Real:
        row = self.positions[round_index]
        return max(row) - min(row)

    def as_floats(self) -> "Trajectory":
        return Trajectory(
            positions=[[float(x) for x in row] for row in self.positions],
            velocities=[[float(x) for x in row] for row in self.velocities],
            inputs=[[float(x) for x in row] for row in self.inputs],
            contributions=[
                {pair: float(v) for pair, v in row.items()} for row in self.contributions
            ],
        )


def simulate(
    topology: Topology,
    gains: GainPair,
    initial_positions: Sequence[Real],
    initial_velocities: Sequence[Real],
    rounds: int,
    weight_schedule: WeightSchedule = None,
) -> Trajectory:
    """Run the closed loop for ``rounds`` rounds.

    ``weight_schedule`` may be None (base weights every round), a sequence of
    per-round :class:`RoundWeights`, or a callable round -> RoundWeights.
    """
    if len(initial_positions) != topology.n_agents or len(initial_velocities) != topology.n_agents:
        raise ValueError("initial state length does not match the agent count")
    if weight_schedule is None:
        base = RoundWeights(products=dict(topology.weights))
        schedule: Callable[[int], RoundWeights] = lambda k: base
    elif callable(weight_schedule):
        schedule = weight_schedule
    else:
        if len(weight_schedule) < rounds:
            raise ValueError(f"weight schedule has {len(weight_schedule)} rounds, need {rounds}")
        schedule = weight_schedule.__getitem__

    positions = [list(initial_positions)]
    velocities = [list(initial_velocities)]
    inputs: list[list[Real]] = []
    contributions: list[dict[tuple[int, int], Real]] = []
    p, v = positions[0], velocities[0]
    for k in range(rounds):
        p, v, u, c = step(p, v, gains, schedule(k), topology.edges)
        positions.append(p)
        velocities.append(v)
        inputs.append(u)
        contributions.append(c)
    return Trajectory(
        positions=positions,
        velocities=velocities,
        inputs=inputs,
        contributions=contributions,
    )


def aggregated_transition(topology: Topology, gains: GainPair) -> list[list[float]]:
    """The 2N x 2N one-round map on stacked (positions, velocities)."""
    n = topology.n_agents
    lap = np.array([[float(x) for x in row] for row in topology.laplacian()])
    g1, g2 = gains.as_floats()
    eye = np.eye(n)
    top = np.hstack([eye, eye])
    bottom = np.hstack([-g1 * lap, eye - g2 * lap])
    return np.vstack([top, bottom]).tolist()


def detect_local_agreement(trajectory: Trajectory, i: int, j: int, delta: Real) -> int | None:
    """First round where |p_i - p_j| <= delta, or None if never."""
    for k in range(trajectory.rounds + 1):
        if trajectory.pair_gap(k, i, j) <= delta:
            return k
    return None


def detect_practical_consensus(trajectory: Trajectory, delta: Real) -> int | None:
    """First round from which every pairwise position gap stays within delta.

    Walks backward from the final round; returns None when even the final
    round is outside delta, so the answer is never vacuous.
    """
    last = trajectory.rounds
    if trajectory.max_pair_gap(last) > delta:
        return None
    onset = last
    for k in range(last - 1, -1, -1):
        if trajectory.max_pair_gap(k) > delta:
            break
        onset = k
    return onset
