"""Initial-state reconstruction from one agent's local view of a run.

An honest-but-curious agent records what it legitimately sees: its own
trajectory and the coupling terms a neighbor sends it each round.  From the
coupling term it can isolate gamma1 * p_B + gamma2 * v_B for the neighbor B
whenever it knows the effective weight, and the one-step position update then
yields a backward recursion

    p_B^k = rho * p_B^(k+1) + phi_k,      rho = gamma2 / (gamma2 - gamma1),

driven entirely by observed quantities.  Anchoring the recursion at a round
k_a where the attacker believes p_B is within delta of a known value (its own
position, once the pair has nearly agreed) recovers the initial state with
error exactly rho**k_a times the anchor error.  The attack therefore succeeds
precisely when the pair agrees faster than rho**(-k) shrinks, which is what
ties privacy to the consensus convergence rate.

Special cases: when the attacker is the target's sole neighbor, the target's
entire input is the negation of what the attacker receives, so two rounds of
messages determine the initial state exactly (:func:`attack_sole_neighbor_two_step`)
and the velocity trajectory telescopes out of the raw messages even with
unknown weights (:func:`reconstruct_velocity_sole_neighbor`).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .dynamics import Trajectory
from .graph import GainPair

Real = Union[int, float, Fraction]

__all__ = [
    "AdversaryError",
    "InsufficientTranscriptError",
    "UnknownWeightsError",
    "Transcript",
    "Estimate",
    "assume_constant_weight",
    "error_bounds",
    "attack_sole_neighbor_two_step",
    "estimate_initial_known_weights",
    "estimate_initial_sweep",
    "estimate_trajectory",
    "reconstruct_velocity_sole_neighbor",
    "attempt_estimate_unknown_weights",
]


class AdversaryError(Exception):
    """Base class for estimator failures."""


class InsufficientTranscriptError(AdversaryError):
    """The recorded horizon is too short for the requested reconstruction."""


class UnknownWeightsError(AdversaryError):
    """The reconstruction needs per-round weights the attacker does not have."""


@dataclass(frozen=True)
class Transcript:
    """Everything one attacker legitimately observes about one neighbor.

    ``contributions[k]`` is the coupling term received from the target in
    round k; ``positions`` and ``velocities`` are the attacker's own states
    (one entry more than the contributions).  ``weights`` holds the effective
    per-round edge weights when the attacker knows them, else None.
    """

    gains: GainPair
    contributions: tuple[Real, ...]
    positions: tuple[Real, ...]
    velocities: tuple[Real, ...]
    weights: tuple[Real, ...] | None = None
    attacker: int = 0
    target: int = 1

    @classmethod
    def from_trajectory(
        cls,
        trajectory: Trajectory,
        gains: GainPair,
        attacker: int,
        target: int,
        weights: Sequence[Real] | Real | None = None,
    ) -> "Transcript":
        rounds = trajectory.rounds
        contributions = tuple(
            trajectory.contributions[k][(attacker, target)] for k in range(rounds)
        )
        if weights is None:
            weight_row = None
        elif isinstance(weights, (int, float, Fraction)):
            weight_row = (weights,) * rounds
        else:
            if len(weights) < rounds:
                raise InsufficientTranscriptError(
                    f"{len(weights)} weights for {rounds} recorded rounds"
                )
            weight_row = tuple(weights[:rounds])
        return cls(
            gains=gains,
            contributions=contributions,
            positions=tuple(row[attacker] for row in trajectory.positions),
            velocities=tuple(row[attacker] for row in trajectory.velocities),
            weights=weight_row,
            attacker=attacker,
            target=target,
        )

    @property
    def rounds(self) -> int:
        return len(self.contributions)


def assume_constant_weight(transcript: Transcript, weight: Real) -> Transcript:
    """The same observations reinterpreted under a guessed constant weight."""
    if weight <= 0:
        raise ValueError("weight guess must be positive")
    return Transcript(
        gains=transcript.gains,
        contributions=transcript.contributions,
        positions=transcript.positions,
        velocities=transcript.velocities,
        weights=(weight,) * transcript.rounds,
        attacker=transcript.attacker,
        target=transcript.target,
    )


@dataclass(frozen=True)
class Estimate:
    k_a: int
    p0_hat: Real
    v0_hat: Real
    bound_p: Real | None = None
    bound_v: Real | None = None


def error_bounds(gains: GainPair, k_a: int, delta: Real) -> tuple[Real, Real]:
    """Worst-case estimate errors for an anchor off by at most ``delta``.

    The anchor error is amplified by exactly rho**k_a in position and by
    (gamma1 / gamma2) * rho**k_a in velocity; nothing else enters.
    """
    _require_estimator_gains(gains)
    rho = gains.gamma2 / (gains.gamma2 - gains.gamma1)
    bound_p = rho**k_a * delta
    return bound_p, bound_p * gains.gamma1 / gains.gamma2


def _require_estimator_gains(gains: GainPair) -> None:
    if not gains.gamma1 < gains.gamma2:
        raise AdversaryError(
            f"the backward recursion needs gamma2 > gamma1, "
            f"got ({gains.gamma1}, {gains.gamma2})"
        )


def _drive(transcript: Transcript, k: int) -> Real:
    """phi_k, the observed forcing term of the backward position recursion."""
    if transcript.weights is None:
        raise UnknownWeightsError("phi_k needs the effective weight of round k")
    if transcript.weights[k] == 0:
        raise AdversaryError(f"zero effective weight at round {k}")
    g1, g2 = transcript.gains.gamma1, transcript.gains.gamma2
    normalized = transcript.contributions[k] / transcript.weights[k]
    return (g1 * transcript.positions[k] + g2 * transcript.velocities[k] + normalized) / (g1 - g2)


def _require_rounds(transcript: Transcript, needed: int, what: str) -> None:
    if transcript.rounds < needed:
        raise InsufficientTranscriptError(
            f"{what} needs {needed} recorded rounds, transcript has {transcript.rounds}"
        )


def attack_sole_neighbor_two_step(transcript: Transcript) -> tuple[Real, Real]:
    """Exact initial state of a target whose only neighbor is the attacker.

    With a sole neighbor, the target's whole input is the negation of the
    received term, so rounds 0 and 1 give two independent linear equations in
    (p_B^0, v_B^0).  Exact for any per-round weights the attacker knows.
    """
    _require_rounds(transcript, 2, "the two-step attack")
    if transcript.weights is None:
        raise UnknownWeightsError("the two-step attack needs the round 0 and 1 weights")
    if transcript.weights[0] == 0 or transcript.weights[1] == 0:
        raise AdversaryError("zero effective weight in the first two rounds")
    g1, g2 = transcript.gains.gamma1, transcript.gains.gamma2
    u0, u1 = transcript.contributions[0], transcript.contributions[1]
    b0 = u0 / transcript.weights[0] + g1 * transcript.positions[0] + g2 * transcript.velocities[0]
    b1 = (
        u1 / transcript.weights[1]
        + g1 * transcript.positions[1]
        + g2 * transcript.velocities[1]
        + g2 * u0
    )
    v0 = (b1 - b0) / g1
    p0 = (b0 - g2 * v0) / g1
    return p0, v0


def estimate_initial_known_weights(
    transcript: Transcript,
    k_a: int,
    anchor: Real,
    delta: Real | None = None,
) -> Estimate:
    """Run the backward recursion from ``anchor`` as the round-k_a position.

    When ``delta`` bounds the anchor error, the returned bounds are the exact
    worst-case estimate errors.
    """
    if k_a < 0:
        raise ValueError("k_a must be non-negative")
    _require_estimator_gains(transcript.gains)
    _require_rounds(transcript, max(k_a, 1), "the backward recursion")
    g1, g2 = transcript.gains.gamma1, transcript.gains.gamma2
    rho = g2 / (g2 - g1)
    p0_hat: Real = anchor
    for k in range(k_a - 1, -1, -1):
        p0_hat = rho * p0_hat + _drive(transcript, k)
    v0_hat = -(g1 / g2) * p0_hat - ((g2 - g1) / g2) * _drive(transcript, 0)
    bound_p = bound_v = None
    if delta is not None:
        bound_p, bound_v = error_bounds(transcript.gains, k_a, delta)
    return Estimate(k_a=k_a, p0_hat=p0_hat, v0_hat=v0_hat, bound_p=bound_p, bound_v=bound_v)


def estimate_initial_sweep(
    transcript: Transcript,
    anchors: Sequence[Real],
    deltas: Sequence[Real] | None = None,
) -> list[Estimate]:
    """Estimates for every anchor round at once; ``anchors[k]`` is used at k_a = k.

    Incremental form of :func:`estimate_initial_known_weights`, one drive term
    per round instead of one per (round, anchor) pair.
    """
    if len(anchors) == 0:
        return []
    _require_estimator_gains(transcript.gains)
    _require_rounds(transcript, max(len(anchors) - 1, 1), "the anchor sweep")
    if deltas is not None and len(deltas) < len(anchors):
        raise ValueError("need one delta per anchor")
    g1, g2 = transcript.gains.gamma1, transcript.gains.gamma2
    rho = g2 / (g2 - g1)
    phi0 = _drive(transcript, 0)
    out: list[Estimate] = []
    rho_pow: Real = 1
    acc: Real = 0
    for k_a, anchor in enumerate(anchors):
        p0_hat = rho_pow * anchor + acc
        v0_hat = -(g1 / g2) * p0_hat - ((g2 - g1) / g2) * phi0
        bound_p = bound_v = None
        if deltas is not None:
            bound_p, bound_v = error_bounds(transcript.gains, k_a, deltas[k_a])
        out.append(Estimate(k_a=k_a, p0_hat=p0_hat, v0_hat=v0_hat, bound_p=bound_p, bound_v=bound_v))
        if k_a < len(anchors) - 1:
            acc = acc + rho_pow * _drive(transcript, k_a)
            rho_pow = rho_pow * rho
    return out


def estimate_trajectory(
    transcript: Transcript,
    k_a: int,
    anchor: Real,
) -> tuple[list[Real], list[Real]]:
    """The target's reconstructed positions 0..k_a and velocities 0..k_a-1."""
    if k_a < 1:
        raise ValueError("trajectory reconstruction needs k_a >= 1")
    _require_estimator_gains(transcript.gains)
    _require_rounds(transcript, k_a, "trajectory reconstruction")
    g1, g2 = transcript.gains.gamma1, transcript.gains.gamma2
    rho = g2 / (g2 - g1)
    positions: list[Real] = [anchor]
    for k in range(k_a - 1, -1, -1):
        positions.append(rho * positions[-1] + _drive(transcript, k))
    positions.reverse()
    velocities = [positions[k + 1] - positions[k] for k in range(k_a)]
    return positions, velocities


def reconstruct_velocity_sole_neighbor(
    transcript: Transcript,
    consensus_round: int,
) -> list[Real]:
    """The target's velocities 0..consensus_round from raw messages alone.

    A sole-neighbor target's velocity update telescopes against the received
    terms, so anchoring at the attacker's own velocity once the pair has
    converged recovers the whole trajectory without any weight knowledge.
    Every entry shares the same error, the residual velocity disagreement at
    the anchor round.
    """
    if consensus_round < 0:
        raise ValueError("consensus_round must be non-negative")
    _require_rounds(transcript, consensus_round, "velocity reconstruction")
    anchor = transcript.velocities[consensus_round]
    out: list[Real] = [anchor]
    for k in range(consensus_round - 1, -1, -1):
        out.append(out[-1] + transcript.contributions[k])
    out.reverse()
    return out


def attempt_estimate_unknown_weights(
    transcript: Transcript,
    k_a: int,
    anchor: Real,
    weight_guess: Real,
    delta: Real | None = None,
) -> Estimate:
    """The backward recursion run with a constant guessed weight.

    This is what an attacker without weight knowledge can try against a
    randomly decoupled exchange; the per-round mismatch enters phi_k directly
    and is then amplified by the recursion, which is why the estimate fails.
    """
    guessed = assume_constant_weight(transcript, weight_guess)
    return estimate_initial_known_weights(guessed, k_a, anchor, delta=delta)
