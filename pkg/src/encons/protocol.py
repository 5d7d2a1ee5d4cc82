"""Encrypted per-round information exchange between neighboring agents.

Each round, an agent advertises its negated state encrypted under its own
public key.  A neighbor answers without ever seeing that state: it adds its
own encrypted state to form encrypted differences, multiplies them by its
private weight factor folded together with the coupling gains, and returns a
single ciphertext.  The initiator decrypts, applies its own private factor in
the clear, and obtains exactly the weighted coupling term of the plaintext
dynamics, up to fixed-point quantization.  Neither side learns the other's
state or weight factor; the effective coupling weight is the product of the
two private factors.

All randomness is derived from a run seed through named child streams, so a
run is reproducible end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Sequence

from .dynamics import Trajectory
from .graph import Edge, GainPair, RoundWeights, Topology, sample_round_weights
from .paillier import (
    Ciphertext,
    PrivateKey,
    PublicKey,
    add_cipher,
    decode_fixed,
    decrypt,
    encode_fixed,
    encrypt,
    keygen,
    scalar_mul,
)

__all__ = [
    "ExchangeSettings",
    "StateAdvert",
    "ContributionMsg",
    "AgentNode",
    "RoundLog",
    "EncryptedRun",
    "derive_rng",
    "step1_advertise",
    "step2_contribute",
    "step3_finalize",
    "run_encrypted_consensus",
    "contribution_quantization_bound",
]


@dataclass(frozen=True)
class ExchangeSettings:
    key_bits: int = 128
    scale_bits: int = 16
    rekey_per_round: bool = False


@dataclass(frozen=True)
class StateAdvert:
    """Round opener: the initiator's negated state under its own key."""

    sender: int
    round_index: int
    neg_position: Ciphertext
    neg_velocity: Ciphertext

    def payload(self) -> dict:
        return {
            "sender": self.sender,
            "round": self.round_index,
            "neg_position": self.neg_position.value,
            "neg_velocity": self.neg_velocity.value,
            "scale_exp": self.neg_position.scale_exp,
        }


@dataclass(frozen=True)
class ContributionMsg:
    """Round reply: one combined ciphertext holding the weighted coupling term."""

    sender: int
    recipient: int
    round_index: int
    combined: Ciphertext

    def payload(self) -> dict:
        return {
            "sender": self.sender,
            "recipient": self.recipient,
            "round": self.round_index,
            "combined": self.combined.value,
            "scale_exp": self.combined.scale_exp,
        }


class AgentNode:
    """One agent's private view: state, keys it holds, keys it has received."""

    def __init__(self, agent_id: int, position: float, velocity: float, neighbors: Sequence[int]):
        self.agent_id = agent_id
        self.position = float(position)
        self.velocity = float(velocity)
        self.neighbors = tuple(neighbors)
        self.public_key: PublicKey | None = None
        self._private_key: PrivateKey | None = None
        self.neighbor_keys: dict[int, PublicKey] = {}

    def generate_keys(self, key_bits: int, rng: Random) -> PublicKey:
        self.public_key, self._private_key = keygen(key_bits, rng)
        return self.public_key

    def receive_key(self, agent_id: int, key: PublicKey) -> None:
        if agent_id not in self.neighbors:
            raise ValueError(f"agent {self.agent_id} has no neighbor {agent_id}")
        self.neighbor_keys[agent_id] = key


def derive_rng(seed: int | str, *parts: object) -> Random:
    """A child random stream named by its parts, stable across runs."""
    return Random(":".join(str(p) for p in (seed, *parts)))


def step1_advertise(node: AgentNode, round_index: int, rng: Random, scale_bits: int) -> StateAdvert:
    """Encrypt the negated own state under the agent's own public key."""
    pk = node.public_key
    if pk is None:
        raise RuntimeError(f"agent {node.agent_id} has no keypair yet")
    return StateAdvert(
        sender=node.agent_id,
        round_index=round_index,
        neg_position=encrypt(pk, encode_fixed(-node.position, scale_bits, pk), rng),
        neg_velocity=encrypt(pk, encode_fixed(-node.velocity, scale_bits, pk), rng),
    )


def step2_contribute(
    node: AgentNode,
    advert: StateAdvert,
    gains: GainPair,
    factor: float,
    rng: Random,
) -> ContributionMsg:
    """Answer an advert with the encrypted weighted coupling term.

    The responder's weight factor never leaves this function in the clear: it
    is folded into the plaintext multipliers gamma1 * factor and
    gamma2 * factor before the homomorphic scalar multiplication.
    """
    pk = node.neighbor_keys[advert.sender]
    scale = advert.neg_position.scale_exp
    g1, g2 = gains.as_floats()
    diff_p = add_cipher(pk, advert.neg_position, encrypt(pk, encode_fixed(node.position, scale, pk), rng))
    diff_v = add_cipher(pk, advert.neg_velocity, encrypt(pk, encode_fixed(node.velocity, scale, pk), rng))
    mult_p = encode_fixed(g1 * float(factor), scale, pk)
    mult_v = encode_fixed(g2 * float(factor), scale, pk)
    combined = add_cipher(
        pk,
        scalar_mul(pk, diff_p, mult_p.residue, k_scale_exp=scale),
        scalar_mul(pk, diff_v, mult_v.residue, k_scale_exp=scale),
    )
    return ContributionMsg(
        sender=node.agent_id,
        recipient=advert.sender,
        round_index=advert.round_index,
        combined=combined,
    )


def step3_finalize(node: AgentNode, msg: ContributionMsg, factor: float) -> float:
    """Decrypt the reply and apply the initiator's own factor in the clear."""
    if node._private_key is None or node.public_key is None:
        raise RuntimeError(f"agent {node.agent_id} has no keypair yet")
    plain = decrypt(node.public_key, node._private_key, msg.combined)
    return float(factor) * decode_fixed(plain, node.public_key)


@dataclass
class RoundLog:
    round_index: int
    contributions: dict[tuple[int, int], float]
    inputs: list[float]
    cipher_bits: dict[tuple[int, int], int]
    weight_products: dict[Edge, float]


@dataclass
class EncryptedRun:
    trajectory: Trajectory
    round_logs: list[RoundLog]
    weights: list[RoundWeights]
    settings: ExchangeSettings

    def weight_schedule(self) -> list[RoundWeights]:
        return self.weights


def run_encrypted_consensus(
    topology: Topology,
    gains: GainPair,
    initial_positions: Sequence[float],
    initial_velocities: Sequence[float],
    rounds: int,
    seed: int | str,
    settings: ExchangeSettings = ExchangeSettings(),
) -> EncryptedRun:
    """Run the full encrypted closed loop and log every exchanged ciphertext.

    Weight factors are redrawn every round from the topology's variation
    budget.  The returned run carries the realized per-round weights so a
    plaintext reference trajectory can be replayed against the same schedule.
    """
    n = topology.n_agents
    if len(initial_positions) != n or len(initial_velocities) != n:
        raise ValueError("initial state length does not match the agent count")
    nodes = [
        AgentNode(i, initial_positions[i], initial_velocities[i], topology.neighbors(i))
        for i in range(n)
    ]

    def distribute_keys(round_index: int | None) -> None:
        for node in nodes:
            stream = ("key", node.agent_id) if round_index is None else ("key", node.agent_id, round_index)
            node.generate_keys(settings.key_bits, derive_rng(seed, *stream))
        for node in nodes:
            for other in node.neighbors:
                key = nodes[other].public_key
                assert key is not None
                node.receive_key(other, key)

    if not settings.rekey_per_round:
        distribute_keys(None)

    directed = sorted(
        [(i, j) for i, j in topology.edges] + [(j, i) for i, j in topology.edges]
    )
    positions = [list(float(x) for x in initial_positions)]
    velocities = [list(float(x) for x in initial_velocities)]
    inputs_all: list[list[float]] = []
    contribs_all: list[dict[tuple[int, int], float]] = []
    logs: list[RoundLog] = []
    weights_all: list[RoundWeights] = []

    for k in range(rounds):
        if settings.rekey_per_round:
            distribute_keys(k)
        weights = sample_round_weights(topology, derive_rng(seed, "factor", k))
        weights_all.append(weights)
        enc_rngs = {i: derive_rng(seed, "enc", i, k) for i in range(n)}
        adverts = {
            i: step1_advertise(nodes[i], k, enc_rngs[i], settings.scale_bits) for i in range(n)
        }
        contribs: dict[tuple[int, int], float] = {}
        bits: dict[tuple[int, int], int] = {}
        inputs = [0.0] * n
        for receiver, sender in directed:
            msg = step2_contribute(
                nodes[sender],
                adverts[receiver],
                gains,
                float(weights.factors[(sender, receiver)]),
                enc_rngs[sender],
            )
            term = step3_finalize(
                nodes[receiver], msg, float(weights.factors[(receiver, sender)])
            )
            contribs[(receiver, sender)] = term
            bits[(receiver, sender)] = msg.combined.value.bit_length()
            inputs[receiver] += term
        p_prev, v_prev = positions[-1], velocities[-1]
        positions.append([p_prev[i] + v_prev[i] for i in range(n)])
        velocities.append([v_prev[i] + inputs[i] for i in range(n)])
        for i in range(n):
            nodes[i].position = positions[-1][i]
            nodes[i].velocity = velocities[-1][i]
        inputs_all.append(inputs)
        contribs_all.append(contribs)
        logs.append(
            RoundLog(
                round_index=k,
                contributions=dict(contribs),
                inputs=list(inputs),
                cipher_bits=bits,
                weight_products={e: float(w) for e, w in weights.products.items()},
            )
        )

    trajectory = Trajectory(
        positions=positions,
        velocities=velocities,
        inputs=inputs_all,
        contributions=contribs_all,
    )
    return EncryptedRun(trajectory=trajectory, round_logs=logs, weights=weights_all, settings=settings)


def contribution_quantization_bound(
    gains: GainPair,
    initiator_factor: float,
    responder_factor: float,
    dp: float,
    dv: float,
    scale_bits: int,
) -> float:
    """First-order bound on one exchanged term's fixed-point error.

    States are rounded once on each side (difference error at most one step h)
    and each multiplier is rounded once (error at most h / 2), giving
    a_A * ((gamma1 + gamma2) * a_B * h + (|dp| + |dv|) * h / 2 + h * h).
    """
    h = 2.0 ** -scale_bits
    g1, g2 = gains.as_floats()
    return initiator_factor * (
        (g1 + g2) * responder_factor * h + (abs(dp) + abs(dv)) * h / 2 + h * h
    )
