"""Initial-state reconstruction: exact recovery laws, the error-amplification
identity, the sole-neighbor shortcuts and the unknown-weight failure mode."""

from fractions import Fraction
from random import Random

import pytest

from encons.adversary import (
    AdversaryError,
    Estimate,
    InsufficientTranscriptError,
    Transcript,
    UnknownWeightsError,
    assume_constant_weight,
    attack_sole_neighbor_two_step,
    error_bounds,
    estimate_initial_known_weights,
    estimate_initial_sweep,
    estimate_trajectory,
    reconstruct_velocity_sole_neighbor,
    attempt_estimate_unknown_weights,
)
from encons.dynamics import simulate
from encons.graph import GainPair, RoundWeights, Topology, sample_round_weights

from conftest import DEMO_POSITIONS, DEMO_VELOCITIES

RHO = Fraction(2)  # gamma2 / (gamma2 - gamma1) for the demo gains


@pytest.fixture
def demo_run(demo_topology, demo_gains):
    return simulate(demo_topology, demo_gains, DEMO_POSITIONS, DEMO_VELOCITIES, 60)


@pytest.fixture
def transcript_01(demo_run, demo_gains):
    """Attacker 0 watching target 1, unit weights known."""
    return Transcript.from_trajectory(demo_run, demo_gains, 0, 1, weights=Fraction(1))


@pytest.fixture
def transcript_23(demo_run, demo_gains):
    """Attacker 2 watching target 3, its sole neighbor."""
    return Transcript.from_trajectory(demo_run, demo_gains, 2, 3, weights=Fraction(1))


# ------------------------------------------------------------------ transcripts


def test_transcript_from_trajectory(demo_run, demo_gains, transcript_01):
    assert transcript_01.rounds == 60
    assert transcript_01.contributions[0] == demo_run.contributions[0][(0, 1)]
    assert transcript_01.positions == tuple(row[0] for row in demo_run.positions)
    listed = Transcript.from_trajectory(
        demo_run, demo_gains, 0, 1, weights=[Fraction(1)] * 60
    )
    assert listed == transcript_01


def test_transcript_rejects_short_weight_lists(demo_run, demo_gains):
    with pytest.raises(InsufficientTranscriptError):
        Transcript.from_trajectory(demo_run, demo_gains, 0, 1, weights=[1] * 59)


def test_assume_constant_weight(transcript_01):
    blind = Transcript(
        gains=transcript_01.gains,
        contributions=transcript_01.contributions,
        positions=transcript_01.positions,
        velocities=transcript_01.velocities,
        weights=None,
    )
    assert assume_constant_weight(blind, Fraction(1)).weights == (Fraction(1),) * 60
    with pytest.raises(ValueError):
        assume_constant_weight(blind, 0)


# ----------------------------------------------------------------- error law


def test_error_bounds_hand_checked(demo_gains):
    bound_p, bound_v = error_bounds(demo_gains, 5, Fraction(1, 1000))
    assert bound_p == Fraction(4, 125)  # 2**5 / 1000
    assert bound_v == Fraction(2, 125)


def test_error_bounds_need_ordered_gains():
    with pytest.raises(AdversaryError):
        error_bounds(GainPair(0.5, 0.5), 3, Fraction(1, 1000))


def test_exact_anchor_recovers_exactly(demo_run, transcript_01):
    for k_a in (0, 1, 7, 25):
        anchor = demo_run.positions[k_a][1]
        est = estimate_initial_known_weights(transcript_01, k_a, anchor)
        assert est.p0_hat == DEMO_POSITIONS[1]
        assert est.v0_hat == DEMO_VELOCITIES[1]


def test_anchor_error_is_amplified_exactly(demo_run, transcript_01, demo_gains):
    # the estimate error equals rho**k_a times the anchor error, with the
    # velocity error scaled by gamma1 / gamma2; both identities are exact
    delta = Fraction(1, 1000)
    for k_a in (0, 3, 10, 30):
        anchor = demo_run.positions[k_a][1] + delta
        est = estimate_initial_known_weights(transcript_01, k_a, anchor, delta=delta)
        err_p = abs(est.p0_hat - DEMO_POSITIONS[1])
        err_v = abs(est.v0_hat - DEMO_VELOCITIES[1])
        assert err_p == RHO**k_a * delta == est.bound_p
        assert err_v == RHO**k_a * delta / 2 == est.bound_v


def test_sweep_matches_individual_estimates(demo_run, transcript_01):
    anchors = [demo_run.positions[k][0] for k in range(31)]
    deltas = [demo_run.pair_gap(k, 0, 1) for k in range(31)]
    sweep = estimate_initial_sweep(transcript_01, anchors, deltas=deltas)
    assert len(sweep) == 31
    for k_a, est in enumerate(sweep):
        single = estimate_initial_known_weights(
            transcript_01, k_a, anchors[k_a], delta=deltas[k_a]
        )
        assert est == single
        assert est.k_a == k_a


def test_sweep_argument_checks(transcript_01):
    assert estimate_initial_sweep(transcript_01, []) == []
    with pytest.raises(ValueError):
        estimate_initial_sweep(transcript_01, [0, 0], deltas=[1])
    with pytest.raises(InsufficientTranscriptError):
        estimate_initial_sweep(transcript_01, list(range(62)))


def test_estimates_need_weights(demo_run, demo_gains):
    blind = Transcript.from_trajectory(demo_run, demo_gains, 0, 1, weights=None)
    with pytest.raises(UnknownWeightsError):
        estimate_initial_known_weights(blind, 3, Fraction(0))


def test_estimate_argument_checks(transcript_01):
    with pytest.raises(ValueError):
        estimate_initial_known_weights(transcript_01, -1, Fraction(0))
    with pytest.raises(InsufficientTranscriptError):
        estimate_initial_known_weights(transcript_01, 61, Fraction(0))
    bad_gains = Transcript(
        gains=GainPair(Fraction(6, 10), Fraction(3, 10)),
        contributions=transcript_01.contributions,
        positions=transcript_01.positions,
        velocities=transcript_01.velocities,
        weights=transcript_01.weights,
    )
    with pytest.raises(AdversaryError):
        estimate_initial_known_weights(bad_gains, 1, Fraction(0))


def test_zero_weight_rounds_are_rejected(transcript_01):
    broken = Transcript(
        gains=transcript_01.gains,
        contributions=transcript_01.contributions,
        positions=transcript_01.positions,
        velocities=transcript_01.velocities,
        weights=(Fraction(0),) + transcript_01.weights[1:],
    )
    with pytest.raises(AdversaryError):
        estimate_initial_known_weights(broken, 2, Fraction(0))
    with pytest.raises(AdversaryError):
        attack_sole_neighbor_two_step(broken)


# ------------------------------------------------------- trajectory recovery


def test_estimate_trajectory_recovers_the_target(demo_run, transcript_01):
    k_a = 12
    anchor = demo_run.positions[k_a][1]
    positions, velocities = estimate_trajectory(transcript_01, k_a, anchor)
    assert positions == [demo_run.positions[k][1] for k in range(k_a + 1)]
    assert velocities == [demo_run.velocities[k][1] for k in range(k_a)]
    assert positions[k_a] == anchor
    # the reconstructed pair satisfies the position update round by round
    for k in range(k_a):
        assert positions[k + 1] == positions[k] + velocities[k]


def test_estimate_trajectory_argument_checks(transcript_01):
    with pytest.raises(ValueError):
        estimate_trajectory(transcript_01, 0, Fraction(0))


# ------------------------------------------------------------------ two-step


def test_two_step_on_the_demo_network(transcript_23):
    p0, v0 = attack_sole_neighbor_two_step(transcript_23)
    assert p0 == Fraction(90)
    assert v0 == Fraction(-40)


def test_two_step_needs_two_rounds(demo_run, demo_gains):
    short = Transcript(
        gains=demo_gains,
        contributions=demo_run.contributions[0][(2, 3)],
        positions=tuple(row[2] for row in demo_run.positions[:2]),
        velocities=tuple(row[2] for row in demo_run.velocities[:2]),
        weights=(Fraction(1),),
    )
    short = Transcript(
        gains=demo_gains,
        contributions=(demo_run.contributions[0][(2, 3)],),
        positions=short.positions,
        velocities=short.velocities,
        weights=(Fraction(1),),
    )
    with pytest.raises(InsufficientTranscriptError):
        attack_sole_neighbor_two_step(short)
    blind = Transcript(
        gains=demo_gains,
        contributions=tuple(demo_run.contributions[k][(2, 3)] for k in range(2)),
        positions=tuple(row[2] for row in demo_run.positions[:3]),
        velocities=tuple(row[2] for row in demo_run.velocities[:3]),
        weights=None,
    )
    with pytest.raises(UnknownWeightsError):
        attack_sole_neighbor_two_step(blind)


def test_two_step_with_time_varying_weights(demo_topology, demo_gains):
    # exact even when every round uses different (known) weights
    rng = Random("varying")
    schedule = [sample_round_weights(demo_topology, rng) for _ in range(2)]
    traj = simulate(
        demo_topology, demo_gains, DEMO_POSITIONS, DEMO_VELOCITIES, 2, weight_schedule=schedule
    )
    transcript = Transcript.from_trajectory(
        traj, demo_gains, 2, 3, weights=[w.weight(2, 3) for w in schedule]
    )
    p0, v0 = attack_sole_neighbor_two_step(transcript)
    assert p0 == Fraction(90)
    assert v0 == Fraction(-40)


def test_two_step_randomized_instances(demo_gains):
    rng = Random("instances")
    for _ in range(25):
        n = rng.randrange(3, 7)
        # a connected core among agents 0..n-2, agent n-1 hangs off agent 0
        core = [(i, i + 1) for i in range(n - 2)]
        extra = [
            (i, j)
            for i in range(n - 1)
            for j in range(i + 2, n - 1)
            if rng.random() < 0.4
        ]
        edges = core + extra + [(0, n - 1)]
        weights = {e: Fraction(rng.randrange(2, 30), 16) for e in edges}
        top = Topology.build(n, edges, weights)
        positions = [Fraction(rng.randrange(-800, 800), 8) for _ in range(n)]
        velocities = [Fraction(rng.randrange(-400, 400), 8) for _ in range(n)]
        schedule = [sample_round_weights(top, rng) for _ in range(2)]
        traj = simulate(top, demo_gains, positions, velocities, 2, weight_schedule=schedule)
        transcript = Transcript.from_trajectory(
            traj, demo_gains, 0, n - 1, weights=[w.weight(0, n - 1) for w in schedule]
        )
        p0, v0 = attack_sole_neighbor_two_step(transcript)
        assert p0 == positions[n - 1]
        assert v0 == velocities[n - 1]


def test_two_step_symmetry_fixed_point(demo_topology, demo_gains):
    # identical initial states exchange all-zero terms; the attack then
    # returns the attacker's own state, which happens to be the right answer
    traj = simulate(demo_topology, demo_gains, (7, 7, 7, 7), (3, 3, 3, 3), 2)
    transcript = Transcript.from_trajectory(traj, demo_gains, 2, 3, weights=1)
    assert all(term == 0 for term in transcript.contributions)
    p0, v0 = attack_sole_neighbor_two_step(transcript)
    assert (p0, v0) == (7, 3)


# ------------------------------------------------------ velocity reconstruction


def test_velocity_reconstruction_error_identity(demo_run, transcript_23):
    # every reconstructed entry shares one error: the residual velocity
    # disagreement at the anchor round
    k_c = 45
    recon = reconstruct_velocity_sole_neighbor(transcript_23, k_c)
    residual = demo_run.velocities[k_c][2] - demo_run.velocities[k_c][3]
    assert len(recon) == k_c + 1
    for k in range(k_c + 1):
        assert recon[k] - demo_run.velocities[k][3] == residual
    assert recon[k_c] == demo_run.velocities[k_c][2]


def test_velocity_reconstruction_converges_with_the_run(demo_run, transcript_23):
    # at round 60 the pair's velocity residual is already below the 1e-3
    # agreement threshold, and the residual is the whole error
    recon = reconstruct_velocity_sole_neighbor(transcript_23, 60)
    assert abs(recon[0] - DEMO_VELOCITIES[3]) < Fraction(1, 1000)


def test_velocity_reconstruction_argument_checks(transcript_23):
    with pytest.raises(ValueError):
        reconstruct_velocity_sole_neighbor(transcript_23, -1)
    with pytest.raises(InsufficientTranscriptError):
        reconstruct_velocity_sole_neighbor(transcript_23, 61)


# ------------------------------------------------------------ unknown weights


def test_zero_budget_reduces_to_known_weights(demo_gains):
    top = Topology.build(4, [(0, 1), (0, 2), (1, 2), (2, 3)], Fraction(1), delta_a=0)
    schedule = [sample_round_weights(top, Random(k)) for k in range(20)]
    traj = simulate(top, demo_gains, DEMO_POSITIONS, DEMO_VELOCITIES, 20, weight_schedule=schedule)
    blind = Transcript.from_trajectory(traj, demo_gains, 0, 1, weights=None)
    known = Transcript.from_trajectory(traj, demo_gains, 0, 1, weights=Fraction(1))
    anchor = traj.positions[8][0]
    guessed = attempt_estimate_unknown_weights(blind, 8, anchor, Fraction(1))
    assert guessed == estimate_initial_known_weights(known, 8, anchor)


def test_true_constant_guess_matches_known_path(demo_run, transcript_01, demo_gains):
    blind = Transcript.from_trajectory(demo_run, demo_gains, 0, 1, weights=None)
    anchor = demo_run.positions[10][0]
    assert attempt_estimate_unknown_weights(
        blind, 10, anchor, Fraction(1)
    ) == estimate_initial_known_weights(transcript_01, 10, anchor)


def test_recursion_is_exact_under_any_known_schedule(demo_topology, demo_gains):
    # the backward recursion never depends on how the weights vary, only on
    # knowing them: an exact anchor recovers the initial state exactly even
    # on a randomly decoupled run
    schedule = [
        sample_round_weights(demo_topology, Random(f"blind:{k}"), quantize_bits=12)
        for k in range(30)
    ]
    traj = simulate(
        demo_topology, demo_gains, DEMO_POSITIONS, DEMO_VELOCITIES, 30, weight_schedule=schedule
    )
    transcript = Transcript.from_trajectory(
        traj, demo_gains, 0, 1, weights=[w.weight(0, 1) for w in schedule]
    )
    est = estimate_initial_known_weights(transcript, 18, traj.positions[18][1])
    assert est.p0_hat == DEMO_POSITIONS[1]
    assert est.v0_hat == DEMO_VELOCITIES[1]


def test_decoupled_weights_defeat_the_estimator(demo_run, demo_topology, demo_gains, transcript_01):
    # with randomized weights the guessed drive terms are wrong every round
    # and the backward recursion amplifies the mismatch; on the fixed-weight
    # run the same attacker anchors recover the state to high precision
    schedule = [
        sample_round_weights(demo_topology, Random(f"blind:{k}"), quantize_bits=12)
        for k in range(60)
    ]
    decoupled = simulate(
        demo_topology, demo_gains, DEMO_POSITIONS, DEMO_VELOCITIES, 60, weight_schedule=schedule
    )
    blind = Transcript.from_trajectory(decoupled, demo_gains, 0, 1, weights=None)
    blind_best = min(
        abs(est.p0_hat - DEMO_POSITIONS[1])
        for est in estimate_initial_sweep(
            assume_constant_weight(blind, Fraction(1)),
            [decoupled.positions[k][0] for k in range(61)],
        )
    )
    fixed_best = min(
        abs(est.p0_hat - DEMO_POSITIONS[1])
        for est in estimate_initial_sweep(
            transcript_01, [demo_run.positions[k][0] for k in range(61)]
        )
    )
    assert fixed_best < Fraction(1, 10**6)
    assert blind_best > Fraction(1, 100)
    assert blind_best > 10**4 * fixed_best
