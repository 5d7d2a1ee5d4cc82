"""Communication topology, gain admissibility and randomized coupling weights.

The network is an undirected weighted graph.  Control gains (gamma1, gamma2)
are admissible when the graph is connected, 0 < gamma1 < gamma2, and
gamma1 - 2 * gamma2 > -4 / mu for every nonzero Laplacian eigenvalue mu; the
largest eigenvalue binds.  For privacy the protocol replaces each base weight
w_ij per round by a product of two private factors drawn near sqrt(w_ij), so
the effective weight stays inside (w_ij - delta_a, w_ij + delta_a).
:func:`check_admissible_variation` certifies that every weight pattern in that
box keeps the disagreement dynamics contracting, via a common quadratic
Lyapunov function evaluated at the box corners.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from random import Random
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

Real = Union[int, float, Fraction]
Edge = tuple[int, int]

__all__ = [
    "GraphError",
    "TopologyError",
    "GainCheckError",
    "BaseInstabilityError",
    "GainPair",
    "Topology",
    "RoundWeights",
    "GainCheckReport",
    "VariationReport",
    "laplacian",
    "is_connected",
    "eigenvalues_symmetric",
    "check_gains",
    "sample_round_weights",
    "check_admissible_variation",
]


class GraphError(Exception):
    """Base class for topology and admissibility failures."""


class TopologyError(GraphError):
    """The graph description is malformed or disconnected."""


class GainCheckError(GraphError):
    """Gain admissibility cannot be decided for the given graph."""


class BaseInstabilityError(GraphError):
    """The nominal closed loop is not contracting, so no variation is safe."""


@dataclass(frozen=True)
class GainPair:
    """Position and velocity coupling gains.

    Construction only requires positivity so that inadmissible pairs can
    still be simulated (to demonstrate divergence); the consensus ordering
    gamma2 > gamma1 is enforced by :func:`check_gains`.
    """

    gamma1: Real
    gamma2: Real

    def __post_init__(self) -> None:
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise GainCheckError(
                f"gains must be positive, got ({self.gamma1}, {self.gamma2})"
            )

    def as_floats(self) -> tuple[float, float]:
        return float(self.gamma1), float(self.gamma2)


def _normalize_edge(i: int, j: int) -> Edge:
    if i == j:
        raise TopologyError(f"self-loop on agent {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Topology:
    """An undirected weighted graph with a shared weight-variation budget."""

    n_agents: int
    edges: tuple[Edge, ...]
    weights: Mapping[Edge, Real]
    delta_a: Real = 0

    @classmethod
    def build(
        cls,
        n_agents: int,
        edges: Iterable[tuple[int, int]],
        weights: Mapping[tuple[int, int], Real] | Real = 1,
        delta_a: Real = 0,
    ) -> "Topology":
        """Normalize edge order, apply a scalar weight if one is given."""
        if n_agents < 2:
            raise TopologyError("need at least two agents")
        normalized: dict[Edge, Real] = {}
        for i, j in edges:
            if not (0 <= i < n_agents and 0 <= j < n_agents):
                raise TopologyError(f"edge ({i}, {j}) references a missing agent")
            key = _normalize_edge(i, j)
            if key in normalized:
                raise TopologyError(f"duplicate edge {key}")
            if isinstance(weights, Mapping):
                try:
                    w = weights[(i, j)]
                except KeyError:
                    try:
                        w = weights[(j, i)]
                    except KeyError:
                        raise TopologyError(f"no weight for edge {key}") from None
            else:
                w = weights
            if w <= 0:
                raise TopologyError(f"weight on edge {key} must be positive, got {w}")
            normalized[key] = w
        ordered = tuple(sorted(normalized))
        if delta_a < 0:
            raise TopologyError("delta_a must be non-negative")
        if ordered and delta_a >= min(normalized.values()):
            raise TopologyError(
                "delta_a must stay below the smallest weight so weights cannot vanish"
            )
        return cls(n_agents=n_agents, edges=ordered, weights=normalized, delta_a=delta_a)

    def neighbors(self, agent: int) -> tuple[int, ...]:
        out = [j for i, j in self.edges if i == agent]
        out += [i for i, j in self.edges if j == agent]
        return tuple(sorted(out))

    def adjacency(self) -> list[list[Real]]:
        a: list[list[Real]] = [[0] * self.n_agents for _ in range(self.n_agents)]
        for (i, j), w in self.weights.items():
            a[i][j] = w
            a[j][i] = w
        return a

    def laplacian(self) -> list[list[Real]]:
        return laplacian(self.adjacency())

    def scaled(self, factor: Real) -> "Topology":
        """Rescale every weight (and the variation budget) by ``factor``."""
        if factor <= 0:
            raise TopologyError("scale factor must be positive")
        return Topology.build(
            self.n_agents,
            self.edges,
            {e: w * factor for e, w in self.weights.items()},
            delta_a=self.delta_a * factor,
        )


def laplacian(adjacency: Sequence[Sequence[Real]]) -> list[list[Real]]:
    """Weighted graph Laplacian L = diag(A @ 1) - A.

    The adjacency matrix must be symmetric with zero diagonal and
    non-negative entries.
    """
    n = len(adjacency)
    for i in range(n):
        if len(adjacency[i]) != n:
            raise TopologyError("adjacency matrix must be square")
        if adjacency[i][i] != 0:
            raise TopologyError(f"nonzero diagonal at agent {i}")
        for j in range(i + 1, n):
            if adjacency[i][j] != adjacency[j][i]:
                raise TopologyError(f"adjacency not symmetric at ({i}, {j})")
            if adjacency[i][j] < 0:
                raise TopologyError(f"negative weight at ({i}, {j})")
    out: list[list[Real]] = [[0] * n for _ in range(n)]
    for i in range(n):
        degree = sum(adjacency[i])
        for j in range(n):
            out[i][j] = degree if i == j else -adjacency[i][j]
    return out


def is_connected(topology: Topology) -> bool:
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = frontier.pop()
        for other in topology.neighbors(nxt):
            if other not in seen:
                seen.add(other)
                frontier.append(other)
    return len(seen) == topology.n_agents


def eigenvalues_symmetric(
    matrix: Sequence[Sequence[Real]],
    tol: float = 1e-12,
    max_sweeps: int = 64,
) -> list[float]:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    a = [[float(x) for x in row] for row in matrix]
    n = len(a)
    if any(len(row) != n for row in a):
        raise TopologyError("matrix must be square")
    for p in range(n):
        for q in range(p + 1, n):
            if a[p][q] != a[q][p]:
                raise TopologyError(
                    f"matrix must be symmetric, entries ({p},{q}) and ({q},{p}) differ"
                )
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p][q] * a[p][q]
        if off <= tol * tol:
            break
        for p in range(n):
            for q in range(p + 1, n):
                if abs(a[p][q]) <= tol / (n * n):
                    continue
                tau = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = (1 if tau >= 0 else -1) / (abs(tau) + (tau * tau + 1) ** 0.5)
                c = 1 / (t * t + 1) ** 0.5
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    else:
        raise GainCheckError(f"Jacobi iteration did not settle in {max_sweeps} sweeps")
    return sorted(a[i][i] for i in range(n))


@dataclass(frozen=True)
class GainCheckReport:
    ok: bool
    reason: str
    eigenvalues: tuple[float, ...]
    binding_eigenvalue: float
    margin: float


def check_gains(
    gains: GainPair | tuple[Real, Real],
    laplacian_matrix: Sequence[Sequence[Real]],
    zero_tol: float = 1e-9,
) -> GainCheckReport:
    """Decide gain admissibility against a fixed Laplacian.

    Requires gamma1 - 2 * gamma2 > -4 / mu at every nonzero eigenvalue mu;
    the margin reported is the slack at the binding (largest) eigenvalue.
    """
    if isinstance(gains, tuple):
        gains = GainPair(*gains)
    g1, g2 = gains.as_floats()
    eigs = eigenvalues_symmetric(laplacian_matrix)
    nonzero = [e for e in eigs if e > zero_tol]
    if len(nonzero) != len(eigs) - 1:
        raise GainCheckError(
            "Laplacian must have a simple zero eigenvalue (connected graph); "
            f"spectrum {eigs}"
        )
    binding = max(nonzero)
    margin = (g1 - 2 * g2) - (-4 / binding)
    if g1 >= g2:
        reason = "ordering"
        ok = False
    elif margin <= 0:
        reason = "curvature"
        ok = False
    else:
        reason = ""
        ok = True
    return GainCheckReport(
        ok=ok,
        reason=reason,
        eigenvalues=tuple(eigs),
        binding_eigenvalue=binding,
        margin=margin,
    )


@dataclass(frozen=True)
class RoundWeights:
    """One round's effective weights and the private per-endpoint factors."""

    products: Mapping[Edge, Real]
    factors: Mapping[tuple[int, int], Real] = field(default_factory=dict)

    def weight(self, i: int, j: int) -> Real:
        return self.products[_normalize_edge(i, j)]


def _quantize(value: Fraction, bits: int) -> Fraction:
    return Fraction(round(value * (1 << bits)), 1 << bits)


def sample_round_weights(
    topology: Topology,
    rng: Random,
    quantize_bits: int | None = None,
) -> RoundWeights:
    """Draw per-edge endpoint factors so products land strictly inside the box.

    Each endpoint of edge (i, j) keeps a private factor near sqrt(w_ij); the
    product of the two factors is the effective weight for the round.  With
    ``quantize_bits`` set, factors are snapped to a dyadic grid so downstream
    exact-arithmetic runs keep bounded denominators.  delta_a == 0 degenerates
    to the base weights.
    """
    products: dict[Edge, Fraction] = {}
    factors: dict[tuple[int, int], Fraction] = {}
    delta = Fraction(topology.delta_a)
    for edge in topology.edges:
        w = Fraction(topology.weights[edge])
        if delta == 0:
            # degenerate case: the factorization is arbitrary but the
            # product must reproduce the base weight exactly
            f = _sqrt_fraction(w, quantize_bits)
            i, j = edge
            products[edge] = w
            factors[(i, j)] = f
            factors[(j, i)] = w / f
            continue
        lo = float(w - delta) ** 0.5
        hi = float(w + delta) ** 0.5
        while True:
            fa = Fraction(rng.uniform(lo, hi))
            fb = Fraction(rng.uniform(lo, hi))
            if quantize_bits is not None:
                fa = _quantize(fa, quantize_bits)
                fb = _quantize(fb, quantize_bits)
            prod = fa * fb
            if w - delta < prod < w + delta:
                break
        i, j = edge
        products[edge] = prod
        factors[(i, j)] = fa
        factors[(j, i)] = fb
    return RoundWeights(products=products, factors=factors)


def _sqrt_fraction(w: Fraction, quantize_bits: int | None) -> Fraction:
    root = Fraction(float(w) ** 0.5)
    if quantize_bits is not None:
        root = _quantize(root, quantize_bits)
        if root == 0:
            root = Fraction(1, 1 << quantize_bits)
    return root


def _agreement_complement_basis(n: int) -> np.ndarray:
    seed = np.eye(n)
    seed[:, 0] = 1.0
    q, _ = np.linalg.qr(seed)
    return q[:, 1:]


def _disagreement_transition(
    topology_laplacian: np.ndarray,
    gains: GainPair,
    basis: np.ndarray,
) -> np.ndarray:
    g1, g2 = gains.as_floats()
    reduced = basis.T @ topology_laplacian @ basis
    m = basis.shape[1]
    eye = np.eye(m)
    top = np.hstack([eye, eye])
    bottom = np.hstack([-g1 * reduced, eye - g2 * reduced])
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class VariationReport:
    ok: bool
    margin: float
    base_spectral_radius: float
    cases_checked: int


def check_admissible_variation(
    topology: Topology,
    gains: GainPair,
    samples: int = 200,
    rng: Random | None = None,
    corner_limit: int = 1024,
) -> VariationReport:
    """Certify contraction of the disagreement dynamics over the weight box.

    Solves a discrete Lyapunov equation for the nominal weights, then checks
    that the Lyapunov difference stays negative definite at every corner of
    the per-edge weight box (all weights at w +/- delta_a) plus random
    interior samples.  The margin is the largest eigenvalue of any Lyapunov
    difference seen; negative means certified.
    """
    report = check_gains(gains, topology.laplacian())
    if not report.ok:
        raise BaseInstabilityError(
            f"gains inadmissible at the nominal weights "
            f"({report.reason}, margin {report.margin:.3g})"
        )
    basis = _agreement_complement_basis(topology.n_agents)
    nominal = np.array([[float(x) for x in row] for row in topology.laplacian()])
    h0 = _disagreement_transition(nominal, gains, basis)
    radius = max(abs(np.linalg.eigvals(h0)))
    if radius >= 1:
        raise BaseInstabilityError(f"nominal disagreement spectral radius {radius:.6f} >= 1")
    q = solve_discrete_lyapunov(h0.T, np.eye(h0.shape[0]))

    def difference_margin(weight_map: Mapping[Edge, float]) -> float:
        adj = np.zeros((topology.n_agents, topology.n_agents))
        for (i, j), w in weight_map.items():
            adj[i][j] = w
            adj[j][i] = w
        lap = np.diag(adj.sum(axis=1)) - adj
        h = _disagreement_transition(lap, gains, basis)
        diff = h.T @ q @ h - q
        return float(np.linalg.eigvalsh(diff)[-1])

    delta = float(topology.delta_a)
    worst = difference_margin({e: float(w) for e, w in topology.weights.items()})
    cases = 1
    n_edges = len(topology.edges)
    if delta > 0:
        if 1 << n_edges <= corner_limit:
            for signs in product((-1.0, 1.0), repeat=n_edges):
                corner = {
                    e: float(topology.weights[e]) + s * delta
                    for e, s in zip(topology.edges, signs)
                }
                worst = max(worst, difference_margin(corner))
                cases += 1
        if rng is None:
            rng = Random("variation-check")
        for _ in range(samples):
            drawn = {
                e: rng.uniform(float(topology.weights[e]) - delta, float(topology.weights[e]) + delta)
                for e in topology.edges
            }
            worst = max(worst, difference_margin(drawn))
            cases += 1
    return VariationReport(
        ok=worst < 0,
        margin=worst,
        base_spectral_radius=float(radius),
        cases_checked=cases,
    )
