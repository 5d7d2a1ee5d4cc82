"""Delimited output and figures for simulation runs.

CSV cells are written with repr of the float value, the shortest string that
round-trips, so identical runs produce byte-identical files.  Figures are
rendered headless and are a convenience view of the same data; the CSVs are
the canonical record.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .adversary import Estimate
from .dynamics import Trajectory
from .protocol import RoundLog

__all__ = [
    "write_states_csv",
    "write_contributions_csv",
    "write_round_log_csv",
    "write_estimates_csv",
    "write_grid_csv",
    "plot_states",
    "plot_estimates",
    "plot_estimate_errors",
    "plot_cipher_sizes",
    "plot_grid",
]


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, int):
        return str(value)
    try:
        as_float = float(value)
    except OverflowError:
        # exact rationals can outgrow float range once rho**k amplification
        # kicks in; the sign is still meaningful
        as_float = float("inf") if value > 0 else float("-inf")
    return repr(as_float)


def _writer(handle):
    return csv.writer(handle, lineterminator="\n")


def write_states_csv(path: Path | str, trajectory: Trajectory) -> Path:
    """One row per (round, agent); the final round has no input."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        w = _writer(handle)
        w.writerow(["round", "agent_id", "p", "v", "u"])
        for k in range(trajectory.rounds + 1):
            for i in range(trajectory.n_agents):
                u = trajectory.inputs[k][i] if k < trajectory.rounds else None
                w.writerow(
                    [k, i, _fmt(trajectory.positions[k][i]), _fmt(trajectory.velocities[k][i]), _fmt(u)]
                )
    return path


def write_contributions_csv(path: Path | str, trajectory: Trajectory) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        w = _writer(handle)
        w.writerow(["round", "from", "to", "u_ab"])
        for k, row in enumerate(trajectory.contributions):
            for (receiver, sender) in sorted(row):
                w.writerow([k, sender, receiver, _fmt(row[(receiver, sender)])])
    return path


def write_round_log_csv(path: Path | str, round_logs: Sequence[RoundLog]) -> Path:
    """The encrypted-run message log, one row per delivered reply."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        w = _writer(handle)
        w.writerow(["round", "from", "to", "u_ab", "cipher_len_bits"])
        for log in round_logs:
            for (receiver, sender) in sorted(log.contributions):
                w.writerow(
                    [
                        log.round_index,
                        sender,
                        receiver,
                        _fmt(log.contributions[(receiver, sender)]),
                        log.cipher_bits[(receiver, sender)],
                    ]
                )
    return path


def write_estimates_csv(
    path: Path | str,
    estimates: Sequence[Estimate],
    true_p0,
    true_v0,
) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        w = _writer(handle)
        w.writerow(["k_a", "p0_hat", "v0_hat", "err_p", "err_v", "bound_p", "bound_v"])
        for est in estimates:
            w.writerow(
                [
                    est.k_a,
                    _fmt(est.p0_hat),
                    _fmt(est.v0_hat),
                    _fmt(abs(est.p0_hat - true_p0)),
                    _fmt(abs(est.v0_hat - true_v0)),
                    _fmt(est.bound_p),
                    _fmt(est.bound_v),
                ]
            )
    return path


def write_grid_csv(path: Path | str, cells: Sequence[Mapping]) -> Path:
    """Long-form summary of the attack grid, one row per cell metric."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        w = _writer(handle)
        w.writerow(["cell", "attacker", "target", "weights_known", "outcome", "metric", "value"])
        for cell in cells:
            for metric, value in cell["metrics"].items():
                w.writerow(
                    [
                        cell["cell"],
                        cell["attacker"],
                        cell["target"],
                        int(cell["weights_known"]),
                        cell["outcome"],
                        metric,
                        _fmt(value),
                    ]
                )
    return path


def plot_states(path: Path | str, trajectory: Trajectory, title: str = "") -> Path:
    path = Path(path)
    rounds = range(trajectory.rounds + 1)
    fig, (ax_p, ax_v) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for i in range(trajectory.n_agents):
        ax_p.plot(rounds, [float(row[i]) for row in trajectory.positions], label=f"agent {i}")
        ax_v.plot(rounds, [float(row[i]) for row in trajectory.velocities])
    ax_p.set_ylabel("position")
    ax_v.set_ylabel("velocity")
    ax_v.set_xlabel("round")
    ax_p.legend(loc="best", fontsize="small")
    if title:
        ax_p.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_estimates(
    path: Path | str,
    estimates: Sequence[Estimate],
    true_p0: float,
    true_v0: float,
) -> Path:
    path = Path(path)
    ks = [est.k_a for est in estimates]
    fig, (ax_p, ax_v) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax_p.plot(ks, [float(est.p0_hat) for est in estimates], marker=".", label="estimate")
    ax_p.axhline(float(true_p0), linestyle="--", color="gray", label="true value")
    ax_v.plot(ks, [float(est.v0_hat) for est in estimates], marker=".")
    ax_v.axhline(float(true_v0), linestyle="--", color="gray")
    ax_p.set_ylabel("initial position estimate")
    ax_v.set_ylabel("initial velocity estimate")
    ax_v.set_xlabel("anchor round")
    ax_p.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_estimate_errors(
    path: Path | str,
    estimates: Sequence[Estimate],
    true_p0: float,
    true_v0: float,
) -> Path:
    path = Path(path)
    ks = [est.k_a for est in estimates]
    err_p = [abs(float(est.p0_hat) - float(true_p0)) for est in estimates]
    err_v = [abs(float(est.v0_hat) - float(true_v0)) for est in estimates]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(ks, [max(e, 1e-300) for e in err_p], marker=".", label="|position error|")
    ax.semilogy(ks, [max(e, 1e-300) for e in err_v], marker=".", label="|velocity error|")
    if estimates and estimates[0].bound_p is not None:
        ax.semilogy(ks, [float(est.bound_p) for est in estimates], "--", label="position bound")
        ax.semilogy(ks, [float(est.bound_v) for est in estimates], "--", label="velocity bound")
    ax.set_xlabel("anchor round")
    ax.set_ylabel("initial-state estimate error")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_cipher_sizes(path: Path | str, round_logs: Sequence[RoundLog]) -> Path:
    path = Path(path)
    xs: list[int] = []
    ys: list[int] = []
    for log in round_logs:
        for bits in log.cipher_bits.values():
            xs.append(log.round_index)
            ys.append(bits)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.scatter(xs, ys, s=4, alpha=0.4)
    ax.set_xlabel("round")
    ax.set_ylabel("reply ciphertext size (bits)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_grid(path: Path | str, cells: Sequence[Mapping]) -> Path:
    """Representative reconstruction errors per attack setting, log scale."""
    path = Path(path)
    labels: list[str] = []
    values: list[float] = []
    for cell in cells:
        for metric, value in cell["metrics"].items():
            if value is None or not metric.endswith("err"):
                continue
            labels.append(f"{cell['cell']}: {metric}")
            values.append(max(float(value), 1e-300))
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(labels) + 2))
    ax.barh(range(len(labels)), values, log=True)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize="small")
    ax.invert_yaxis()
    ax.set_xlabel("initial-state reconstruction error")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
