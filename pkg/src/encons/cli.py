"""Command line front end: run a scenario, run the attack grid, compare runs.

Exit codes: 0 on success, 2 on configuration or input errors, 1 on anything
unexpected.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .graph import GraphError
from .harness import ConfigError, compare_runs, load_config, run_grid, run_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encons",
        description="Privacy-preserving average consensus simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write CSVs and figures")
    run.add_argument("--config", required=True, type=Path, help="scenario config (JSON)")
    run.add_argument("--out", type=Path, default=None, help="output directory (default: runs/<name>)")
    run.add_argument("--seed", default=None, help="override the config seed")
    run.add_argument(
        "--mode", choices=("plaintext", "encrypted"), default=None, help="override the config mode"
    )
    run.add_argument("--rounds", type=int, default=None, help="override the round count")
    run.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    grid = sub.add_parser("grid", help="run the attack outcome grid")
    grid.add_argument("--config", required=True, type=Path)
    grid.add_argument("--out", type=Path, default=None)
    grid.add_argument("--seed", default=None)
    grid.add_argument("--no-figures", action="store_true")

    compare = sub.add_parser("compare", help="compare the states.csv of two run directories")
    compare.add_argument("dir_a", type=Path)
    compare.add_argument("dir_b", type=Path)
    return parser


def _coerce_seed(raw: str) -> int | str:
    try:
        return int(raw)
    except ValueError:
        return raw


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=_coerce_seed(args.seed))
    if args.mode is not None:
        config = replace(config, mode=args.mode)
    if args.rounds is not None:
        if args.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        config = replace(config, rounds=args.rounds)
    out_dir = args.out if args.out is not None else Path("runs") / config.name
    rep = run_scenario(config, out_dir, figures=not args.no_figures)
    print(f"{rep.name}: {config.rounds} rounds ({rep.mode}), {rep.ms_per_round:.2f} ms/round")
    for label, round_index in sorted(rep.consensus_rounds.items()):
        where = f"round {round_index}" if round_index is not None else "not reached"
        print(f"  positions within {label}: {where}")
    if rep.divergence is not None:
        print(f"  max divergence from plaintext replay: {rep.divergence['max']:.3e}")
    if rep.attack is not None:
        agree = rep.attack.get("estimate_at_agreement")
        if agree is not None:
            print(
                f"  attack at local agreement (round {agree['k_a']}): "
                f"position error {agree['err_p']:.3e} (bound {agree['bound_p']:.3e})"
            )
        print(
            f"  attack terminal position error: {rep.attack['terminal_err_p']:.3e}, "
            f"best over anchors: {rep.attack['best_err_p']:.3e}"
        )
    print(f"  wrote {', '.join(str(p) for p in rep.csv_paths.values())}")
    if rep.figure_paths:
        print(f"  wrote {', '.join(str(p) for p in rep.figure_paths.values())}")
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=_coerce_seed(args.seed))
    out_dir = args.out if args.out is not None else Path("runs") / f"{config.name}-grid"
    rep = run_grid(config, out_dir, figures=not args.no_figures)
    print(f"{config.name}: attack grid over {rep.seeds} randomized runs")
    for cell in rep.cells:
        metrics = ", ".join(f"{k}={v:.3e}" for k, v in cell["metrics"].items() if v is not None)
        print(f"  {cell['cell']}: {cell['outcome']} ({metrics})")
    print(f"  wrote {rep.csv_path}")
    if rep.figure_path is not None:
        print(f"  wrote {rep.figure_path}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    result = compare_runs(args.dir_a, args.dir_b)
    verdict = "identical" if result["identical"] else "different"
    print(
        f"{args.dir_a} vs {args.dir_b}: {verdict} "
        f"({result['rows']} rows, {result['agents']} agents, {result['rounds']} rounds)"
    )
    print(
        f"  max divergence: position {result['max_position_divergence']:.3e}, "
        f"velocity {result['max_velocity_divergence']:.3e}, "
        f"input {result['max_input_divergence']:.3e}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "grid": _cmd_grid, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except (ConfigError, GraphError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # keep the CLI from tracebacking on surprises
        print(f"unexpected error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
