"""Command-line entry point for single runs, batches and table reproductions.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 safety
violation detected during a reproduction or sweep.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .lfg import Role
from .sim import (
    ConfigError,
    SimConfig,
    SweepSummary,
    apply_overrides,
    load_config,
    run_batch,
    run_episode,
    write_run_log,
    write_summary,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_VIOLATION = 3

# Parameter grid of the published arrival-statistics table for the MPC cases:
# (HV initial role, p_a, p_a_hat).
TABLE2_ROWS = [
    (Role.LEADER, 1.00, 1.00),
    (Role.FOLLOWER, 1.00, 1.00),
    (Role.LEADER, 0.70, 1.00),
    (Role.LEADER, 0.50, 1.00),
    (Role.LEADER, 0.30, 1.00),
    (Role.FOLLOWER, 0.50, 1.00),
    (Role.FOLLOWER, 0.70, 1.00),
    (Role.FOLLOWER, 0.30, 1.00),
    (Role.LEADER, 1.00, 0.98),
    (Role.LEADER, 1.00, 0.95),
    (Role.LEADER, 1.00, 0.70),
    (Role.FOLLOWER, 1.00, 0.98),
    (Role.FOLLOWER, 1.00, 0.95),
    (Role.FOLLOWER, 1.00, 0.70),
]


def _base_config(args: argparse.Namespace) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = replace(cfg, scenario=replace(cfg.scenario, seed=args.seed))
    return cfg


def _output_dir(args: argparse.Namespace) -> Path:
    out = Path(args.output_dir or os.environ.get("LFGPLAN_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    out = _output_dir(args)
    record = run_episode(cfg)
    stem = f"run_seed{cfg.scenario.seed}"
    write_run_log(record, out / f"{stem}.csv")
    payload = {
        "config": cfg.to_dict(),
        "seed": record.seed,
        "outcome": {
            "first_arrival": record.outcome.first_arrival,
            "t_av": record.outcome.t_av,
            "t_hv": record.outcome.t_hv,
            "safety_violation": record.outcome.safety_violation,
            "collision": record.outcome.collision,
            "timed_out": record.outcome.timed_out,
        },
    }
    with open(out / f"{stem}.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    o = record.outcome
    print(
        f"first={o.first_arrival} t_av={o.t_av} t_hv={o.t_hv} "
        f"violation={o.safety_violation} collision={o.collision}"
    )
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    out = _output_dir(args)
    summary = run_batch(cfg, args.n_runs, parallelism=args.parallelism)
    write_summary(summary, cfg, out / f"batch_seed{cfg.scenario.seed}.json")
    print(
        f"n={summary.n_runs} av_first={summary.av_first_pct:.1f}% "
        f"hv_first={summary.hv_first_pct:.1f}% violations={summary.violation_count} "
        f"collisions={summary.collision_count}"
    )
    return EXIT_OK


def _print_table(header: list[str], rows: list[list[str]]) -> None:
    print(",".join(header))
    for row in rows:
        print(",".join(row))


def _sweep_rows(
    cfg: SimConfig,
    grid: list[tuple[Role, float, float]],
    av_policy: str,
    args: argparse.Namespace,
    out: Path,
    label: str,
) -> tuple[list[list[str]], list[SweepSummary]]:
    rows = []
    summaries = []
    for role, p_a, p_a_hat in grid:
        scenario = replace(
            cfg.scenario,
            hv_initial_role=role,
            p_a=p_a,
            p_a_hat=p_a_hat,
            av_policy=av_policy,
        )
        row_cfg = replace(cfg, scenario=scenario)
        summary = run_batch(row_cfg, args.n_runs, parallelism=args.parallelism)
        summaries.append(summary)
        name = f"{label}_{role.value}_pa{p_a:.2f}_pahat{p_a_hat:.2f}.json"
        write_summary(summary, row_cfg, out / name)
        rows.append(
            [
                role.value,
                f"{p_a:.2f}",
                f"{p_a_hat:.2f}",
                f"{summary.av_first_pct:.1f}",
                f"{summary.hv_first_pct:.1f}",
                str(summary.violation_count),
                str(summary.collision_count),
            ]
        )
    return rows, summaries


SWEEP_HEADER = [
    "initial_role", "p_a", "p_a_hat", "av_pct", "hv_pct", "violations", "collisions",
]


def cmd_reproduce_table1(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    out = _output_dir(args)
    grid = [(Role.LEADER, 1.0, 1.0), (Role.FOLLOWER, 1.0, 1.0)]
    rows, summaries = _sweep_rows(cfg, grid, "lfg", args, out, "table1")
    _print_table(["initial_role", "av_pct", "hv_pct"], [r[:1] + r[3:5] for r in rows])
    if any(s.violation_count for s in summaries):
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_reproduce_table2(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    out = _output_dir(args)
    rows, summaries = _sweep_rows(cfg, TABLE2_ROWS, "mpc", args, out, "table2")
    _print_table(SWEEP_HEADER, rows)
    if any(s.violation_count for s in summaries):
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    out = _output_dir(args)
    roles = [Role(r) for r in args.roles.split(",")]
    p_as = [float(v) for v in args.p_a.split(",")]
    p_a_hats = [float(v) for v in args.p_a_hat.split(",")]
    grid = [(r, pa, ph) for r in roles for pa in p_as for ph in p_a_hats]
    rows, summaries = _sweep_rows(cfg, grid, args.av_policy, args, out, "sweep")
    _print_table(SWEEP_HEADER, rows)
    if any(s.violation_count for s in summaries):
        return EXIT_VIOLATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfgplan",
        description="Leader-follower intersection game: runs, batches, reproductions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument(
            "--output-dir",
            default=None,
            help="output directory (default: $LFGPLAN_OUT or .)",
        )

    def batchy(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n-runs", type=int, default=1000)
        p.add_argument("--parallelism", type=int, default=1)

    p_run = sub.add_parser("run", help="one episode, writes CSV log + JSON outcome")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="Monte Carlo batch for one configuration")
    common(p_batch)
    batchy(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    p_t1 = sub.add_parser("reproduce-table1", help="2-LFG arrival statistics")
    common(p_t1)
    batchy(p_t1)
    p_t1.set_defaults(func=cmd_reproduce_table1)

    p_t2 = sub.add_parser("reproduce-table2", help="LFG + MPC arrival statistics grid")
    common(p_t2)
    batchy(p_t2)
    p_t2.set_defaults(func=cmd_reproduce_table2)

    p_sw = sub.add_parser("sweep", help="custom (role, p_a, p_a_hat) grid")
    common(p_sw)
    batchy(p_sw)
    p_sw.add_argument("--roles", default="leader,follower")
    p_sw.add_argument("--p-a", default="1.0")
    p_sw.add_argument("--p-a-hat", default="1.0")
    p_sw.add_argument("--av-policy", default="mpc", choices=["lfg", "mpc"])
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
