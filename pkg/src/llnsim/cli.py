"""Command-line interface: topology generation, experiment runs, sweeps, reports."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .experiment import ConfigError, ExperimentConfig, run_experiment, sweep
from .scenario import FloorPlan, GenerationError, generate_topology

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

OUTDIR_ENV = "LLNSIM_OUTDIR"


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with ExperimentConfig fields")
    parser.add_argument("--protocol", choices=["rpl", "loadng"])
    parser.add_argument("--nodes", type=int)
    parser.add_argument("--seeds", help="comma-separated seed list, e.g. 1,2,3,4,5")
    parser.add_argument("--hours", type=float, dest="sim_hours")
    parser.add_argument("--rht", type=int, dest="rht_seconds")
    parser.add_argument("--dio-min", type=float, dest="dio_min_seconds")
    parser.add_argument("--dio-max", type=float, dest="dio_max_seconds")
    parser.add_argument("--trickle-k", type=int, dest="trickle_k")
    parser.add_argument("--range", type=float, dest="range_m")
    parser.add_argument("--loss-factor", type=float, dest="loss_factor")
    parser.add_argument("--queue-limit", type=int, dest="queue_limit")
    parser.add_argument("--max-attempts", type=int, dest="max_attempts")
    parser.add_argument("--wake-interval-ms", type=float, dest="wake_interval_ms")
    parser.add_argument("--scenario", dest="scenario_file",
                        help="scenario JSON written by gen-topology")
    parser.add_argument("--out", dest="out_dir", help=f"output directory "
                        f"(overridden by ${OUTDIR_ENV} when set)")
    parser.add_argument("--plots", action="store_true", default=None,
                        help="also render matplotlib figures into <out>/figures")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    config = ExperimentConfig.from_dict(data)
    for name in ("protocol", "nodes", "sim_hours", "rht_seconds", "dio_min_seconds",
                 "dio_max_seconds", "trickle_k", "range_m", "loss_factor", "queue_limit",
                 "max_attempts", "wake_interval_ms", "scenario_file", "out_dir", "plots"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if args.seeds is not None:
        config.seeds = tuple(int(s) for s in args.seeds.split(","))
    env_out = os.environ.get(OUTDIR_ENV)
    if env_out:
        config.out_dir = env_out
    config.validate()
    return config


def _cmd_gen_topology(args: argparse.Namespace) -> int:
    plan = FloorPlan.default()
    if args.plan:
        plan = FloorPlan.from_dict(json.loads(Path(args.plan).read_text()))
    topology = generate_topology(args.nodes, args.seed, plan, args.range)
    Path(args.out).write_text(topology.to_json() + "\n")
    print(f"wrote {args.out}: {args.nodes} nodes, seed {args.seed}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    bundle = run_experiment(config)
    agg = bundle.summary["aggregate"]
    print(f"bundle written to {bundle.out_dir}")
    print(f"  seeds: {list(config.seeds)}")
    print(f"  delivery ratio: {agg['delivery_ratio']['mean']:.4f}")
    print(f"  mean table entries: {agg['mean_table_entries']['mean']:.3f}")
    print(f"  total control bytes: {agg['total_overhead_bytes']['mean']:.0f}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    values = [int(v) for v in args.values.split(",")]
    result = sweep(config, args.axis, values)
    print(f"sweep table written to {result['csv']}")
    for row in result["rows"]:
        print(f"  {row['axis']}={row['value']}: entries={row['mean_entries']:.2f} "
              f"overhead={row['total_overhead_bytes']:.0f} B")
    if config.plots:
        from . import report

        for path in report.render_sweep_figures(Path(config.out_dir)):
            print(f"  figure: {path}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    from . import report

    bundles = [Path(b) for b in args.bundle]
    written: list[Path] = []
    if len(bundles) == 1 and (bundles[0] / "sweep.csv").exists():
        written = report.render_sweep_figures(bundles[0])
    elif len(bundles) == 1:
        written = report.render_run_figures(bundles[0])
    else:
        out = Path(args.out) if args.out else bundles[0].parent / "figures"
        written = report.render_comparison_figures(bundles, out)
    for path in written:
        print(f"figure: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llnsim",
        description="Simulate RPL and LOADng routing over a duty-cycled mesh "
                    "in a generated smart-home topology.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-topology", help="write a scenario JSON file")
    p_gen.add_argument("--nodes", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--range", type=float, default=5.0)
    p_gen.add_argument("--plan", help="floor-plan JSON (defaults to the built-in house)")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=_cmd_gen_topology)

    p_run = sub.add_parser("run", help="run one experiment (all seeds) into a bundle")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a bundle per axis value")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--axis", choices=["nodes", "rht"], required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated, e.g. 15,25,40")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_report = sub.add_parser("report", help="render figures for existing bundles")
    p_report.add_argument("--bundle", action="append", required=True,
                          help="bundle directory (repeat to overlay bundles)")
    p_report.add_argument("--out", help="figure output directory for comparisons")
    p_report.set_defaults(fn=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, GenerationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
