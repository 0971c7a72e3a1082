"""Experiment configuration, result bundles (CSV + JSON), and parameter sweeps."""

from __future__ import annotations

import csv
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .loadng import LoadngConfig
from .mac import MacConfig
from .metrics import (
    empirical_cdf,
    mean_table_entries,
    path_and_packet_hops,
    per_node_mean_entries,
    t_confidence,
)
from .rpl import RplConfig
from .scenario import FloorPlan, Topology, TrafficConfig, generate_topology
from .simulation import PROTOCOL_LOADNG, PROTOCOL_RPL, RunConfig, RunResult, run_simulation

DEFAULT_SEEDS = (1, 2, 3, 4, 5)

# summary CDFs are sampled on a 0.1 s grid up to 5 s, plus the exact maximum
CDF_GRID_S = [round(0.1 * i, 1) for i in range(1, 51)]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    protocol: str = PROTOCOL_RPL
    nodes: int = 25
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    sim_hours: float = 8.0
    rht_seconds: int = 600
    dio_min_seconds: float = 4.0
    dio_max_seconds: float = 1048.0
    trickle_k: int = 2
    range_m: float = 5.0
    loss_factor: float = 0.0
    queue_limit: int = 2
    max_attempts: int = 8
    wake_interval_ms: float = 125.0
    scenario_file: str | None = None
    out_dir: str = "results"
    plots: bool = False

    def validate(self) -> None:
        if self.protocol not in (PROTOCOL_RPL, PROTOCOL_LOADNG):
            raise ConfigError(f"protocol must be rpl or loadng, got {self.protocol!r}")
        positives = {
            "nodes": self.nodes, "sim_hours": self.sim_hours,
            "rht_seconds": self.rht_seconds, "dio_min_seconds": self.dio_min_seconds,
            "dio_max_seconds": self.dio_max_seconds, "trickle_k": self.trickle_k,
            "range_m": self.range_m, "queue_limit": self.queue_limit,
            "max_attempts": self.max_attempts, "wake_interval_ms": self.wake_interval_ms,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 <= self.loss_factor <= 1.0:
            raise ConfigError(f"loss_factor must be in [0, 1], got {self.loss_factor}")
        if self.dio_min_seconds > self.dio_max_seconds:
            raise ConfigError("dio_min_seconds must not exceed dio_max_seconds")

    def to_dict(self) -> dict:
        data = {
            "protocol": self.protocol, "nodes": self.nodes, "seeds": list(self.seeds),
            "sim_hours": self.sim_hours, "rht_seconds": self.rht_seconds,
            "dio_min_seconds": self.dio_min_seconds, "dio_max_seconds": self.dio_max_seconds,
            "trickle_k": self.trickle_k, "range_m": self.range_m,
            "loss_factor": self.loss_factor, "queue_limit": self.queue_limit,
            "max_attempts": self.max_attempts, "wake_interval_ms": self.wake_interval_ms,
            "scenario_file": self.scenario_file, "out_dir": self.out_dir,
            "plots": self.plots,
        }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(kwargs["seeds"])
        return cls(**kwargs)

    def run_config(self, topology: Topology, seed: int) -> RunConfig:
        return RunConfig(
            protocol=self.protocol,
            topology=topology,
            seed=seed,
            horizon_us=int(self.sim_hours * 3_600_000_000),
            range_m=self.range_m,
            loss_factor=self.loss_factor,
            mac=MacConfig(queue_limit=self.queue_limit, max_attempts=self.max_attempts,
                          wake_interval_us=int(self.wake_interval_ms * 1000),
                          backoff_unit_us=int(self.wake_interval_ms * 1000)),
            rpl=RplConfig(dio_min_us=int(self.dio_min_seconds * 1_000_000),
                          dio_max_us=int(self.dio_max_seconds * 1_000_000),
                          redundancy_k=self.trickle_k),
            loadng=LoadngConfig(route_hold_us=self.rht_seconds * 1_000_000),
            traffic=TrafficConfig(),
        )


@dataclass
class ResultBundle:
    out_dir: Path
    summary: dict
    results: dict[int, RunResult] = field(default_factory=dict)


def _topology_for(config: ExperimentConfig, seed: int) -> Topology:
    if config.scenario_file:
        return Topology.from_json(Path(config.scenario_file).read_text())
    return generate_topology(config.nodes, seed, FloorPlan.default(), config.range_m)


def run_experiment(config: ExperimentConfig) -> ResultBundle:
    """Execute every seed, then write the bundle; nothing is written on failure."""
    config.validate()
    results: dict[int, RunResult] = {}
    for seed in config.seeds:
        topology = _topology_for(config, seed)
        results[seed] = run_simulation(config.run_config(topology, seed))
    summary = build_summary(config, results)
    out_dir = Path(config.out_dir)
    _write_bundle(out_dir, config, results, summary)
    if config.plots:
        from . import report

        report.render_run_figures(out_dir)
    return ResultBundle(out_dir=out_dir, summary=summary, results=results)


# -- summary ------------------------------------------------------------------


def _cdf_points(samples_s: list[float]) -> dict:
    fractions = empirical_cdf(samples_s, CDF_GRID_S)
    return {
        "thresholds_s": CDF_GRID_S,
        "fractions": fractions,
        "max_s": max(samples_s),
        "samples": len(samples_s),
    }


def _hop_cdf(samples: list[float], grid: list[float]) -> dict:
    fractions = empirical_cdf(samples, grid)
    return {"thresholds": grid, "fractions": fractions, "max": max(samples)}


def build_summary(config: ExperimentConfig, results: dict[int, RunResult]) -> dict:
    horizon_us = int(config.sim_hours * 3_600_000_000)
    node_ids = sorted(next(iter(results.values())).topology.positions)
    runs = {}
    series: dict[str, list[float]] = {
        "mean_table_entries": [], "total_overhead_bytes": [], "delivery_ratio": [],
    }
    leaf_medians: list[float] = []
    pooled_delays = []
    for seed, res in sorted(results.items()):
        col = res.collector
        cons = col.conservation()
        mean_entries = mean_table_entries(col.tables, node_ids, horizon_us)
        total_bytes = col.total_overhead_bytes()
        half = horizon_us // 2
        first_half = sum(s.size_bytes for s in col.overhead if s.time_us < half)
        ratio = cons["delivered"] / cons["generated"] if cons["generated"] else 0.0
        run_entry = {
            "events": res.events_processed,
            "generated": cons["generated"],
            "delivered": cons["delivered"],
            "dropped": cons["dropped"],
            "in_flight": cons["in_flight"],
            "conservation_exact": cons["exact"],
            "duplicate_deliveries": col.duplicate_deliveries,
            "mean_table_entries": mean_entries,
            "total_overhead_bytes": total_bytes,
            "overhead_bytes_first_half": first_half,
            "overhead_bytes_second_half": total_bytes - first_half,
            "max_unidirectional_pairs": col.unidirectional_max,
            "counters": dict(sorted(col.counters.items())),
        }
        if res.final_depths is not None:
            run_entry["hop_depths"] = {str(n): d for n, d in res.final_depths.items()}
            leaf_median = _leaf_median_entries(res, node_ids, horizon_us)
            run_entry["leaf_median_entries"] = leaf_median
            leaf_medians.append(leaf_median)
        runs[str(seed)] = run_entry
        series["mean_table_entries"].append(mean_entries)
        series["total_overhead_bytes"].append(float(total_bytes))
        series["delivery_ratio"].append(ratio)
        pooled_delays.extend(col.delays)

    aggregate: dict = {}
    for name, values in series.items():
        mean, ci = t_confidence(values)
        aggregate[name] = {"mean": mean, "ci95": ci, "values": values}
    if leaf_medians:
        mean, ci = t_confidence(leaf_medians)
        aggregate["leaf_median_entries"] = {"mean": mean, "ci95": ci, "values": leaf_medians}

    if pooled_delays:
        delay_cdfs = {"all": _cdf_points([s.delay_us / 1e6 for s in pooled_delays])}
        for hops in (1, 2, 3, 4):
            bucket = [s.delay_us / 1e6 for s in pooled_delays if s.hops == hops]
            if bucket:
                delay_cdfs[str(hops)] = _cdf_points(bucket)
        aggregate["delay_cdf"] = delay_cdfs
        path, packet_hops = path_and_packet_hops(pooled_delays)
        hop_grid = [0.5 * i for i in range(2, 21)]
        aggregate["packet_hop_cdf"] = _hop_cdf([float(h) for h in packet_hops], hop_grid)
        aggregate["path_hop_cdf"] = _hop_cdf(list(path.values()), hop_grid)

    return {
        "tool": "llnsim",
        "version": __version__,
        "config": config.to_dict(),
        "runs": runs,
        "aggregate": aggregate,
    }


def _leaf_median_entries(res: RunResult, node_ids: list[int], horizon_us: int) -> float:
    parents = set((res.final_parents or {}).values())
    leaves = [n for n in node_ids if n not in parents and n != res.topology.sink]
    if not leaves:
        return 0.0
    means = per_node_mean_entries(res.collector.tables, leaves, horizon_us)
    ordered = sorted(means.values())
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


# -- bundle files ---------------------------------------------------------------


def _write_bundle(out_dir: Path, config: ExperimentConfig,
                  results: dict[int, RunResult], summary: dict) -> None:
    tmp = out_dir.parent / (out_dir.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    (tmp / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    (tmp / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for seed, res in sorted(results.items()):
        run_dir = tmp / f"run-{seed}"
        run_dir.mkdir()
        _write_run_csvs(run_dir, res)
        (run_dir / "topology.json").write_text(res.topology.to_json() + "\n")
    if out_dir.exists():
        shutil.rmtree(out_dir)
    tmp.rename(out_dir)


def _write_run_csvs(run_dir: Path, res: RunResult) -> None:
    col = res.collector
    with open(run_dir / "delays.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["packet_id", "src", "dst", "hops", "delay_us"])
        for s in col.delays:
            w.writerow([s.packet_id, s.src, s.dst, s.hops, s.delay_us])
    path, _ = path_and_packet_hops(col.delays)
    with open(run_dir / "hops.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "packets", "path_hops"])
        pair_counts: dict[tuple[int, int], int] = {}
        for s in col.delays:
            pair_counts[(s.src, s.dst)] = pair_counts.get((s.src, s.dst), 0) + 1
        for (src, dst) in sorted(path):
            w.writerow([src, dst, pair_counts[(src, dst)], f"{path[(src, dst)]:.6f}"])
    with open(run_dir / "tables.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "time_s", "entries"])
        for s in col.tables:
            w.writerow([s.node, f"{s.time_us / 1e6:.6f}", s.entries])
    with open(run_dir / "overhead.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "kind", "bytes", "time_s"])
        for s in col.overhead:
            w.writerow([s.node, s.kind, s.size_bytes, f"{s.time_us / 1e6:.6f}"])
    with open(run_dir / "drops.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "node", "packet_id", "kind", "cause"])
        for d in col.drops:
            pid = "" if d.packet_id < 0 else d.packet_id
            w.writerow([f"{d.time_us / 1e6:.6f}", d.node, pid, d.kind, d.cause])


# -- sweeps ---------------------------------------------------------------------

SWEEP_AXES = ("nodes", "rht")


def sweep(base: ExperimentConfig, axis: str, values: list[int]) -> dict:
    """One bundle per axis value plus a cross-point sweep.csv."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    base.validate()
    root = Path(base.out_dir)
    rows = []
    bundles = {}
    for value in values:
        point = ExperimentConfig.from_dict(base.to_dict())
        if axis == "nodes":
            point.nodes = value
        else:
            point.rht_seconds = value
        point.out_dir = str(root / f"{axis}-{value}")
        try:
            bundle = run_experiment(point)
        except Exception as exc:
            raise RuntimeError(f"sweep point {axis}={value} failed: {exc}") from exc
        bundles[value] = bundle
        agg = bundle.summary["aggregate"]
        rows.append({
            "axis": axis,
            "value": value,
            "protocol": point.protocol,
            "mean_entries": agg["mean_table_entries"]["mean"],
            "entries_ci95": agg["mean_table_entries"]["ci95"],
            "total_overhead_bytes": agg["total_overhead_bytes"]["mean"],
            "overhead_ci95": agg["total_overhead_bytes"]["ci95"],
        })
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "protocol", "mean_entries", "entries_ci95",
                    "total_overhead_bytes", "overhead_ci95"])
        for row in rows:
            ci_e = "" if row["entries_ci95"] is None else f"{row['entries_ci95']:.6f}"
            ci_o = "" if row["overhead_ci95"] is None else f"{row['overhead_ci95']:.6f}"
            w.writerow([row["axis"], row["value"], row["protocol"],
                        f"{row['mean_entries']:.6f}", ci_e,
                        f"{row['total_overhead_bytes']:.6f}", ci_o])
    return {"rows": rows, "bundles": bundles, "csv": root / "sweep.csv"}
