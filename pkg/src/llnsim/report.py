"""Render result-bundle figures (delay CDFs, hop CDFs, table occupancy, overhead) to PNG."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _load_summary(bundle_dir: Path) -> dict:
    return json.loads((bundle_dir / "summary.json").read_text())


def render_run_figures(bundle_dir: Path | str, out_dir: Path | str | None = None) -> list[Path]:
    """Figures for a single bundle, written next to its CSVs (figures/)."""
    bundle_dir = Path(bundle_dir)
    out = Path(out_dir) if out_dir else bundle_dir / "figures"
    out.mkdir(parents=True, exist_ok=True)
    summary = _load_summary(bundle_dir)
    label = _bundle_label(summary)
    written = []

    agg = summary["aggregate"]
    if "delay_cdf" in agg:
        fig, ax = plt.subplots(figsize=(6, 4))
        for hops in ("1", "2", "3", "4"):
            if hops in agg["delay_cdf"]:
                cdf = agg["delay_cdf"][hops]
                ax.plot(cdf["thresholds_s"], cdf["fractions"], label=f"{hops} hop")
        ax.set_xlabel("delay (s)")
        ax.set_ylabel("fraction of packets")
        ax.set_title(f"Packet delay CDF — {label}")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend()
        written.append(_save(fig, out / "delay_cdf.png"))

    if "packet_hop_cdf" in agg:
        fig, ax = plt.subplots(figsize=(6, 4))
        for key, name in (("path_hop_cdf", "path"), ("packet_hop_cdf", "packet")):
            cdf = agg[key]
            ax.plot(cdf["thresholds"], cdf["fractions"], label=f"{name} hop distance")
        ax.set_xlabel("hops")
        ax.set_ylabel("fraction")
        ax.set_title(f"Hop distance CDFs — {label}")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend()
        written.append(_save(fig, out / "hop_cdf.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for run_dir in sorted(bundle_dir.glob("run-*")):
        times, means = _table_timeline(run_dir / "tables.csv")
        ax.plot(times, means, label=run_dir.name)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("mean routing-table entries")
    ax.set_title(f"Routing-table occupancy — {label}")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    written.append(_save(fig, out / "table_occupancy.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    for run_dir in sorted(bundle_dir.glob("run-*")):
        times, cumulative = _overhead_timeline(run_dir / "overhead.csv")
        ax.plot(times, cumulative, label=run_dir.name)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("cumulative control bytes")
    ax.set_title(f"Control overhead — {label}")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    written.append(_save(fig, out / "overhead.png"))
    return written


def render_comparison_figures(bundle_dirs: list[Path | str],
                              out_dir: Path | str) -> list[Path]:
    """Overlay delay and hop CDFs of several bundles (e.g. rpl vs loadng RHTs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = [(_load_summary(Path(b)), Path(b)) for b in bundle_dirs]
    written = []

    for hops in ("1", "2", "3"):
        fig, ax = plt.subplots(figsize=(6, 4))
        plotted = False
        for summary, _ in summaries:
            cdf = summary["aggregate"].get("delay_cdf", {}).get(hops)
            if cdf:
                ax.plot(cdf["thresholds_s"], cdf["fractions"], label=_bundle_label(summary))
                plotted = True
        if not plotted:
            plt.close(fig)
            continue
        ax.axvline(0.5, color="gray", linestyle=":", linewidth=1)
        ax.set_xlabel("delay (s)")
        ax.set_ylabel("fraction of packets")
        ax.set_title(f"{hops}-hop delay CDF")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        written.append(_save(fig, out / f"delay_cdf_{hops}hop.png"))

    for key, name in (("path_hop_cdf", "path"), ("packet_hop_cdf", "packet")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for summary, _ in summaries:
            cdf = summary["aggregate"].get(key)
            if cdf:
                ax.plot(cdf["thresholds"], cdf["fractions"], label=_bundle_label(summary))
        ax.set_xlabel("hops")
        ax.set_ylabel("fraction")
        ax.set_title(f"CDF of {name} hop distances")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        written.append(_save(fig, out / f"{name}_hop_cdf.png"))
    return written


def render_sweep_figures(sweep_dir: Path | str) -> list[Path]:
    """Entries and overhead versus the sweep axis, with CI error bars."""
    sweep_dir = Path(sweep_dir)
    out = sweep_dir / "figures"
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with open(sweep_dir / "sweep.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    if not rows:
        return []
    axis = rows[0]["axis"]
    values = [int(r["value"]) for r in rows]
    written = []
    for column, err_col, ylabel, fname in (
            ("mean_entries", "entries_ci95", "mean routing-table entries", "entries_vs_axis.png"),
            ("total_overhead_bytes", "overhead_ci95", "control overhead (bytes)", "overhead_vs_axis.png")):
        fig, ax = plt.subplots(figsize=(6, 4))
        means = [float(r[column]) for r in rows]
        errs = [float(r[err_col]) if r[err_col] else 0.0 for r in rows]
        ax.errorbar(values, means, yerr=errs, marker="o", capsize=3)
        ax.set_xlabel(axis)
        ax.set_ylabel(ylabel)
        ax.set_title(f"{ylabel} vs {axis} ({rows[0]['protocol']})")
        ax.grid(alpha=0.3)
        written.append(_save(fig, out / fname))
    return written


def _bundle_label(summary: dict) -> str:
    cfg = summary["config"]
    if cfg["protocol"] == "loadng":
        return f"loadng rht={cfg['rht_seconds']}s"
    return "rpl"


def _table_timeline(tables_csv: Path) -> tuple[list[float], list[float]]:
    """Per-minute mean entries across nodes (last sample per node wins)."""
    latest: dict[int, int] = {}
    buckets: dict[int, float] = {}
    with open(tables_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["time_s"])
            latest[int(row["node"])] = int(row["entries"])
            minute = int(t // 60)
            buckets[minute] = sum(latest.values()) / max(len(latest), 1)
    times = sorted(buckets)
    return [t / 60.0 for t in times], [buckets[t] for t in times]


def _overhead_timeline(overhead_csv: Path) -> tuple[list[float], list[float]]:
    times = [0.0]
    totals = [0.0]
    with open(overhead_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["time_s"]) / 3600.0)
            totals.append(totals[-1] + int(row["bytes"]))
    return times, totals


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
