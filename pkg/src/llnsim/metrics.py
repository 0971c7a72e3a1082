"""Run metrics: delay samples, hop distances, table occupancy, control overhead, drops."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from scipy import stats


@dataclass(slots=True)
class DelaySample:
    packet_id: int
    src: int
    dst: int
    hops: int
    delay_us: int


@dataclass(slots=True)
class OverheadSample:
    node: int
    kind: str
    size_bytes: int
    time_us: int
    detail: int = -1


@dataclass(slots=True)
class TableSample:
    node: int
    time_us: int
    entries: int


@dataclass(slots=True)
class DropRecord:
    time_us: int
    node: int
    packet_id: int  # -1 for routing-control frames
    kind: str
    cause: str


@dataclass(slots=True)
class GeneratedRecord:
    packet_id: int
    src: int
    dst: int
    kind: str
    created_at: int


class Collector:
    """Accumulates one run's raw samples; every application packet has exactly one fate."""

    def __init__(self) -> None:
        self.delays: list[DelaySample] = []
        self.overhead: list[OverheadSample] = []
        self.tables: list[TableSample] = []
        self.drops: list[DropRecord] = []
        self.generated: list[GeneratedRecord] = []
        self.counters: Counter = Counter()
        self.fates: dict[int, str] = {}
        self.duplicate_deliveries = 0
        self.unidirectional_max = 0

    # -- application packets -------------------------------------------------

    def record_generated(self, packet) -> None:
        self.generated.append(GeneratedRecord(packet.packet_id, packet.src, packet.dst,
                                              packet.kind, packet.created_at))
        self.fates[packet.packet_id] = "pending"

    def record_delivery(self, packet, now: int) -> bool:
        """True if this was the first delivery of the packet."""
        if self.fates.get(packet.packet_id) != "pending":
            self.duplicate_deliveries += 1
            return False
        self.fates[packet.packet_id] = "delivered"
        self.delays.append(DelaySample(packet.packet_id, packet.src, packet.dst,
                                       packet.hops, now - packet.created_at))
        return True

    def record_packet_drop(self, now: int, node: int, packet, cause: str) -> None:
        if self.fates.get(packet.packet_id) != "pending":
            return
        self.fates[packet.packet_id] = f"dropped:{cause}"
        self.drops.append(DropRecord(now, node, packet.packet_id, packet.kind, cause))

    def record_drop(self, now: int, node: int, frame, cause: str) -> None:
        """MAC/radio-level drop; resolves the packet fate for data frames."""
        if frame.kind == "control":
            self.drops.append(DropRecord(now, node, -1, "routing-control", cause))
        else:
            self.record_packet_drop(now, node, frame.payload, cause)

    # -- protocol bookkeeping --------------------------------------------------

    def record_overhead(self, node: int, kind: str, size_bytes: int, now: int,
                        detail: int = -1) -> None:
        self.overhead.append(OverheadSample(node, kind, size_bytes, now, detail))

    def record_table(self, node: int, now: int, entries: int) -> None:
        self.tables.append(TableSample(node, now, entries))

    def record_unidirectional(self, count: int) -> None:
        if count > self.unidirectional_max:
            self.unidirectional_max = count

    def count(self, key: str, n: int = 1) -> None:
        self.counters[key] += n

    # -- conservation ----------------------------------------------------------

    def conservation(self) -> dict:
        """Exact fate accounting: generated = delivered + drops by cause + in flight."""
        delivered = 0
        in_flight = 0
        drop_causes: Counter = Counter()
        for fate in self.fates.values():
            if fate == "delivered":
                delivered += 1
            elif fate == "pending":
                in_flight += 1
            else:
                drop_causes[fate.split(":", 1)[1]] += 1
        total = delivered + in_flight + sum(drop_causes.values())
        return {
            "generated": len(self.generated),
            "delivered": delivered,
            "dropped": dict(sorted(drop_causes.items())),
            "in_flight": in_flight,
            "exact": total == len(self.generated) and len(self.fates) == len(self.generated),
        }

    def total_overhead_bytes(self) -> int:
        return sum(s.size_bytes for s in self.overhead)


def empirical_cdf(samples: list[float], thresholds: list[float]) -> list[float]:
    """Fraction of samples <= t for each threshold; exact, no smoothing."""
    if not samples:
        raise ValueError("empty sample set")
    ordered = sorted(samples)
    n = len(ordered)
    out = []
    idx = 0
    for t in sorted(thresholds):
        while idx < n and ordered[idx] <= t:
            idx += 1
        out.append(idx / n)
    # restore caller threshold order
    by_threshold = dict(zip(sorted(thresholds), out))
    return [by_threshold[t] for t in thresholds]


def path_and_packet_hops(delays: list[DelaySample]) -> tuple[dict[tuple[int, int], float], list[int]]:
    """Per-pair mean hop counts (path distance) and per-packet hop counts."""
    pair_hops: dict[tuple[int, int], list[int]] = {}
    packet_hops = []
    for s in delays:
        pair_hops.setdefault((s.src, s.dst), []).append(s.hops)
        packet_hops.append(s.hops)
    path = {pair: sum(h) / len(h) for pair, h in pair_hops.items()}
    return path, packet_hops


def time_weighted_mean(samples: list[tuple[int, int]], start: int, end: int) -> float:
    """Mean of a right-continuous step function over [start, end]; 0 before first sample."""
    if end <= start:
        return 0.0
    total = 0.0
    level = 0.0
    t_prev = start
    for t, value in samples:
        t = min(max(t, start), end)
        total += level * (t - t_prev)
        t_prev = t
        level = value
    total += level * (end - t_prev)
    return total / (end - start)


def mean_table_entries(tables: list[TableSample], nodes: list[int], horizon_us: int) -> float:
    """Time-weighted mean entries per node, then averaged across nodes."""
    per_node: dict[int, list[tuple[int, int]]] = {n: [] for n in nodes}
    for s in tables:
        if s.node in per_node:
            per_node[s.node].append((s.time_us, s.entries))
    means = [time_weighted_mean(series, 0, horizon_us) for series in per_node.values()]
    return sum(means) / len(means) if means else 0.0


def per_node_mean_entries(tables: list[TableSample], nodes: list[int],
                          horizon_us: int) -> dict[int, float]:
    per_node: dict[int, list[tuple[int, int]]] = {n: [] for n in nodes}
    for s in tables:
        if s.node in per_node:
            per_node[s.node].append((s.time_us, s.entries))
    return {n: time_weighted_mean(series, 0, horizon_us)
            for n, series in per_node.items()}


def t_confidence(values: list[float], level: float = 0.95) -> tuple[float, float | None]:
    """Sample mean and Student-t half width; half width is None for a single run."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    half = stats.t.ppf(0.5 + level / 2, n - 1) * math.sqrt(var / n)
    return mean, half


@dataclass
class RunAggregate:
    """Cross-run aggregate: t-intervals for scalars, pooled samples for CDFs."""

    runs: int
    scalars: dict[str, dict] = field(default_factory=dict)
    pooled_delays: list[DelaySample] = field(default_factory=list)


def aggregate_runs(scalar_series: dict[str, list[float]],
                   delay_runs: list[list[DelaySample]]) -> RunAggregate:
    """Means + 95 % CI per scalar; delay samples pooled (not averaged) across runs."""
    lengths = {len(v) for v in scalar_series.values()}
    if len(lengths) > 1:
        raise ValueError(f"mismatched run counts across scalars: {sorted(lengths)}")
    runs = lengths.pop() if lengths else len(delay_runs)
    agg = RunAggregate(runs=runs)
    for name, values in scalar_series.items():
        mean, half = t_confidence(values)
        agg.scalars[name] = {"mean": mean, "ci95": half, "values": list(values)}
    for samples in delay_runs:
        agg.pooled_delays.extend(samples)
    return agg
