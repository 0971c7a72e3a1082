"""Wires the engine, radio, MAC, routing protocol, traffic, and metrics into one run."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import DEFAULT_HORIZON_US, Simulator
from .loadng import LoadngConfig, LoadngNode
from .mac import BROADCAST, CsmaMac, Frame, KIND_CONTROL, MacConfig
from .metrics import Collector
from .radio import Medium, Transmission
from .rpl import RplConfig, RplNode
from .scenario import Topology, TrafficConfig, TrafficDriver

PROTOCOL_RPL = "rpl"
PROTOCOL_LOADNG = "loadng"


@dataclass
class RunConfig:
    protocol: str
    topology: Topology
    seed: int
    horizon_us: int = DEFAULT_HORIZON_US
    range_m: float = 5.0
    loss_factor: float = 0.0
    mac: MacConfig = field(default_factory=MacConfig)
    rpl: RplConfig = field(default_factory=RplConfig)
    loadng: LoadngConfig = field(default_factory=LoadngConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    boot_spread_us: int = 1_000_000
    sample_period_us: int = 60_000_000
    trace: bool = False


@dataclass
class RunResult:
    topology: Topology
    collector: Collector
    events_processed: int
    end_time_us: int
    final_depths: dict[int, int | None] | None
    final_parents: dict[int, int | None] | None
    trace: list[str] | None


class Network:
    """Per-run composition of all layers; owns the node instances."""

    def __init__(self, cfg: RunConfig):
        if cfg.protocol not in (PROTOCOL_RPL, PROTOCOL_LOADNG):
            raise ValueError(f"unknown protocol {cfg.protocol!r}")
        self.cfg = cfg
        self.sim = Simulator(cfg.seed, cfg.horizon_us, trace=cfg.trace)
        self.collector = Collector()
        self.medium = Medium(self.sim, cfg.topology.positions, cfg.range_m, cfg.loss_factor)
        self.medium.on_deliver = self._deliver
        self.medium.on_tx_end = self._tx_end
        self.macs: dict[int, CsmaMac] = {}
        self.nodes: dict[int, object] = {}
        sink = cfg.topology.sink
        for node_id in sorted(cfg.topology.positions):
            mac = CsmaMac(self.sim, self.medium, node_id, cfg.mac, self.collector)
            self.macs[node_id] = mac
            if cfg.protocol == PROTOCOL_RPL:
                proto = RplNode(self.sim, node_id, mac, cfg.rpl, self.collector, self,
                                is_root=node_id == sink)
            else:
                proto = LoadngNode(self.sim, node_id, mac, cfg.loadng, self.collector, self)
            self.nodes[node_id] = proto
        self.traffic = TrafficDriver(self.sim, cfg.topology, self, cfg.traffic)

    # -- radio completion ----------------------------------------------------

    def _deliver(self, receiver: int, frame: Frame, sender: int, delivered: bool) -> None:
        if not delivered:
            return
        if frame.kind != KIND_CONTROL:
            frame.payload.hops += 1
        self.nodes[receiver].on_frame(frame, sender)

    def _tx_end(self, tx: Transmission, reached_dst: bool | None) -> None:
        self.macs[tx.sender].on_tx_done(reached_dst)

    # -- application hooks -----------------------------------------------------

    def app_send(self, src: int, packet) -> None:
        self.collector.record_generated(packet)
        self.nodes[src].send_app_packet(packet)

    def app_receive(self, node: int, packet) -> None:
        if self.collector.record_delivery(packet, self.sim.now):
            self.traffic.on_app_receive(node, packet)

    # -- periodic sampling -------------------------------------------------------

    def _sample_tables(self) -> None:
        now = self.sim.now
        for node_id in sorted(self.nodes):
            self.collector.record_table(node_id, now, self.nodes[node_id].table_size)
        if self.cfg.protocol == PROTOCOL_LOADNG:
            self.collector.record_unidirectional(self._unidirectional_pairs(now))
        self.sim.schedule_in(self.cfg.sample_period_us, self._sample_tables,
                             kind="table_sample")

    def _unidirectional_pairs(self, now: int) -> int:
        valid: dict[int, set[int]] = {}
        for node_id in sorted(self.nodes):
            table = self.nodes[node_id].table
            valid[node_id] = {dst for dst, e in table.items() if e.valid(now)}
        count = 0
        for a, dests in valid.items():
            for b in dests:
                if b in valid and a not in valid[b]:
                    count += 1
        return count

    # -- run -----------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        boots = {}
        for node_id in sorted(self.nodes):
            boot = self.sim.rng(node_id, "boot").uniform_us(0, cfg.boot_spread_us)
            boots[node_id] = boot
            self.sim.schedule(boot, self.nodes[node_id].start, target=node_id, kind="boot")
        self.traffic.start(boots)
        self.sim.schedule(cfg.sample_period_us, self._sample_tables, kind="table_sample")
        summary = self.sim.run_until(cfg.horizon_us)
        depths = parents = None
        if cfg.protocol == PROTOCOL_RPL:
            depths = {n: self.nodes[n].hop_depth for n in sorted(self.nodes)}
            parents = {n: self.nodes[n].parent for n in sorted(self.nodes)}
        return RunResult(topology=cfg.topology, collector=self.collector,
                         events_processed=summary.events_processed,
                         end_time_us=summary.end_time_us,
                         final_depths=depths, final_parents=parents,
                         trace=self.sim.trace)


def run_simulation(cfg: RunConfig) -> RunResult:
    return Network(cfg).run()
