"""LOADng reactive state machine: RREQ flooding, RREP unicast, route expiry, buffering."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import Simulator
from .mac import BROADCAST, KIND_CONTROL, Frame

RREQ = "rreq"
RREP = "rrep"

REVERSE = "reverse"
FORWARD = "forward"


@dataclass
class LoadngConfig:
    route_hold_us: int = 600_000_000  # RHT
    net_traversal_us: int = 10_000_000
    pending_buffer_cap: int = 2
    route_table_cap: int = 32
    expiry_sweep_us: int = 60_000_000
    hop_limit: int = 16
    rreq_bytes: int = 22
    rrep_bytes: int = 22
    # forwarded floods are jittered to desynchronize rebroadcast storms
    forward_jitter_us: int = 500_000


@dataclass(slots=True)
class RouteEntry:
    next_hop: int
    metric: int
    installed_at: int
    hold_us: int
    direction: str

    def valid(self, now: int) -> bool:
        return now - self.installed_at <= self.hold_us


@dataclass(slots=True)
class LoadngMessage:
    kind: str
    originator: int  # node that created the message
    target: int  # node the message must reach
    seq: int
    hop_count: int


class Pending:
    __slots__ = ("packets", "deadline_handle", "started_at")

    def __init__(self, started_at: int):
        self.packets: deque = deque()
        self.deadline_handle = None
        self.started_at = started_at


class LoadngNode:
    """One node's LOADng instance (hop-count metric, destination-only replies)."""

    def __init__(self, sim: Simulator, node_id: int, mac, config: LoadngConfig,
                 metrics, network):
        self.sim = sim
        self.node_id = node_id
        self.mac = mac
        self.config = config
        self.metrics = metrics
        self.network = network
        self.table: dict[int, RouteEntry] = {}
        self.seen: dict[tuple[int, int], int] = {}  # (originator, seq) -> best metric
        self.pending: dict[int, Pending] = {}
        self.seq = 0

    def start(self) -> None:
        self.sim.schedule_in(self.config.expiry_sweep_us, self._sweep,
                             target=self.node_id, kind="route_sweep")

    @property
    def table_size(self) -> int:
        return len(self.table)

    @property
    def joined(self) -> bool:
        return True

    # -- routing table -----------------------------------------------------

    def lookup(self, dst: int) -> RouteEntry | None:
        entry = self.table.get(dst)
        if entry is None:
            return None
        if not entry.valid(self.sim.now):
            del self.table[dst]
            self.metrics.record_table(self.node_id, self.sim.now, len(self.table))
            return None
        return entry

    def _install(self, dst: int, next_hop: int, metric: int, direction: str) -> bool:
        """Install or refresh; keeps an existing valid entry unless strictly better."""
        now = self.sim.now
        cur = self.table.get(dst)
        if cur is not None and cur.valid(now) and cur.metric <= metric:
            return False
        if cur is None and len(self.table) >= self.config.route_table_cap:
            oldest = min(self.table, key=lambda d: (self.table[d].installed_at, d))
            del self.table[oldest]
            self.metrics.count("loadng_table_evictions")
        self.table[dst] = RouteEntry(next_hop, metric, now, self.config.route_hold_us,
                                     direction)
        self.metrics.record_table(self.node_id, now, len(self.table))
        return True

    def expire_routes(self, now: int) -> list[int]:
        removed = [dst for dst, e in self.table.items() if not e.valid(now)]
        for dst in removed:
            del self.table[dst]
        if removed:
            self.metrics.record_table(self.node_id, now, len(self.table))
        return removed

    def _sweep(self) -> None:
        self.expire_routes(self.sim.now)
        self.sim.schedule_in(self.config.expiry_sweep_us, self._sweep,
                             target=self.node_id, kind="route_sweep")

    # -- data path ---------------------------------------------------------

    def send_app_packet(self, packet) -> None:
        entry = self.lookup(packet.dst)
        if entry is not None:
            self._forward(packet, entry.next_hop)
            return
        self._buffer_and_discover(packet)

    def _buffer_and_discover(self, packet) -> None:
        dest = packet.dst
        pending = self.pending.get(dest)
        if pending is None:
            pending = Pending(self.sim.now)
            self.pending[dest] = pending
            pending.packets.append(packet)
            self._flood_rreq(dest)
            pending.deadline_handle = self.sim.schedule_in(
                self.config.net_traversal_us, lambda: self._discovery_timeout(dest),
                target=self.node_id, kind="discovery_timeout")
            return
        pending.packets.append(packet)
        if len(pending.packets) > self.config.pending_buffer_cap:
            oldest = pending.packets.popleft()
            self.metrics.record_packet_drop(self.sim.now, self.node_id, oldest,
                                            "discovery-buffer")

    def _flood_rreq(self, dest: int) -> None:
        self.seq += 1
        self.seen[(self.node_id, self.seq)] = 0
        msg = LoadngMessage(RREQ, self.node_id, dest, self.seq, 0)
        jitter = self.sim.rng(self.node_id, "rreq_jitter").uniform_us(
            0, self.config.forward_jitter_us + 1)
        self.sim.schedule_in(jitter, lambda: self._emit(msg, BROADCAST),
                             target=self.node_id, kind="rreq_originate")

    def _discovery_timeout(self, dest: int) -> None:
        pending = self.pending.pop(dest, None)
        if pending is None:
            return
        for packet in pending.packets:
            self.metrics.record_packet_drop(self.sim.now, self.node_id, packet,
                                            "discovery-timeout")

    def _forward(self, packet, next_hop: int) -> None:
        if packet.hops >= self.config.hop_limit:
            self.metrics.record_packet_drop(self.sim.now, self.node_id, packet, "hop-limit")
            return
        frame = Frame(src=self.node_id, dst=next_hop, kind=packet.frame_kind,
                      payload_bytes=packet.payload_bytes, payload=packet)
        self.mac.send(frame)

    # -- reception ---------------------------------------------------------

    def on_frame(self, frame: Frame, from_id: int) -> None:
        payload = frame.payload
        if isinstance(payload, LoadngMessage):
            if payload.kind == RREQ:
                self._on_rreq(payload, from_id)
            else:
                self._on_rrep(payload, from_id)
        else:
            self._on_data(payload, from_id)

    def _on_data(self, packet, from_id: int) -> None:
        if packet.dst == self.node_id:
            self.network.app_receive(self.node_id, packet)
            return
        entry = self.lookup(packet.dst)
        if entry is None:
            # intermediate nodes never discover on behalf of transit traffic
            self.metrics.record_packet_drop(self.sim.now, self.node_id, packet, "no-route")
            return
        self._forward(packet, entry.next_hop)

    def _on_rreq(self, msg: LoadngMessage, from_id: int) -> None:
        if msg.originator == self.node_id:
            return
        metric = msg.hop_count + 1
        key = (msg.originator, msg.seq)
        best = self.seen.get(key)
        if best is not None and metric >= best:
            # duplicate with no better metric: discarded without updates
            return
        self.seen[key] = metric
        # a processed copy teaches a direct route to its sender plus the
        # multi-hop reverse route toward the flood's originator
        if from_id != msg.originator:
            self._install(from_id, from_id, 1, REVERSE)
        self._install(msg.originator, from_id, metric, REVERSE)
        if msg.target == self.node_id:
            # reply to the first copy and to every strictly better one
            reply = LoadngMessage(RREP, self.node_id, msg.originator, msg.seq, 0)
            entry = self.lookup(msg.originator)
            if entry is not None:
                self._emit(reply, entry.next_hop)
            return
        fwd = LoadngMessage(RREQ, msg.originator, msg.target, msg.seq, metric)
        jitter = self.sim.rng(self.node_id, "rreq_jitter").uniform_us(
            0, self.config.forward_jitter_us + 1)
        self.sim.schedule_in(jitter, lambda: self._emit(fwd, BROADCAST),
                             target=self.node_id, kind="rreq_forward")

    def _on_rrep(self, msg: LoadngMessage, from_id: int) -> None:
        metric = msg.hop_count + 1
        if from_id != msg.originator:
            self._install(from_id, from_id, 1, FORWARD)
        self._install(msg.originator, from_id, metric, FORWARD)
        if msg.target == self.node_id:
            self._complete_discovery(msg.originator)
            return
        entry = self.lookup(msg.target)
        if entry is None:
            self.metrics.count("loadng_rrep_no_reverse")
            return
        fwd = LoadngMessage(RREP, msg.originator, msg.target, msg.seq, metric)
        self._emit(fwd, entry.next_hop)

    def _complete_discovery(self, dest: int) -> None:
        pending = self.pending.pop(dest, None)
        if pending is None:
            return
        if pending.deadline_handle is not None:
            self.sim.cancel(pending.deadline_handle)
        entry = self.lookup(dest)
        for packet in pending.packets:
            if entry is None:
                self.metrics.record_packet_drop(self.sim.now, self.node_id, packet,
                                                "no-route")
            else:
                self._forward(packet, entry.next_hop)

    def _emit(self, msg: LoadngMessage, dst: int) -> None:
        size = self.config.rreq_bytes if msg.kind == RREQ else self.config.rrep_bytes
        self.metrics.record_overhead(self.node_id, msg.kind, size, self.sim.now,
                                     detail=msg.target)
        frame = Frame(src=self.node_id, dst=dst, kind=KIND_CONTROL,
                      payload_bytes=size, payload=msg)
        self.mac.send(frame)
