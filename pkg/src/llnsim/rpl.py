"""RPL storing-mode state machine: DODAG ranks, Trickle-timed DIOs, DAO downward routes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import Simulator
from .mac import BROADCAST, KIND_CONTROL, Frame

DIO = "dio"
DIS = "dis"
DAO = "dao"


@dataclass
class RplConfig:
    dio_min_us: int = 4_000_000
    dio_max_us: int = 1_048_000_000
    redundancy_k: int = 2
    min_hop_rank_increase: int = 256
    neighbor_table_cap: int = 8
    downward_table_cap: int = 20
    dis_start_us: int = 2_000_000
    dis_period_us: int = 60_000_000
    # one unconditional solicitation round: the unicast DIO responses give
    # every node its neighbors' settled ranks without waiting on Trickle luck
    dis_refresh_us: int = 62_000_000
    hop_limit: int = 16
    dio_bytes: int = 76
    dis_bytes: int = 6
    dao_bytes: int = 20


@dataclass(slots=True)
class RplMessage:
    kind: str
    sender: int
    rank: int = 0
    prefix: int = -1


def next_interval_us(current_us: int, max_us: int) -> int:
    """Trickle doubling law: the interval doubles, capped at the maximum."""
    return min(2 * current_us, max_us)


class Trickle:
    """Adaptive emission timer: doubles while consistent, resets on inconsistency.

    Each interval I picks a fire point t uniform in [I/2, I); the payload is
    emitted at t only when fewer than k consistent messages were heard during
    the interval.
    """

    def __init__(self, sim: Simulator, node_id: int, i_min_us: int, i_max_us: int,
                 k: int, on_fire):
        self.sim = sim
        self.node_id = node_id
        self.i_min_us = i_min_us
        self.i_max_us = i_max_us
        self.k = k
        self.on_fire = on_fire
        self.i_us = i_min_us
        self.c = 0
        self.running = False
        self._rng = sim.rng(node_id, "trickle")
        self._fire_handle = None
        self._end_handle = None

    def start(self) -> None:
        if self.running:
            return
        self.running = True
        self.i_us = self.i_min_us
        self._begin_interval()

    def _begin_interval(self) -> None:
        self.c = 0
        t = self._rng.uniform_us(self.i_us // 2, self.i_us)
        self._fire_handle = self.sim.schedule_in(t, self._fire, target=self.node_id,
                                                 kind="trickle_fire")
        self._end_handle = self.sim.schedule_in(self.i_us, self._interval_end,
                                                target=self.node_id, kind="trickle_end")

    def _fire(self) -> None:
        self._fire_handle = None
        if self.c < self.k:
            self.on_fire()

    def _interval_end(self) -> None:
        self._end_handle = None
        self.i_us = next_interval_us(self.i_us, self.i_max_us)
        self._begin_interval()

    def hear_consistent(self) -> None:
        self.c += 1

    def reset(self) -> None:
        """Inconsistency: restart at the minimum interval (no-op if already there)."""
        if not self.running:
            self.start()
            return
        if self.i_us == self.i_min_us and self._fire_handle is not None:
            return
        if self._fire_handle is not None:
            self.sim.cancel(self._fire_handle)
        if self._end_handle is not None:
            self.sim.cancel(self._end_handle)
        self.i_us = self.i_min_us
        self._begin_interval()


class RplNode:
    """One node's RPL instance (storing mode, hop-count objective)."""

    def __init__(self, sim: Simulator, node_id: int, mac, config: RplConfig,
                 metrics, network, is_root: bool = False):
        self.sim = sim
        self.node_id = node_id
        self.mac = mac
        self.config = config
        self.metrics = metrics
        self.network = network
        self.is_root = is_root
        self.rank = config.min_hop_rank_increase if is_root else None
        self.parent: int | None = None
        self.candidates: dict[int, int] = {}  # neighbor -> advertised rank
        self.downward: dict[int, int] = {}  # destination -> next hop (child side)
        self.dao_seq = 0
        self.malformed = 0
        self.trickle = Trickle(sim, node_id, config.dio_min_us, config.dio_max_us,
                               config.redundancy_k, lambda: self._emit_dio(BROADCAST))
        # downward-route advertisement timer: doubles like the DIO timer but
        # is never capped, so refreshes fade out in a quiescent network
        self._dao_interval_us = config.dio_min_us
        self._dao_handle = None
        self._dis_handle = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self.is_root:
            self.trickle.start()
        else:
            self._dis_handle = self.sim.schedule_in(self.config.dis_start_us, self._dis_tick,
                                                    target=self.node_id, kind="rpl_dis")
            self.sim.schedule_in(self.config.dis_refresh_us, self._dis_refresh,
                                 target=self.node_id, kind="rpl_dis_refresh")

    @property
    def joined(self) -> bool:
        return self.rank is not None

    @property
    def hop_depth(self) -> int | None:
        if self.rank is None:
            return None
        return self.rank // self.config.min_hop_rank_increase - 1

    @property
    def table_size(self) -> int:
        default = 1 if self.parent is not None else 0
        return default + len(self.downward)

    # -- emission ----------------------------------------------------------

    def _emit_dio(self, dst: int) -> None:
        msg = RplMessage(DIO, self.node_id, rank=self.rank)
        self._emit(msg, dst, self.config.dio_bytes)

    def _emit_dao(self) -> None:
        if self.parent is None:
            return
        self.dao_seq += 1
        msg = RplMessage(DAO, self.node_id, prefix=self.node_id)
        self._emit(msg, self.parent, self.config.dao_bytes)

    def _dao_timer_fire(self) -> None:
        self._emit_dao()
        self._dao_interval_us *= 2
        if self._dao_interval_us > self.config.dio_max_us:
            # routes have unbounded lifetime here, so once refreshes are
            # sparser than the DIO cap they stop adding information
            self._dao_handle = None
            return
        self._dao_handle = self.sim.schedule_in(self._dao_interval_us, self._dao_timer_fire,
                                                target=self.node_id, kind="rpl_dao")

    def _restart_dao_timer(self) -> None:
        """Parent changed: advertise now and restart the doubling refresh timer."""
        if self._dao_handle is not None:
            self.sim.cancel(self._dao_handle)
        self._emit_dao()
        # a storing node re-advertises its stored prefixes so descendants
        # stay reachable through the new parent chain
        for prefix in self.downward:
            self._emit(RplMessage(DAO, self.node_id, prefix=prefix), self.parent,
                       self.config.dao_bytes)
        self._dao_interval_us = self.config.dio_min_us
        self._dao_handle = self.sim.schedule_in(self._dao_interval_us, self._dao_timer_fire,
                                                target=self.node_id, kind="rpl_dao")

    def _dis_tick(self) -> None:
        self._dis_handle = None
        if self.joined:
            return
        self._emit(RplMessage(DIS, self.node_id), BROADCAST, self.config.dis_bytes)
        self._dis_handle = self.sim.schedule_in(self.config.dis_period_us, self._dis_tick,
                                                target=self.node_id, kind="rpl_dis")

    def _dis_refresh(self) -> None:
        self._emit(RplMessage(DIS, self.node_id), BROADCAST, self.config.dis_bytes)

    def _emit(self, msg: RplMessage, dst: int, size: int) -> None:
        self.metrics.record_overhead(self.node_id, msg.kind, size, self.sim.now,
                                     detail=msg.prefix if msg.kind == DAO else dst)
        frame = Frame(src=self.node_id, dst=dst, kind=KIND_CONTROL,
                      payload_bytes=size, payload=msg)
        self.mac.send(frame)

    # -- reception ---------------------------------------------------------

    def on_frame(self, frame: Frame, from_id: int) -> None:
        payload = frame.payload
        if isinstance(payload, RplMessage):
            if payload.kind == DIO:
                self._on_dio(payload, from_id)
            elif payload.kind == DAO:
                self._on_dao(payload, from_id)
            elif payload.kind == DIS:
                self._on_dis(from_id)
            else:
                self.malformed += 1
        else:
            self._on_data(frame, from_id)

    def _on_dio(self, msg: RplMessage, from_id: int) -> None:
        if msg.rank <= 0:
            self.malformed += 1
            return
        if self.is_root:
            self.trickle.hear_consistent()
            return
        self._update_candidate(from_id, msg.rank)
        best_id, best_rank = min(self.candidates.items(), key=lambda kv: (kv[1], kv[0]))
        new_rank = best_rank + self.config.min_hop_rank_increase
        if best_id != self.parent or new_rank != self.rank:
            first_join = self.rank is None
            self.parent = best_id
            self.rank = new_rank
            self.metrics.count("rpl_parent_changes")
            if first_join and self._dis_handle is not None:
                self.sim.cancel(self._dis_handle)
                self._dis_handle = None
            self.trickle.reset()
            self._restart_dao_timer()
            self.metrics.record_table(self.node_id, self.sim.now, self.table_size)
        else:
            self.trickle.hear_consistent()

    def _update_candidate(self, sender: int, rank: int) -> None:
        cap = self.config.neighbor_table_cap
        if sender in self.candidates or len(self.candidates) < cap:
            self.candidates[sender] = rank
            return
        worst_id, worst_rank = max(self.candidates.items(), key=lambda kv: (kv[1], kv[0]))
        if (rank, sender) < (worst_rank, worst_id):
            del self.candidates[worst_id]
            self.candidates[sender] = rank
            self.metrics.count("rpl_neighbor_evictions")

    def _on_dao(self, msg: RplMessage, from_id: int) -> None:
        if msg.prefix < 0 or msg.prefix == self.node_id:
            self.malformed += 1
            return
        if msg.prefix in self.downward:
            # refresh: move to the back of the eviction order
            del self.downward[msg.prefix]
        elif len(self.downward) >= self.config.downward_table_cap:
            oldest = next(iter(self.downward))
            del self.downward[oldest]
            self.metrics.count("rpl_downward_evictions")
        self.downward[msg.prefix] = from_id
        self.metrics.record_table(self.node_id, self.sim.now, self.table_size)
        if not self.is_root and self.parent is not None:
            fwd = RplMessage(DAO, self.node_id, prefix=msg.prefix)
            self._emit(fwd, self.parent, self.config.dao_bytes)

    def _on_dis(self, from_id: int) -> None:
        if self.joined:
            # solicited DIO goes straight to the requester, no suppression;
            # a multicast DIS also signals an inconsistency, so reset Trickle
            self._emit_dio(from_id)
            self.trickle.reset()

    # -- forwarding --------------------------------------------------------

    def send_app_packet(self, packet) -> None:
        self._route(packet)

    def _on_data(self, frame: Frame, from_id: int) -> None:
        packet = frame.payload
        if packet.dst == self.node_id:
            self.network.app_receive(self.node_id, packet)
        else:
            self._route(packet)

    def _route(self, packet) -> None:
        if packet.hops >= self.config.hop_limit:
            self.metrics.record_packet_drop(self.sim.now, self.node_id, packet, "hop-limit")
            return
        next_hop = self.route_next_hop(packet.dst)
        if next_hop is None:
            self.metrics.record_packet_drop(self.sim.now, self.node_id, packet, "no-route")
            return
        frame = Frame(src=self.node_id, dst=next_hop, kind=packet.frame_kind,
                      payload_bytes=packet.payload_bytes, payload=packet)
        self.mac.send(frame)

    def route_next_hop(self, dst: int) -> int | None:
        """Downward entry when known, else the upward default (preferred parent)."""
        hit = self.downward.get(dst)
        if hit is not None:
            return hit
        return self.parent
