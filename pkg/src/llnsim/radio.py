"""Unit-disk radio medium with distance loss and receiver-centric collisions."""

from __future__ import annotations

import math

from .engine import Simulator

# IEEE 802.15.4 at 250 kbit/s: 32 us per byte, plus preamble/SFD overhead.
AIRTIME_PER_BYTE_US = 32
PHY_PREAMBLE_US = 160

BROADCAST = -1


def frame_airtime_us(payload_bytes: int) -> int:
    """On-air duration of a single frame copy."""
    return PHY_PREAMBLE_US + AIRTIME_PER_BYTE_US * payload_bytes


class Transmission:
    __slots__ = ("sender", "frame", "start", "duration", "receivers", "collided")

    def __init__(self, sender: int, frame, start: int, duration: int, receivers: tuple[int, ...]):
        self.sender = sender
        self.frame = frame
        self.start = start
        self.duration = duration
        self.receivers = receivers
        self.collided: set[int] = set()

    @property
    def end(self) -> int:
        return self.start + self.duration


class Medium:
    """Decides who hears a transmission: link iff distance <= range.

    Delivery succeeds with probability 1 - loss_factor * (d / range)^2 unless
    the receiver is overlapped in time by a second audible transmission, in
    which case both are destroyed at that receiver (no capture effect).

    A unicast strobe is received when the addressee wakes, at the end of the
    occupancy window.  A broadcast strobe spans a full wake interval and each
    receiver picks up the copy at its own wake phase inside the window, so
    flood arrival order varies per receiver.
    """

    def __init__(self, sim: Simulator, positions: dict[int, tuple[float, float]],
                 range_m: float = 5.0, loss_factor: float = 0.0):
        self.sim = sim
        self.positions = dict(positions)
        self.range_m = range_m
        self.loss_factor = loss_factor
        self.on_deliver = None  # fn(receiver, frame, sender, delivered)
        self.on_tx_end = None  # fn(tx, reached_dst: bool | None)
        self._active: list[Transmission] = []
        self._neighbors: dict[int, tuple[int, ...]] = {}
        self._p_rx: dict[tuple[int, int], float] = {}
        self._build_links()

    def _build_links(self) -> None:
        ids = sorted(self.positions)
        nbrs: dict[int, list[int]] = {i: [] for i in ids}
        for idx, a in enumerate(ids):
            ax, ay = self.positions[a]
            for b in ids[idx + 1:]:
                bx, by = self.positions[b]
                d = math.hypot(ax - bx, ay - by)
                if d <= self.range_m:
                    nbrs[a].append(b)
                    nbrs[b].append(a)
                    p = 1.0 - self.loss_factor * (d / self.range_m) ** 2
                    self._p_rx[(a, b)] = p
                    self._p_rx[(b, a)] = p
        self._neighbors = {i: tuple(v) for i, v in nbrs.items()}

    def neighbors(self, node: int) -> tuple[int, ...]:
        try:
            return self._neighbors[node]
        except KeyError:
            raise ValueError(f"unknown node id {node}") from None

    def channel_busy(self, node: int) -> bool:
        """Carrier sense: an audible ongoing transmission, or node's own."""
        nbrs = self._neighbors[node]
        for tx in self._active:
            if tx.sender == node or tx.sender in nbrs:
                return True
        return False

    def transmit(self, sender: int, frame, duration_us: int) -> Transmission:
        receivers = self.neighbors(sender)
        tx = Transmission(sender, frame, self.sim.now, duration_us, receivers)
        rx_set = set(receivers)
        for other in self._active:
            for common in rx_set.intersection(other.receivers):
                tx.collided.add(common)
                other.collided.add(common)
            # half duplex: a node cannot receive while transmitting
            if other.sender in rx_set:
                tx.collided.add(other.sender)
            if sender in other.receivers:
                other.collided.add(sender)
        self._active.append(tx)
        if frame.dst == BROADCAST:
            airtime = frame_airtime_us(frame.payload_bytes)
            span = max(duration_us - airtime, 0)
            for receiver in receivers:
                phase = self.sim.rng(receiver, "wake_phase").uniform_us(0, span + 1)
                self.sim.schedule(tx.start + phase + min(airtime, duration_us),
                                  lambda r=receiver: self._deliver_broadcast(tx, r),
                                  target=receiver, kind="radio_rx")
        self.sim.schedule(tx.end, lambda: self._finish(tx), target=sender, kind="radio_end")
        return tx

    def _delivery_ok(self, tx: Transmission, receiver: int) -> bool:
        # a transmission that starts after this receiver already picked up its
        # copy cannot retroactively destroy it
        if receiver in tx.collided:
            return False
        if self.loss_factor == 0.0:
            return True
        draw = self.sim.rng(receiver, "radio_loss").random()
        return draw < self._p_rx[(tx.sender, receiver)]

    def _deliver_broadcast(self, tx: Transmission, receiver: int) -> None:
        self.on_deliver(receiver, tx.frame, tx.sender, self._delivery_ok(tx, receiver))

    def _finish(self, tx: Transmission) -> None:
        self._active.remove(tx)
        reached_dst: bool | None = None
        if tx.frame.dst != BROADCAST:
            # addressee out of range (stale route): the strobe ends unanswered
            reached_dst = False
            for receiver in tx.receivers:
                if receiver == tx.frame.dst:
                    reached_dst = self._delivery_ok(tx, receiver)
                    self.on_deliver(receiver, tx.frame, tx.sender, reached_dst)
        self.on_tx_end(tx, reached_dst)
