"""Non-slotted CSMA with a 2-frame queue over a duty-cycled (preamble-sampling) link."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import Simulator
from .radio import Medium, frame_airtime_us

BROADCAST = -1

KIND_CONTROL = "control"
KIND_DATA = "data"
KIND_ACK = "ack"


@dataclass(slots=True)
class Frame:
    src: int
    dst: int  # node id or BROADCAST
    kind: str  # control | data | ack
    payload_bytes: int
    payload: object = None
    enqueued_at: int = 0
    attempts: int = 0


@dataclass
class MacConfig:
    queue_limit: int = 2
    max_attempts: int = 8
    wake_interval_us: int = 125_000  # ContikiMAC default 8 Hz channel check
    # busy-channel retries wait in channel-check-interval units, like Contiki CSMA
    backoff_unit_us: int = 125_000


class CsmaMac:
    """Per-node CSMA state machine.

    Busy-channel encounters back off for both unicast and broadcast frames
    (broadcasts are buffered and retried, never dropped on first contention);
    a frame is dropped only after max_attempts busy encounters.
    """

    def __init__(self, sim: Simulator, medium: Medium, node_id: int,
                 config: MacConfig, metrics):
        self.sim = sim
        self.medium = medium
        self.node_id = node_id
        self.config = config
        self.metrics = metrics
        self.queue: deque[Frame] = deque()
        self.sending = False
        self._retry = None
        self._wake_rng = sim.rng(node_id, "mac_wake")
        self._backoff_rng = sim.rng(node_id, "mac_backoff")

    def send(self, frame: Frame) -> bool:
        """Enqueue a frame; False (and a counted drop) when the queue is full."""
        if len(self.queue) >= self.config.queue_limit:
            self.metrics.record_drop(self.sim.now, self.node_id, frame, "queue")
            return False
        frame.enqueued_at = self.sim.now
        self.queue.append(frame)
        if not self.sending and self._retry is None:
            self._retry = self.sim.schedule_in(0, self._attempt, target=self.node_id,
                                               kind="mac_attempt")
        return True

    def link_duration_us(self, broadcast: bool, payload_bytes: int) -> int:
        """Channel occupancy of one MAC transmission.

        Broadcast strobes across every receiver's sleep cycle, occupying a
        full wake interval; unicast strobes until the receiver wakes, so it
        costs the frame airtime plus a uniform wake wait.
        """
        if broadcast:
            return self.config.wake_interval_us
        wait = self._wake_rng.uniform_us(0, self.config.wake_interval_us)
        return frame_airtime_us(payload_bytes) + wait

    def _attempt(self) -> None:
        self._retry = None
        frame = self.queue[0]
        if self.medium.channel_busy(self.node_id):
            self._retry_or_drop(frame)
            return
        duration = self.link_duration_us(frame.dst == BROADCAST, frame.payload_bytes)
        self.sending = True
        self.medium.transmit(self.node_id, frame, duration)

    def _retry_or_drop(self, frame: Frame) -> None:
        frame.attempts += 1
        if frame.attempts > self.config.max_attempts:
            self.queue.popleft()
            self.metrics.record_drop(self.sim.now, self.node_id, frame, "csma")
            self._next()
            return
        steps = self._backoff_rng.randint(1, 2 ** min(frame.attempts, 4))
        self._retry = self.sim.schedule_in(steps * self.config.backoff_unit_us,
                                           self._attempt, target=self.node_id,
                                           kind="mac_backoff")

    def on_tx_done(self, delivered: bool | None) -> None:
        """Called by the network wiring when our transmission leaves the air.

        For unicast, delivered tells whether the addressee got the frame (the
        strobe ended without reaching it otherwise); a failed delivery retries
        on the same attempt budget as a busy channel.  Broadcast gets no
        feedback (None) and completes unconditionally.
        """
        self.sending = False
        frame = self.queue[0]
        if delivered is False:
            self._retry_or_drop(frame)
            return
        self.queue.popleft()
        self._next()

    def _next(self) -> None:
        if self.queue and self._retry is None:
            self._retry = self.sim.schedule_in(0, self._attempt, target=self.node_id,
                                               kind="mac_attempt")
