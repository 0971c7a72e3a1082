"""Deterministic discrete-event core: virtual clock, event queue, seeded RNG streams."""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass

import numpy as np

# All simulation times are integer microseconds since run start.
US = 1
MS = 1_000
SECONDS = 1_000_000
HOURS = 3_600 * SECONDS

DEFAULT_HORIZON_US = 8 * HOURS


class SimulationError(RuntimeError):
    """Programming error that must halt the run (e.g. scheduling in the past)."""


class EventHandle:
    """Cancellable reference to a scheduled event."""

    __slots__ = ("fire_at", "seq", "target", "kind", "fn", "cancelled", "fired")

    def __init__(self, fire_at: int, seq: int, target: int, kind: str, fn):
        self.fire_at = fire_at
        self.seq = seq
        self.target = target
        self.kind = kind
        self.fn = fn
        self.cancelled = False
        self.fired = False


class RngStream:
    """Independent random stream keyed by (run seed, node key, purpose tag).

    Backed by a counter-based Philox generator seeded from the key, so draws
    on one stream can never perturb another.  Scalar draws are served from
    cached blocks to keep the per-draw cost low.
    """

    _BLOCK = 1024

    def __init__(self, run_seed: int, node_key: int, purpose: str):
        tag = zlib.crc32(purpose.encode("ascii"))
        seq = np.random.SeedSequence([run_seed & 0xFFFFFFFF, node_key + 1, tag])
        self._gen = np.random.Generator(np.random.Philox(seq))
        self._buf = ()
        self._pos = 0

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._BLOCK)
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return float(value)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def uniform_us(self, low: int, high: int) -> int:
        """Integer microseconds uniform in [low, high)."""
        return low + int(self.random() * (high - low))

    def randint(self, low: int, high: int) -> int:
        """Integer uniform in [low, high] inclusive."""
        return low + int(self.random() * (high - low + 1))

    def exponential_us(self, mean_us: float) -> int:
        return int(-mean_us * np.log1p(-self.random()))

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]

    def sample(self, seq, k: int) -> list:
        """k distinct elements, order-stable Fisher-Yates prefix."""
        pool = list(seq)
        for i in range(k):
            j = self.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]


@dataclass
class RunSummary:
    events_processed: int
    end_time_us: int


class Simulator:
    """Single-threaded event loop with a (fire_at, seq) total order.

    Ties at the same timestamp are broken by insertion sequence number, which
    makes the dispatch order platform independent.
    """

    def __init__(self, run_seed: int, horizon_us: int = DEFAULT_HORIZON_US, trace: bool = False):
        self.run_seed = run_seed
        self.horizon_us = horizon_us
        self.now = 0
        self._heap: list[tuple[int, int, EventHandle]] = []
        self._seq = 0
        self._processed = 0
        self._streams: dict[tuple[int, str], RngStream] = {}
        self.trace: list[str] | None = [] if trace else None

    def rng(self, node_key: int, purpose: str) -> RngStream:
        key = (node_key, purpose)
        stream = self._streams.get(key)
        if stream is None:
            stream = RngStream(self.run_seed, node_key, purpose)
            self._streams[key] = stream
        return stream

    def schedule(self, fire_at: int, fn, target: int = -1, kind: str = "") -> EventHandle:
        if fire_at < self.now:
            raise SimulationError(
                f"past event: fire_at={fire_at} < clock={self.now} (target={target}, kind={kind})"
            )
        self._seq += 1
        handle = EventHandle(fire_at, self._seq, target, kind, fn)
        heapq.heappush(self._heap, (fire_at, self._seq, handle))
        return handle

    def schedule_in(self, delay_us: int, fn, target: int = -1, kind: str = "") -> EventHandle:
        return self.schedule(self.now + delay_us, fn, target, kind)

    def cancel(self, handle: EventHandle) -> bool:
        """True iff the event was pending and is now removed."""
        if handle.cancelled or handle.fired:
            return False
        handle.cancelled = True
        return True

    def run_until(self, horizon_us: int | None = None) -> RunSummary:
        horizon = self.horizon_us if horizon_us is None else horizon_us
        heap = self._heap
        trace = self.trace
        while heap and heap[0][0] <= horizon:
            fire_at, seq, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = fire_at
            handle.fired = True
            self._processed += 1
            if trace is not None:
                trace.append(f"{fire_at},{seq},{handle.target},{handle.kind}")
            handle.fn()
        self.now = horizon
        return RunSummary(events_processed=self._processed, end_time_us=self.now)

    def dump_trace(self, path) -> None:
        if self.trace is None:
            raise SimulationError("run was created without trace recording")
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(self.trace))
            fh.write("\n")
