"""House topology generation (rooms, roles) and the four role-driven traffic processes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .engine import RngStream, Simulator

ROLE_SINK = "sink"
ROLE_MONITORING = "monitoring"
ROLE_EVENT = "event"
ROLE_ACTUATOR = "actuator"

PKT_REPORT = "report"
PKT_EVENT = "event"
PKT_ACTUATOR_REPORT = "actuator-report"
PKT_COMMAND = "command"
PKT_ACK = "app-ack"

WALL_FRACTION = 0.8
SENSOR_FRACTION = 0.7
MONITORING_FRACTION = 0.7


class GenerationError(RuntimeError):
    """Topology generation failed (e.g. no connected sample within the budget)."""


@dataclass(frozen=True)
class Room:
    name: str
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class FloorPlan:
    rooms: tuple[Room, ...]
    living_room: str

    @property
    def total_area(self) -> float:
        return sum(r.area for r in self.rooms)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (min(r.x0 for r in self.rooms), min(r.y0 for r in self.rooms),
                max(r.x1 for r in self.rooms), max(r.y1 for r in self.rooms))

    def wall_segments(self, room: Room) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        """Wall segments sampled for a room's devices.

        Interior walls are assigned to one adjoining room (south/west
        convention) so shared walls are not populated twice; north/east
        walls belong to the room only on the house boundary.
        """
        x0, y0, x1, y1 = self.bounds
        segments = [((room.x0, room.y0), (room.x1, room.y0)),
                    ((room.x0, room.y0), (room.x0, room.y1))]
        if room.y1 >= y1:
            segments.append(((room.x0, room.y1), (room.x1, room.y1)))
        if room.x1 >= x1:
            segments.append(((room.x1, room.y0), (room.x1, room.y1)))
        return segments

    @classmethod
    def default(cls) -> "FloorPlan":
        # 130 m2 row house (17.33 m x 7.5 m); the living room sits second
        # from the end so the far rooms lie three to four radio hops from
        # the sink while the whole plan stays coverable within four hops
        widths = {"bedroom1": 25.0, "living": 35.0, "kitchen": 20.0,
                  "bathroom": 10.0, "hall": 20.0, "bedroom2": 20.0}
        height = 7.5
        rooms = []
        x = 0.0
        for name, area in widths.items():
            w = area / height
            rooms.append(Room(name, round(x, 6), 0.0, round(x + w, 6), height))
            x += w
        return cls(rooms=tuple(rooms), living_room="living")

    def to_dict(self) -> dict:
        return {
            "living_room": self.living_room,
            "rooms": [{"name": r.name, "x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}
                      for r in self.rooms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FloorPlan":
        rooms = tuple(Room(r["name"], r["x0"], r["y0"], r["x1"], r["y1"])
                      for r in data["rooms"])
        return cls(rooms=rooms, living_room=data["living_room"])


def largest_remainder(total: int, weights: list[float]) -> list[int]:
    """Integer counts summing to total, proportional to weights."""
    scale = sum(weights)
    quotas = [total * w / scale for w in weights]
    counts = [int(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: quotas[i] - counts[i], reverse=True)
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def role_counts(n: int) -> dict[str, int]:
    """One sink; sensors/actuators 70/30 of the rest; monitoring/event 70/30 of sensors."""
    others = n - 1
    sensors, actuators = largest_remainder(others, [SENSOR_FRACTION, 1 - SENSOR_FRACTION])
    monitoring, event = largest_remainder(sensors, [MONITORING_FRACTION, 1 - MONITORING_FRACTION])
    return {ROLE_SINK: 1, ROLE_MONITORING: monitoring, ROLE_EVENT: event,
            ROLE_ACTUATOR: actuators}


@dataclass
class Topology:
    n: int
    seed: int
    plan: FloorPlan
    positions: dict[int, tuple[float, float]]
    roles: dict[int, str]

    @property
    def sink(self) -> int:
        return 0

    def nodes_with_role(self, role: str) -> list[int]:
        return sorted(i for i, r in self.roles.items() if r == role)

    def to_json(self) -> str:
        nodes = [{"id": i, "x": self.positions[i][0], "y": self.positions[i][1],
                  "role": self.roles[i]} for i in sorted(self.positions)]
        return json.dumps({"plan": self.plan.to_dict(), "seed": self.seed,
                           "nodes": nodes}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        data = json.loads(text)
        plan = FloorPlan.from_dict(data["plan"])
        positions = {nd["id"]: (nd["x"], nd["y"]) for nd in data["nodes"]}
        roles = {nd["id"]: nd["role"] for nd in data["nodes"]}
        return cls(n=len(positions), seed=data.get("seed", 0), plan=plan,
                   positions=positions, roles=roles)


def _sample_room_positions(plan: FloorPlan, room: Room, count: int,
                           rng: RngStream) -> list[tuple[float, float]]:
    on_wall, interior = largest_remainder(count, [WALL_FRACTION, 1 - WALL_FRACTION])
    segments = plan.wall_segments(room)
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in segments]
    total = sum(lengths)
    points = []
    for _ in range(on_wall):
        u = rng.uniform(0.0, total)
        for (a, b), length in zip(segments, lengths):
            if u <= length:
                t = u / length
                points.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                break
            u -= length
        else:
            end = segments[-1][1]
            points.append(end)
    for _ in range(interior):
        points.append((rng.uniform(room.x0, room.x1), rng.uniform(room.y0, room.y1)))
    return points


def _covered_within(positions: list[tuple[float, float]], range_m: float,
                    max_hops: int) -> bool:
    """Connected, with every node within max_hops of node 0 on the disk graph."""
    n = len(positions)
    if n == 0:
        return False
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        xi, yi = positions[i]
        for j in range(i + 1, n):
            xj, yj = positions[j]
            if math.hypot(xi - xj, yi - yj) <= range_m:
                adjacency[i].append(j)
                adjacency[j].append(i)
    depth = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adjacency[u]:
                if v not in depth:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        frontier = nxt
    return len(depth) == n and max(depth.values()) <= max_hops


def generate_topology(n: int, seed: int, plan: FloorPlan | None = None,
                      range_m: float = 5.0, max_resamples: int = 100,
                      coverage_hops: int = 4) -> Topology:
    """Place n devices on the plan (80 % on walls) and assign roles.

    Per-room counts are proportional to room area; the sink goes in the
    living room.  Samples are redrawn, up to max_resamples attempts, until
    the 5 m unit-disk graph is connected and the whole house is covered
    within coverage_hops of the sink.
    """
    if n < 5:
        raise GenerationError(f"need at least 5 nodes, got {n}")
    plan = plan or FloorPlan.default()
    rng = RngStream(seed, 0, "topology")
    areas = [r.area for r in plan.rooms]
    per_room = largest_remainder(n, areas)
    living_idx = next(i for i, r in enumerate(plan.rooms) if r.name == plan.living_room)
    if per_room[living_idx] == 0:
        per_room[living_idx] += 1
        per_room[per_room.index(max(per_room))] -= 1

    for _ in range(max_resamples):
        positions: list[tuple[float, float]] = []
        living_start = None
        for idx, room in enumerate(plan.rooms):
            if idx == living_idx:
                living_start = len(positions)
                # the sink is a mains-powered controller box, placed freely
                # inside the living room rather than mounted on a wall
                positions.append((rng.uniform(room.x0, room.x1),
                                  rng.uniform(room.y0, room.y1)))
                positions.extend(_sample_room_positions(plan, room, per_room[idx] - 1, rng))
            else:
                positions.extend(_sample_room_positions(plan, room, per_room[idx], rng))
        # node 0 is the sink: swap the living-room controller to the front
        positions[0], positions[living_start] = positions[living_start], positions[0]
        if not _covered_within(positions, range_m, coverage_hops):
            continue
        counts = role_counts(n)
        others = list(range(1, n))
        rng.shuffle(others)
        roles = {0: ROLE_SINK}
        cursor = 0
        for role in (ROLE_MONITORING, ROLE_EVENT, ROLE_ACTUATOR):
            for node in others[cursor:cursor + counts[role]]:
                roles[node] = role
            cursor += counts[role]
        return Topology(n=n, seed=seed, plan=plan,
                        positions={i: positions[i] for i in range(n)}, roles=roles)
    raise GenerationError(
        f"no connected {n}-node topology within {max_resamples} samples (seed {seed})")


@dataclass(slots=True)
class AppPacket:
    packet_id: int
    src: int
    dst: int
    kind: str
    payload_bytes: int
    created_at: int
    hops: int = 0

    @property
    def frame_kind(self) -> str:
        return "ack" if self.kind == PKT_ACK else "data"


@dataclass
class TrafficConfig:
    report_min_us: int = 480_000_000  # 8 minutes
    report_max_us: int = 720_000_000  # 12 minutes
    events_per_hour: float = 10.0
    bursts_per_hour: float = 10.0
    burst_size: int = 5
    payload_bytes: int = 16


class TrafficDriver:
    """Drives the four role traffic patterns and application-layer acknowledgments."""

    HOUSE = 1_000_000  # rng stream key for house-wide processes

    def __init__(self, sim: Simulator, topology: Topology, network,
                 config: TrafficConfig | None = None):
        self.sim = sim
        self.topology = topology
        self.network = network
        self.config = config or TrafficConfig()
        self.sink = topology.sink
        self.event_sensors = topology.nodes_with_role(ROLE_EVENT)
        self.actuators = topology.nodes_with_role(ROLE_ACTUATOR)
        self._next_id = 0

    def start(self, boot_times: dict[int, int]) -> None:
        cfg = self.config
        for node in sorted(self.topology.positions):
            role = self.topology.roles[node]
            if role in (ROLE_MONITORING, ROLE_ACTUATOR):
                rng = self.sim.rng(node, "traffic")
                phase = rng.uniform_us(0, cfg.report_max_us)
                self.sim.schedule(boot_times[node] + phase,
                                  lambda n=node: self._periodic_report(n),
                                  target=node, kind="app_report")
        if self.event_sensors:
            rng = self.sim.rng(self.HOUSE, "events")
            self.sim.schedule_in(rng.exponential_us(self._event_mean_us()),
                                 self._house_event, target=self.HOUSE, kind="app_event")
        if self.actuators:
            rng = self.sim.rng(self.HOUSE, "bursts")
            self.sim.schedule_in(rng.exponential_us(self._burst_mean_us()),
                                 self._sink_burst_tick, target=self.sink, kind="app_burst")

    def _event_mean_us(self) -> float:
        return 3_600_000_000.0 / self.config.events_per_hour

    def _burst_mean_us(self) -> float:
        return 3_600_000_000.0 / self.config.bursts_per_hour

    def _send(self, src: int, dst: int, kind: str) -> AppPacket:
        packet = AppPacket(self._next_id, src, dst, kind,
                           self.config.payload_bytes, self.sim.now)
        self._next_id += 1
        self.network.app_send(src, packet)
        return packet

    def _periodic_report(self, node: int) -> None:
        role = self.topology.roles[node]
        kind = PKT_REPORT if role == ROLE_MONITORING else PKT_ACTUATOR_REPORT
        self._send(node, self.sink, kind)
        gap = self.sim.rng(node, "traffic").uniform_us(self.config.report_min_us,
                                                       self.config.report_max_us)
        self.sim.schedule_in(gap, lambda: self._periodic_report(node),
                             target=node, kind="app_report")

    def _house_event(self) -> None:
        rng = self.sim.rng(self.HOUSE, "events")
        sensor = rng.choice(self.event_sensors)
        self._send(sensor, self.sink, PKT_EVENT)
        self.sim.schedule_in(rng.exponential_us(self._event_mean_us()),
                             self._house_event, target=self.HOUSE, kind="app_event")

    def _sink_burst_tick(self) -> None:
        self._command_burst()
        rng = self.sim.rng(self.HOUSE, "bursts")
        self.sim.schedule_in(rng.exponential_us(self._burst_mean_us()),
                             self._sink_burst_tick, target=self.sink, kind="app_burst")

    def _command_burst(self) -> None:
        """5 commands to 5 distinct actuators (with repetition when fewer exist)."""
        rng = self.sim.rng(self.sink, "burst_targets")
        k = self.config.burst_size
        if len(self.actuators) >= k:
            targets = rng.sample(self.actuators, k)
        else:
            targets = [rng.choice(self.actuators) for _ in range(k)]
        for dst in targets:
            self._send(self.sink, dst, PKT_COMMAND)

    def on_app_receive(self, node: int, packet: AppPacket) -> None:
        """Ack every received non-ack packet; event arrivals at the sink start a burst."""
        if packet.kind == PKT_ACK:
            return
        if node == self.sink and packet.kind == PKT_EVENT and self.actuators:
            self._command_burst()
        self._send(node, packet.src, PKT_ACK)
