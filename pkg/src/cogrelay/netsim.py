"""
Discrete-event simulation of a two-hop secondary network.

One SU source streams CBR packets to one mobile SU destination through an
amplify-and-forward relay chosen among stationary SU relays. Primary users
are static nodes that take part in placement only. Time is cut into epochs;
at every epoch boundary the destination moves, fading is redrawn, and the
relay policy runs:

``clsss``
    Re-run best-relay selection each epoch and move packets queued at an
    outgoing relay onto the new one (packet shifting).
``static-random``
    Pick a relay uniformly at random among the in-range candidates the first
    time one exists and keep it for the rest of the run. No shifting.

Medium access is an ideal schedule: the secondary network carries one
transmission at a time, non-preemptively. Relay->destination traffic goes
first, then source->relay. A hop of SNR ``eta`` is served at the Shannon rate
``bandwidth * log2(1 + eta)``, held fixed for the whole epoch.

Independent random streams (placement, mobility, fading, policy) are spawned
from the seed, so changing traffic parameters never changes the channel
history.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from cogrelay.channel import ChannelRealization, NodePosition, NoiseModel, PathLossModel, db_to_linear, snr_of
from cogrelay.relay import RelayDecision, RelaySelectionConfig, build_candidates, decide

POLICIES = ("clsss", "static-random")

SOURCE, RELAY, DESTINATION, PRIMARY = "source", "relay", "destination", "primary"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    node_count: int = 100
    arena: tuple[float, float] = (1000.0, 1000.0)
    sim_time: float = 100.0  # s
    tx_range: float = 250.0  # m
    packet_size: int = 512 * 1024 * 8  # bits
    tx_power: float = 0.660  # W, drawn while transmitting; also the radiated power
    rx_power: float = 0.395  # W
    initial_energy: float = 100.0  # J
    speed_range: tuple[float, float] = (10.0, 50.0)  # m/s
    epoch: float = 1.0  # s
    offered_load: float = 10.0  # packets/s from the source
    seed: int = 0
    # None: every node that is not source, destination or primary is a relay
    relay_count: int | None = None
    primary_count: int = 1
    bandwidth: float = 20e6  # Hz
    # None: the mean SNR at tx_range equals the relay threshold, so the
    # nominal range is exactly where links stop qualifying
    noise_power: float | None = None  # W
    snr_threshold_db: float = 10.0
    path_loss_exponent: float = 2.0
    policy: str = "clsss"
    # per-node interface queue, drop-tail; None = unbounded
    queue_limit: int | None = 50

    def __post_init__(self):
        object.__setattr__(self, "arena", tuple(float(a) for a in self.arena))
        object.__setattr__(self, "speed_range", tuple(float(s) for s in self.speed_range))
        positive = {
            "sim_time": self.sim_time,
            "tx_range": self.tx_range,
            "packet_size": self.packet_size,
            "tx_power": self.tx_power,
            "rx_power": self.rx_power,
            "initial_energy": self.initial_energy,
            "epoch": self.epoch,
            "bandwidth": self.bandwidth,
            "path_loss_exponent": self.path_loss_exponent,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be > 0, got {value!r}")
        if self.noise_power is not None and not self.noise_power > 0:
            raise ConfigError(f"noise_power must be > 0, got {self.noise_power!r}")
        if self.offered_load < 0:
            raise ConfigError("offered_load must be >= 0")
        if min(self.arena) <= 0:
            raise ConfigError("arena sides must be > 0")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"speed_range must satisfy 0 <= min <= max, got {self.speed_range}")
        if self.tx_range > math.hypot(*self.arena):
            raise ConfigError("tx_range exceeds the arena diagonal")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.queue_limit is not None and self.queue_limit < 1:
            raise ConfigError("queue_limit must be >= 1 or null")
        if self.primary_count < 0:
            raise ConfigError("primary_count must be >= 0")
        relays = self.resolved_relay_count
        if relays < 0 or self.node_count < relays + 2 + self.primary_count:
            raise ConfigError(
                f"node_count={self.node_count} cannot hold source, destination, "
                f"{self.primary_count} primaries and {relays} relays"
            )

    @property
    def resolved_relay_count(self) -> int:
        if self.relay_count is None:
            return self.node_count - 2 - self.primary_count
        return self.relay_count

    @property
    def snr_threshold(self) -> float:
        return db_to_linear(self.snr_threshold_db)

    @property
    def resolved_noise_power(self) -> float:
        if self.noise_power is not None:
            return self.noise_power
        edge_gain = PathLossModel(self.path_loss_exponent).gain(self.tx_range)
        return self.tx_power * edge_gain / self.snr_threshold


@dataclass
class NodeState:
    position: NodePosition
    waypoint: NodePosition
    speed: float
    energy: float
    role: str
    mobile: bool = False

    @property
    def alive(self) -> bool:
        return self.energy > 0.0


@dataclass
class PacketRecord:
    id: int
    created_at: float
    bytes: int  # payload size in bits
    delivered_at: float | None = None
    dropped_at: float | None = None
    hops: int = 0
    shifted: int = 0
    service_time: float = 0.0
    location: int | None = None  # node id holding the packet

    @property
    def delay(self) -> float | None:
        return None if self.delivered_at is None else self.delivered_at - self.created_at

    @property
    def queueing_delay(self) -> float | None:
        d = self.delay
        return None if d is None else d - self.service_time


@dataclass(frozen=True)
class SimMetrics:
    mean_delay: float  # ms
    throughput: float  # kbit/s
    pdr: float
    overhead: float  # control messages per delivered packet
    energy_consumed: float  # J, mean per node
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    control_messages: int = 0
    mean_queueing_delay: float = 0.0  # ms
    mean_service_delay: float = 0.0  # ms

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Transmission:
    packet: PacketRecord
    tx: int
    rx: int
    start: float
    end: float
    doomed: bool  # energy runs out before the packet is through


@dataclass
class World:
    cfg: SimConfig
    nodes: list[NodeState]
    source: int
    destination: int
    relays: list[int]
    primaries: list[int]
    mobility_rng: np.random.Generator
    fading_rng: np.random.Generator
    policy_rng: np.random.Generator
    time: float = 0.0
    source_queue: deque = field(default_factory=deque)
    relay_queues: dict[int, deque] = field(default_factory=dict)
    current_relay: int | None = None
    # node id -> (snr source->relay, snr relay->destination) for this epoch
    hop_snr: dict[int, tuple[float, float]] = field(default_factory=dict)
    in_range: set[int] = field(default_factory=set)
    in_flight: Transmission | None = None
    packets: list[PacketRecord] = field(default_factory=list)
    next_packet_time: float = 0.0
    delivered: int = 0
    dropped: int = 0
    control_messages: int = 0
    tx_time: float = 0.0  # sum of transmit durations
    rx_time: float = 0.0
    debited: float = 0.0  # J
    last_decision: RelayDecision | None = None
    trace: list[dict] | None = None
    check_invariants: bool = False
    invariant_checks: int = 0

    @property
    def path_loss(self) -> PathLossModel:
        return PathLossModel(self.cfg.path_loss_exponent)

    def distance(self, a: int, b: int) -> float:
        return self.nodes[a].position.distance_to(self.nodes[b].position)

    def queued(self) -> int:
        return len(self.source_queue) + sum(len(q) for q in self.relay_queues.values())

    def log(self, event: str, **fields) -> None:
        if self.trace is not None:
            self.trace.append({"t": self.time, "event": event, **fields})

    def check(self) -> None:
        """Packet conservation: generated == delivered + queued + dropped + in flight."""
        if not self.check_invariants:
            return
        in_flight = 1 if self.in_flight is not None else 0
        total = self.delivered + self.queued() + self.dropped + in_flight
        if total != len(self.packets):
            raise AssertionError(
                f"packet conservation broken at t={self.time}: generated={len(self.packets)} "
                f"delivered={self.delivered} queued={self.queued()} dropped={self.dropped} in_flight={in_flight}"
            )
        for n in self.nodes:
            if n.energy < 0:
                raise AssertionError("negative node energy")
        self.invariant_checks += 1


def _uniform_point(rng: np.random.Generator, arena) -> NodePosition:
    x, y = rng.uniform((0.0, 0.0), arena)
    return NodePosition(float(x), float(y))


def init_scenario(cfg: SimConfig, *, trace: bool = False, check_invariants: bool = False) -> World:
    """Place all nodes uniformly and assign roles.

    Node 0 is the source, node 1 the (mobile) destination, then the relays,
    then the primaries; any remaining nodes are idle bystanders.
    """
    seq = np.random.SeedSequence(cfg.seed)
    placement, mobility, fading, policy = (np.random.default_rng(s) for s in seq.spawn(4))
    relay_count = cfg.resolved_relay_count
    relays = list(range(2, 2 + relay_count))
    primaries = list(range(2 + relay_count, 2 + relay_count + cfg.primary_count))
    roles = [SOURCE, DESTINATION] + [RELAY] * relay_count + [PRIMARY] * cfg.primary_count
    roles += ["idle"] * (cfg.node_count - len(roles))

    nodes = []
    for role in roles:
        p = _uniform_point(placement, cfg.arena)
        nodes.append(NodeState(p, p, 0.0, cfg.initial_energy, role))
    dest = nodes[1]
    dest.mobile = True
    dest.waypoint = _uniform_point(mobility, cfg.arena)
    dest.speed = float(mobility.uniform(*cfg.speed_range))

    world = World(
        cfg=cfg,
        nodes=nodes,
        source=0,
        destination=1,
        relays=relays,
        primaries=primaries,
        mobility_rng=mobility,
        fading_rng=fading,
        policy_rng=policy,
        relay_queues={r: deque() for r in relays},
        trace=[] if trace else None,
        check_invariants=check_invariants,
    )
    if cfg.offered_load == 0:
        world.next_packet_time = math.inf
    return world


def advance_mobility(world: World, dt: float) -> World:
    """Random-waypoint motion of the mobile nodes over ``dt`` seconds."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    cfg = world.cfg
    for node in world.nodes:
        if not node.mobile:
            continue
        remaining = dt
        while remaining > 0 and node.speed > 0:
            gap = node.position.distance_to(node.waypoint)
            step = node.speed * remaining
            if step < gap:
                f = step / gap
                p, w = node.position, node.waypoint
                node.position = NodePosition(p.x + f * (w.x - p.x), p.y + f * (w.y - p.y))
                break
            remaining -= gap / node.speed
            node.position = node.waypoint
            node.waypoint = _uniform_point(world.mobility_rng, cfg.arena)
            node.speed = float(world.mobility_rng.uniform(*cfg.speed_range))
    return world


def _relay_cfg(cfg: SimConfig) -> RelaySelectionConfig:
    return RelaySelectionConfig(cfg.tx_power, cfg.snr_threshold, NoiseModel(cfg.resolved_noise_power))


def refresh_channel(world: World) -> ChannelRealization:
    """Redraw fading for every relay and recompute hop SNRs and range membership.

    Returns the channel of the in-range relays, in ascending node id.
    """
    cfg = world.cfg
    pl = world.path_loss
    noise = NoiseModel(cfg.resolved_noise_power)
    # one draw per relay regardless of range, keeps the fading stream aligned
    fades = world.fading_rng.exponential(1.0, size=(2, len(world.relays)))
    world.hop_snr.clear()
    world.in_range.clear()
    src, dst = world.nodes[world.source], world.nodes[world.destination]
    sr_gains, rd_gains = [], []
    for k, r in enumerate(world.relays):
        d_sr, d_rd = world.distance(world.source, r), world.distance(r, world.destination)
        g_sr = pl.gain(d_sr) * fades[0, k]
        g_rd = pl.gain(d_rd) * fades[1, k]
        world.hop_snr[r] = (snr_of(cfg.tx_power, g_sr, noise), snr_of(cfg.tx_power, g_rd, noise))
        usable = world.nodes[r].alive and src.alive and dst.alive
        if usable and d_sr <= cfg.tx_range and d_rd <= cfg.tx_range:
            world.in_range.add(r)
            sr_gains.append(g_sr)
            rd_gains.append(g_rd)
    return ChannelRealization(tuple(sr_gains), tuple(rd_gains))


def epoch_relay_decision(world: World, cfg: SimConfig | None = None):
    """Fresh fading plus best-relay selection over the in-range relays.

    Returns ``(decision, relay_ids)``: ``decision`` uses 1-based positions into
    ``relay_ids`` (the in-range relay node ids, ascending).
    """
    cfg = cfg or world.cfg
    realization = refresh_channel(world)
    relay_ids = sorted(world.in_range)
    decision = decide(build_candidates(realization, _relay_cfg(cfg)), _relay_cfg(cfg))
    world.last_decision = decision
    return decision, relay_ids


def _enqueue(world: World, queue: deque, pkt: PacketRecord, node_id: int) -> bool:
    limit = world.cfg.queue_limit
    if limit is not None and len(queue) >= limit:
        _drop(world, pkt)
        return False
    pkt.location = node_id
    queue.append(pkt)
    return True


def shift_packets(world: World, old_relay: int | None, new_relay: int | None) -> int:
    """Move every packet queued at ``old_relay`` to ``new_relay`` (or back to
    the source when there is none). One control message per packet."""
    if old_relay is None or old_relay == new_relay:
        return 0
    queue = world.relay_queues[old_relay]
    moved = 0
    while queue:
        pkt = queue.popleft()
        pkt.shifted += 1
        world.control_messages += 1
        moved += 1
        if new_relay is None:
            kept = _enqueue(world, world.source_queue, pkt, world.source)
        else:
            kept = _enqueue(world, world.relay_queues[new_relay], pkt, new_relay)
        if kept:
            world.log("shift", packet=pkt.id, src=old_relay, dst=pkt.location)
        world.check()
    return moved


def hop_rate(world: World, tx: int, rx: int) -> float:
    """Shannon rate (bit/s) of the hop this epoch; 0 when it cannot be used."""
    cfg = world.cfg
    if not (world.nodes[tx].alive and world.nodes[rx].alive):
        return 0.0
    if world.distance(tx, rx) > cfg.tx_range:
        return 0.0
    if tx == world.source:
        snr = world.hop_snr.get(rx, (0.0, 0.0))[0]
    else:
        snr = world.hop_snr.get(tx, (0.0, 0.0))[1]
    return cfg.bandwidth * math.log2(1.0 + snr)


def _drop(world: World, pkt: PacketRecord) -> None:
    pkt.dropped_at = world.time
    pkt.location = None
    world.dropped += 1
    world.log("drop", packet=pkt.id)


def _start(world: World, queue: deque, tx: int, rx: int, rate: float) -> None:
    cfg = world.cfg
    pkt = queue.popleft()
    duration = pkt.bytes / rate
    t_tx = world.nodes[tx].energy / cfg.tx_power
    t_rx = world.nodes[rx].energy / cfg.rx_power
    effective = min(duration, t_tx, t_rx)
    doomed = effective < duration
    for node_id, power in ((tx, cfg.tx_power), (rx, cfg.rx_power)):
        node = world.nodes[node_id]
        spent = power * effective
        node.energy = max(0.0, node.energy - spent)
        world.debited += spent
    world.tx_time += effective
    world.rx_time += effective
    pkt.service_time += effective
    world.in_flight = Transmission(pkt, tx, rx, world.time, world.time + effective, doomed)
    world.log("tx_start", packet=pkt.id, src=tx, dst=rx, duration=effective)


def _try_start(world: World) -> bool:
    if world.in_flight is not None:
        return False
    for r in world.relays:
        queue = world.relay_queues[r]
        if queue:
            rate = hop_rate(world, r, world.destination)
            if rate > 0:
                _start(world, queue, r, world.destination, rate)
                return True
    relay = world.current_relay
    if world.source_queue and relay is not None:
        rate = hop_rate(world, world.source, relay)
        if rate > 0:
            _start(world, world.source_queue, world.source, relay, rate)
            return True
    return False


def _finish(world: World) -> None:
    tr = world.in_flight
    world.in_flight = None
    pkt = tr.packet
    if tr.doomed:
        _drop(world, pkt)
    elif tr.rx == world.destination:
        pkt.hops += 1
        pkt.delivered_at = world.time
        pkt.location = world.destination
        world.delivered += 1
        world.log("deliver", packet=pkt.id, src=tr.tx, delay=pkt.delay, queueing=pkt.queueing_delay)
    else:
        pkt.hops += 1
        if _enqueue(world, world.relay_queues[tr.rx], pkt, tr.rx):
            world.log("hop", packet=pkt.id, src=tr.tx, dst=tr.rx)
    for node_id in (tr.tx, tr.rx):
        if not world.nodes[node_id].alive:
            _purge_dead(world, node_id)


def _purge_dead(world: World, node_id: int) -> None:
    if node_id == world.source:
        queue = world.source_queue
    else:
        queue = world.relay_queues.get(node_id)
    while queue:
        _drop(world, queue.popleft())
    if world.current_relay == node_id:
        world.current_relay = None


def _arrival(world: World) -> None:
    cfg = world.cfg
    pkt = PacketRecord(id=len(world.packets), created_at=world.time, bytes=cfg.packet_size, location=world.source)
    world.packets.append(pkt)
    world.log("create", packet=pkt.id)
    if world.nodes[world.source].alive:
        _enqueue(world, world.source_queue, pkt, world.source)
    else:
        _drop(world, pkt)
    world.next_packet_time = (len(world.packets)) / cfg.offered_load


def transmit_step(world: World, cfg: SimConfig | None = None, dt: float | None = None) -> World:
    """Process packet arrivals and transmissions in ``[world.time, world.time + dt)``.

    Transmissions are non-preemptive and may end after the window; they finish
    in a later step at the rate they started with. Arrivals stop at
    ``sim_time``.
    """
    cfg = cfg or world.cfg
    dt = cfg.epoch if dt is None else dt
    t_end = world.time + dt
    while True:
        if _try_start(world):
            world.check()
            continue
        next_arrival = world.next_packet_time if world.next_packet_time < cfg.sim_time else math.inf
        next_end = world.in_flight.end if world.in_flight is not None else math.inf
        t = min(next_arrival, next_end)
        if t >= t_end:
            break
        world.time = t
        # completion first: it frees the medium for the arriving packet
        if next_end <= next_arrival:
            _finish(world)
        else:
            _arrival(world)
        world.check()
    world.time = t_end
    return world


def apply_policy(world: World) -> None:
    cfg = world.cfg
    decision, relay_ids = epoch_relay_decision(world, cfg)
    old = world.current_relay
    if cfg.policy == "clsss":
        new = relay_ids[decision.best - 1] if decision.best is not None else None
        if new != old:
            if new is not None:
                world.control_messages += 1  # relay assignment notice
            world.current_relay = new
            world.log("relay", relay=new)
        # also catches packets that landed on an old relay after it was replaced
        for r in world.relays:
            if r != new and world.relay_queues[r]:
                shift_packets(world, r, new)
    else:
        if old is not None and not world.nodes[old].alive:
            world.current_relay = old = None
        if old is None and relay_ids and world.nodes[world.source].alive:
            pick = int(world.policy_rng.integers(len(relay_ids)))
            world.current_relay = relay_ids[pick]
            world.control_messages += 1
            world.log("relay", relay=world.current_relay)


def collect_metrics(world: World) -> SimMetrics:
    cfg = world.cfg
    done = [p for p in world.packets if p.delivered_at is not None]
    generated = len(world.packets)
    if done:
        mean_delay = 1000.0 * sum(p.delay for p in done) / len(done)
        mean_service = 1000.0 * sum(p.service_time for p in done) / len(done)
        mean_queue = mean_delay - mean_service
    else:
        mean_delay = mean_service = mean_queue = 0.0
    return SimMetrics(
        mean_delay=mean_delay,
        throughput=sum(p.bytes for p in done) / cfg.sim_time / 1000.0,
        pdr=len(done) / generated if generated else 1.0,
        overhead=world.control_messages / max(len(done), 1),
        energy_consumed=world.debited / len(world.nodes),
        generated=generated,
        delivered=len(done),
        dropped=world.dropped,
        control_messages=world.control_messages,
        mean_queueing_delay=mean_queue,
        mean_service_delay=mean_service,
    )


def run(cfg: SimConfig, *, trace: bool = False, check_invariants: bool = False, return_world: bool = False):
    """Simulate ``cfg.sim_time`` seconds; returns metrics (and the world on request)."""
    world = init_scenario(cfg, trace=trace, check_invariants=check_invariants)
    n_epochs = math.ceil(cfg.sim_time / cfg.epoch - 1e-9)
    for k in range(n_epochs):
        start = k * cfg.epoch
        dt = min(cfg.epoch, cfg.sim_time - start)
        if k > 0:
            advance_mobility(world, cfg.epoch)
        world.time = start
        apply_policy(world)
        world.check()
        transmit_step(world, cfg, dt)
    world.time = cfg.sim_time
    metrics = collect_metrics(world)
    return (metrics, world) if return_world else metrics


def write_trace(world: World, path) -> None:
    with open(path, "w") as fh:
        for rec in world.trace or []:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
