"""
Underlay spectrum sharing between N primary links and M secondary links.

Every transmitter uses the common power W. Secondary receiver j sees its own
transmitter, every *active* secondary transmitter and every primary
transmitter; primary receiver i sees its own transmitter and every active
secondary transmitter. Sharing is admissible when all primary SINRs and all
active secondary SINRs reach the floor ``sinr_floor``. The objective is the
sum Shannon capacity of active secondary links plus all primary links, each
evaluated under the interference the activation induces.

Evaluation is vectorised over a batch of activations (rows). Interference is
accumulated one transmitter at a time in index order, so a row evaluates to
the same floats whether it is alone or inside a large batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from cogrelay.channel import NodePosition, NoiseModel, PathLossModel, SeedLike, as_generator

MAX_BRUTE_FORCE_LINKS = 20
_CHUNK = 1 << 14

Link = tuple[NodePosition, NodePosition]


@dataclass(frozen=True)
class ActivationVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"activation entries must be 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def zeros(cls, m: int) -> "ActivationVector":
        return cls((0,) * m)

    @classmethod
    def from_string(cls, s: str) -> "ActivationVector":
        return cls(tuple(int(c) for c in s))

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, j: int) -> int:
        return self.bits[j]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    @property
    def active(self) -> list[int]:
        return [j for j, b in enumerate(self.bits) if b]


@dataclass(frozen=True)
class SharingInstance:
    primary_links: tuple[Link, ...] = ()
    secondary_links: tuple[Link, ...] = ()
    transmit_power: float = 1.0
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    sinr_floor: float = 1.0
    bandwidth: float = 1e6
    arena: tuple[float, float] = (1000.0, 1000.0)

    def __post_init__(self):
        object.__setattr__(self, "primary_links", tuple(_as_link(l) for l in self.primary_links))
        object.__setattr__(self, "secondary_links", tuple(_as_link(l) for l in self.secondary_links))
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")
        if self.sinr_floor < 0:
            raise ValueError("sinr_floor must be >= 0")
        if self.transmit_power < 0:
            raise ValueError("transmit_power must be >= 0")
        w, h = self.arena
        for tx, rx in self.primary_links + self.secondary_links:
            if not (tx.inside(w, h) and rx.inside(w, h)):
                raise ValueError(f"link endpoint outside the {w}x{h} arena: {tx}, {rx}")

    @property
    def n_primary(self) -> int:
        return len(self.primary_links)

    @property
    def n_secondary(self) -> int:
        return len(self.secondary_links)

    def with_secondary_prefix(self, k: int) -> "SharingInstance":
        """Same instance restricted to the first ``k`` secondary links."""
        if not 0 <= k <= self.n_secondary:
            raise ValueError(f"prefix {k} out of range 0..{self.n_secondary}")
        return replace(self, secondary_links=self.secondary_links[:k])

    def with_sinr_floor(self, floor: float) -> "SharingInstance":
        return replace(self, sinr_floor=floor)

    # Received powers W * gain, indexed [transmitter, receiver].
    @cached_property
    def _powers(self):
        w, pl = self.transmit_power, self.path_loss
        s_tx = _coords(l[0] for l in self.secondary_links)
        s_rx = _coords(l[1] for l in self.secondary_links)
        p_tx = _coords(l[0] for l in self.primary_links)
        p_rx = _coords(l[1] for l in self.primary_links)
        ss = w * pl.gain(_pairwise(s_tx, s_rx))  # secondary tx l -> secondary rx j
        ps = w * pl.gain(_pairwise(p_tx, s_rx))  # primary tx i -> secondary rx j
        sp = w * pl.gain(_pairwise(s_tx, p_rx))  # secondary tx l -> primary rx i
        pp = w * pl.gain(_pairwise(p_tx, p_rx))
        sec_signal = np.diag(ss).copy()
        pri_signal = np.diag(pp).copy()
        ss_cross = ss.copy()
        np.fill_diagonal(ss_cross, 0.0)
        sec_floor = np.full(self.n_secondary, self.noise.noise_power)
        for i in range(self.n_primary):
            sec_floor = sec_floor + ps[i]
        return sec_signal, ss_cross, sec_floor, pri_signal, sp

    def evaluate(self, rows) -> tuple[np.ndarray, np.ndarray]:
        """SINRs for a batch of activations.

        Returns ``(secondary, primary)`` arrays of shape (K, M) and (K, N).
        Secondary entries of inactive links are what the link *would* see if
        it transmitted; callers mask them.
        """
        y = _as_rows(rows, self.n_secondary)
        sec_signal, ss_cross, sec_floor, pri_signal, sp = self._powers
        k = y.shape[0]
        sec_interf = np.broadcast_to(sec_floor, (k, self.n_secondary)).copy()
        pri_interf = np.full((k, self.n_primary), self.noise.noise_power)
        for l in range(self.n_secondary):
            on = y[:, l : l + 1]
            sec_interf += on * ss_cross[l]
            pri_interf += on * sp[l]
        return sec_signal / sec_interf, pri_signal / pri_interf

    def assess(self, rows):
        """Objective (bits/s) and violated-constraint counts for a batch."""
        y = _as_rows(rows, self.n_secondary)
        sec, pri = self.evaluate(y)
        bw = self.bandwidth
        total = np.zeros(y.shape[0])
        for j in range(self.n_secondary):
            total += y[:, j] * (bw * np.log2(1.0 + sec[:, j]))
        for i in range(self.n_primary):
            total += bw * np.log2(1.0 + pri[:, i])
        floor = self.sinr_floor
        violations = (pri < floor).sum(axis=1) + ((sec < floor) & (y > 0)).sum(axis=1)
        return total, violations


@dataclass(frozen=True)
class SinrReport:
    secondary_sinr: tuple[float, ...]  # active links only, in index order
    primary_sinr: tuple[float, ...]


@dataclass(frozen=True)
class SharingSolution:
    activation: ActivationVector
    objective: float
    feasible: bool
    report: SinrReport


def _as_link(link) -> Link:
    tx, rx = link
    return (_as_pos(tx), _as_pos(rx))


def _as_pos(p) -> NodePosition:
    if isinstance(p, NodePosition):
        return p
    x, y = p
    return NodePosition(float(x), float(y))


def _coords(points) -> np.ndarray:
    pts = [(p.x, p.y) for p in points]
    return np.array(pts, dtype=float).reshape(-1, 2)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def _as_rows(rows, m: int) -> np.ndarray:
    if isinstance(rows, ActivationVector):
        rows = rows.bits
    y = np.asarray(rows, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[1] != m:
        raise ValueError(f"activation length {y.shape[1]} != {m} secondary links")
    return y


def _single(instance: SharingInstance, activation):
    return _as_rows(activation, instance.n_secondary)


def secondary_sinr(instance: SharingInstance, activation, j: int) -> float:
    y = _single(instance, activation)
    if y[0, j] != 1:
        raise ValueError(f"secondary link {j} is not active")
    sec, _ = instance.evaluate(y)
    return float(sec[0, j])


def primary_sinr(instance: SharingInstance, activation, i: int) -> float:
    """SINR at primary receiver ``i`` (0-based)."""
    if not 0 <= i < instance.n_primary:
        raise IndexError(f"primary index {i} out of range")
    _, pri = instance.evaluate(_single(instance, activation))
    return float(pri[0, i])


def sinr_report(instance: SharingInstance, activation) -> SinrReport:
    y = _single(instance, activation)
    sec, pri = instance.evaluate(y)
    active = [j for j in range(instance.n_secondary) if y[0, j]]
    return SinrReport(tuple(float(sec[0, j]) for j in active), tuple(float(v) for v in pri[0]))


def violations(instance: SharingInstance, activation) -> int:
    _, v = instance.assess(_single(instance, activation))
    return int(v[0])


def is_feasible(instance: SharingInstance, activation) -> bool:
    return violations(instance, activation) == 0


def link_capacity(bandwidth: float, sinr: float) -> float:
    if sinr < 0:
        raise ValueError("sinr must be >= 0")
    return bandwidth * math.log2(1.0 + sinr)


def objective(instance: SharingInstance, activation) -> float:
    total, _ = instance.assess(_single(instance, activation))
    return float(total[0])


def solution_for(instance: SharingInstance, activation) -> SharingSolution:
    act = activation if isinstance(activation, ActivationVector) else ActivationVector(tuple(activation))
    total, viol = instance.assess(_single(instance, act))
    return SharingSolution(act, float(total[0]), bool(viol[0] == 0), sinr_report(instance, act))


def enumerate_activations(m: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop-1`` of all 2^m bit-strings in lexicographic order (bit 0 most significant)."""
    stop = (1 << m) if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def brute_force_optimum(instance: SharingInstance) -> SharingSolution:
    """Best feasible activation by full enumeration.

    Ties go to the lexicographically smallest bit-string. If nothing is
    feasible the all-zeros activation is returned, flagged infeasible.
    """
    m = instance.n_secondary
    if m > MAX_BRUTE_FORCE_LINKS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_LINKS} secondary links, got {m}")
    best_code, best_val = None, -math.inf
    total = 1 << m
    for start in range(0, total, _CHUNK):
        rows = enumerate_activations(m, start, min(start + _CHUNK, total))
        vals, viol = instance.assess(rows)
        vals = np.where(viol == 0, vals, -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_code, best_val = start + k, float(vals[k])
    if best_code is None:
        return solution_for(instance, ActivationVector.zeros(m))
    bits = enumerate_activations(m, best_code, best_code + 1)[0]
    return solution_for(instance, ActivationVector(tuple(bits)))


def interference_free_bound(instance: SharingInstance) -> float:
    """Objective upper bound: every link at its stand-alone SNR."""
    sec_signal, _, _, pri_signal, _ = instance._powers
    n0, bw = instance.noise.noise_power, instance.bandwidth
    return float(sum(bw * math.log2(1.0 + s / n0) for s in list(sec_signal) + list(pri_signal)))


def random_instance(
    rng: SeedLike,
    primary_count: int = 2,
    secondary_count: int = 10,
    *,
    arena: tuple[float, float] = (1000.0, 1000.0),
    primary_length: tuple[float, float] = (20.0, 80.0),
    secondary_length: tuple[float, float] = (20.0, 80.0),
    transmit_power: float = 1.0,
    path_loss: PathLossModel = PathLossModel(),
    noise: NoiseModel = NoiseModel(1e-7),
    sinr_floor: float = 10.0,
    bandwidth: float = 1e6,
) -> SharingInstance:
    """Random geometry: transmitters uniform in the arena, receivers at a random
    bearing and link length, clipped to the arena.

    Primaries are drawn first, then secondaries one link at a time, so
    instances that differ only in ``secondary_count`` share their leading
    links for the same seed.
    """
    gen = as_generator(rng)

    def draw(count, lengths):
        links = []
        for _ in range(count):
            tx = gen.uniform((0.0, 0.0), arena)
            r = gen.uniform(*lengths)
            theta = gen.uniform(0.0, 2.0 * math.pi)
            rx = np.clip(tx + r * np.array([math.cos(theta), math.sin(theta)]), (0.0, 0.0), arena)
            links.append((NodePosition(*map(float, tx)), NodePosition(*map(float, rx))))
        return tuple(links)

    primaries = draw(primary_count, primary_length)
    secondaries = draw(secondary_count, secondary_length)
    return SharingInstance(
        primary_links=primaries,
        secondary_links=secondaries,
        transmit_power=transmit_power,
        path_loss=path_loss,
        noise=noise,
        sinr_floor=sinr_floor,
        bandwidth=bandwidth,
        arena=arena,
    )


def instance_to_dict(instance: SharingInstance) -> dict:
    def links(ls: Sequence[Link]):
        return [{"tx": [tx.x, tx.y], "rx": [rx.x, rx.y]} for tx, rx in ls]

    return {
        "primary_links": links(instance.primary_links),
        "secondary_links": links(instance.secondary_links),
        "transmit_power": instance.transmit_power,
        "path_loss": {
            "exponent": instance.path_loss.exponent,
            "reference_distance": instance.path_loss.reference_distance,
        },
        "noise_power": instance.noise.noise_power,
        "sinr_floor": instance.sinr_floor,
        "bandwidth": instance.bandwidth,
        "arena": list(instance.arena),
    }
