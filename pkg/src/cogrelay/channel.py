"""
Channel model: geometry, distance path loss, Rayleigh fading, noise and dB helpers.

All SNR/SINR arithmetic in the package is linear. dB values only appear at
configuration and reporting boundaries, via ``db_to_linear``/``linear_to_db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]

DEFAULT_ARENA_SIDE = 1000.0


@dataclass(frozen=True)
class NodePosition:
    x: float
    y: float

    def distance_to(self, other: "NodePosition") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def inside(self, width: float = DEFAULT_ARENA_SIDE, height: float | None = None) -> bool:
        height = width if height is None else height
        return 0.0 <= self.x <= width and 0.0 <= self.y <= height


@dataclass(frozen=True)
class PathLossModel:
    """Power-law path loss ``max(d, d0) ** -exponent``; ``d0`` removes the d -> 0 pole."""

    exponent: float = 2.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"path loss exponent must be > 0, got {self.exponent}")
        if not self.reference_distance > 0:
            raise ValueError(f"reference distance must be > 0, got {self.reference_distance}")

    def gain(self, distance):
        """Gain for a scalar or array of distances (meters)."""
        d = np.maximum(distance, self.reference_distance)
        g = d ** (-self.exponent)
        return float(g) if np.ndim(g) == 0 else g


@dataclass(frozen=True)
class FadingCoefficient:
    power_gain: float

    def __post_init__(self):
        if self.power_gain < 0:
            raise ValueError("fading power gain must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    noise_power: float = 1.0  # watts

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ValueError(f"noise power must be > 0, got {self.noise_power}")


@dataclass(frozen=True)
class ChannelRealization:
    """Per-relay power gains |h|^2 for the source->relay and relay->destination hops."""

    source_relay_gains: tuple[float, ...] = ()
    relay_dest_gains: tuple[float, ...] = ()

    def __post_init__(self):
        sr = tuple(float(g) for g in self.source_relay_gains)
        rd = tuple(float(g) for g in self.relay_dest_gains)
        if len(sr) != len(rd):
            raise ValueError(f"gain lists differ in length: {len(sr)} vs {len(rd)}")
        if any(g < 0 for g in sr + rd):
            raise ValueError("power gains must be non-negative")
        object.__setattr__(self, "source_relay_gains", sr)
        object.__setattr__(self, "relay_dest_gains", rd)

    @property
    def relay_count(self) -> int:
        return len(self.source_relay_gains)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def path_loss_gain(distance: float, model: PathLossModel = PathLossModel()) -> float:
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    return model.gain(distance)


def sample_fading(size, rng: SeedLike) -> np.ndarray:
    """Unit-mean exponential power gains (Rayleigh amplitude)."""
    return as_generator(rng).exponential(1.0, size=size)


def sample_channel(relay_count: int, rng_seed: SeedLike = None) -> ChannelRealization:
    """Draw independent Rayleigh power gains for ``relay_count`` two-hop paths.

    The source->relay row is drawn first, then relay->destination, so a given
    seed always maps to the same realization.
    """
    if relay_count < 0:
        raise ValueError("relay_count must be >= 0")
    gains = sample_fading((2, relay_count), rng_seed)
    return ChannelRealization(tuple(gains[0]), tuple(gains[1]))


def snr_of(transmit_power: float, power_gain: float, noise: NoiseModel):
    if np.any(np.asarray(transmit_power) < 0):
        raise ValueError("transmit power must be >= 0")
    return transmit_power * power_gain / noise.noise_power


def db_to_linear(value):
    return 10.0 ** (np.asarray(value, dtype=float) / 10.0) if np.ndim(value) else 10.0 ** (value / 10.0)


def linear_to_db(value):
    arr = np.asarray(value, dtype=float)
    if np.any(arr <= 0):
        raise ValueError(f"linear_to_db needs a positive value, got {value!r}")
    return 10.0 * np.log10(arr) if np.ndim(value) else 10.0 * math.log10(value)
