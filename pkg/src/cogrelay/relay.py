"""Amplify-and-forward relay selection.

A relay qualifies when its source->relay SNR clears the threshold (the
candidate set). Among all relays, those with the strongest relay->destination
SNR form the optimal set; the chosen relay is the lowest-indexed member of
both. Relay ids are 1-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from cogrelay.channel import ChannelRealization, NoiseModel, snr_of


@dataclass(frozen=True)
class RelaySelectionConfig:
    source_power: float = 1.0  # watts, also used as the relay's transmit power
    snr_threshold: float = 10.0  # linear
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if not self.source_power > 0:
            raise ValueError("source_power must be > 0")
        if self.snr_threshold < 0:
            raise ValueError("snr_threshold must be >= 0")


@dataclass(frozen=True)
class RelayCandidate:
    index: int
    snr_source_relay: float
    snr_relay_dest: float
    snr_equivalent: float
    amplification: float


@dataclass(frozen=True)
class RelayDecision:
    candidate_set: tuple[int, ...]
    optimal_set: tuple[int, ...]
    best: int | None
    all_candidates: tuple[RelayCandidate, ...]
    # True when the candidate and optimal sets were disjoint and the best
    # relay-to-destination SNR within the candidate set was used instead.
    used_fallback: bool = False

    @property
    def feasible(self) -> bool:
        return self.best is not None

    def candidate(self, relay_id: int) -> RelayCandidate:
        return self.all_candidates[relay_id - 1]


def amplification_factor(source_power: float, gain_sr: float, noise: NoiseModel) -> float:
    """Relay gain sqrt(W / (|h_sr|^2 W + N0)) that normalises the relay's output power."""
    return math.sqrt(source_power / (gain_sr * source_power + noise.noise_power))


def equivalent_af_snr(snr_sr: float, snr_rd: float) -> float:
    if snr_sr < 0 or snr_rd < 0:
        raise ValueError("SNRs must be >= 0")
    return snr_sr * snr_rd / (snr_sr + snr_rd + 1.0)


def build_candidates(realization: ChannelRealization, cfg: RelaySelectionConfig) -> list[RelayCandidate]:
    out = []
    pairs = zip(realization.source_relay_gains, realization.relay_dest_gains)
    for i, (g_sr, g_rd) in enumerate(pairs, start=1):
        eta_sr = snr_of(cfg.source_power, g_sr, cfg.noise)
        eta_rd = snr_of(cfg.source_power, g_rd, cfg.noise)
        out.append(
            RelayCandidate(
                index=i,
                snr_source_relay=eta_sr,
                snr_relay_dest=eta_rd,
                snr_equivalent=equivalent_af_snr(eta_sr, eta_rd),
                amplification=amplification_factor(cfg.source_power, g_sr, cfg.noise),
            )
        )
    return out


def threshold_filter(candidates, cfg: RelaySelectionConfig) -> list[int]:
    return [c.index for c in sorted(candidates, key=lambda c: c.index) if c.snr_source_relay >= cfg.snr_threshold]


def max_snr_set(candidates) -> list[int]:
    if not candidates:
        return []
    top = max(c.snr_relay_dest for c in candidates)
    return sorted(c.index for c in candidates if c.snr_relay_dest == top)


def decide(candidates, cfg: RelaySelectionConfig) -> RelayDecision:
    """Run the set selection over precomputed candidates."""
    candidates = tuple(candidates)
    u = threshold_filter(candidates, cfg)
    v = max_snr_set(candidates)
    both = [i for i in u if i in set(v)]
    fallback = False
    if both:
        best = both[0]
    elif u:
        by_id = {c.index: c for c in candidates}
        # max() keeps the first of equal keys, and u is ascending
        best = max(u, key=lambda i: by_id[i].snr_relay_dest)
        fallback = True
    else:
        best = None
    return RelayDecision(tuple(u), tuple(v), best, candidates, fallback)


def select_best_relay(realization: ChannelRealization, cfg: RelaySelectionConfig) -> RelayDecision:
    return decide(build_candidates(realization, cfg), cfg)
