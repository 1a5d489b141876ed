"""Relay selection, spectrum sharing and network simulation for cognitive radio networks."""

from cogrelay.channel import (
    ChannelRealization,
    NodePosition,
    NoiseModel,
    PathLossModel,
    db_to_linear,
    linear_to_db,
    path_loss_gain,
    sample_channel,
    snr_of,
)
from cogrelay.relay import RelayCandidate, RelayDecision, RelaySelectionConfig, select_best_relay
from cogrelay.sharing import ActivationVector, SharingInstance, SharingSolution, brute_force_optimum
from cogrelay.swarm import PsoConfig, optimize

__version__ = "0.1.0"

__all__ = [
    "ActivationVector",
    "ChannelRealization",
    "NodePosition",
    "NoiseModel",
    "PathLossModel",
    "PsoConfig",
    "RelayCandidate",
    "RelayDecision",
    "RelaySelectionConfig",
    "SharingInstance",
    "SharingSolution",
    "brute_force_optimum",
    "db_to_linear",
    "linear_to_db",
    "optimize",
    "path_loss_gain",
    "sample_channel",
    "select_best_relay",
    "snr_of",
]
