"""Resilience of RIS-assisted cell-free MIMO downlinks under link blockage.

The steady state runs at the Shannon (infinite blocklength) rate; after a
blockage the network either tolerates the loss or re-optimizes beamformers
and RIS phases for short-packet (finite blocklength) rates, and the episode
is scored with a weighted absorption / adaptation / time-to-recovery metric.
"""

from .model import ConfigError, Regime, SystemConfig
from .scenario import Decision, EpisodeResult, IgnoreBranch, run_episode, sweep

__all__ = [
    "ConfigError",
    "Decision",
    "EpisodeResult",
    "IgnoreBranch",
    "Regime",
    "SystemConfig",
    "run_episode",
    "sweep",
]
