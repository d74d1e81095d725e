"""Omni-surface (IOS) channel model, discrete phase optimization and coverage experiments."""

from .channel import (
    ChannelTerms,
    PhaseShiftVector,
    RfConstants,
    channel_terms,
    composite_channel,
    dbm_to_watts,
    expected_channel_power,
    spectral_efficiency,
    watts_to_dbm,
)
from .config import ConfigError, ScenarioConfig, dump_config, load_config
from .experiments import MuRegion, Scenario, SweepPoint, TrialResult, heatmap, size_sweep
from .geometry import GeometryError, PanelGeometry, Point3, Side
from .optimizer import (
    OptimizationResult,
    PhasorProblem,
    branch_and_bound,
    brute_force,
    continuous_optimum,
)

__all__ = [
    "ChannelTerms", "ConfigError", "GeometryError", "MuRegion", "OptimizationResult",
    "PanelGeometry", "PhaseShiftVector", "PhasorProblem", "Point3", "RfConstants",
    "Scenario", "ScenarioConfig", "Side", "SweepPoint", "TrialResult",
    "branch_and_bound", "brute_force", "channel_terms", "composite_channel",
    "continuous_optimum", "dbm_to_watts", "dump_config", "expected_channel_power",
    "heatmap", "load_config", "size_sweep", "spectral_efficiency", "watts_to_dbm",
]
