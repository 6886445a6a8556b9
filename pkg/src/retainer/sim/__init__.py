"""Discrete-event simulation of retainer pools."""

from .config import ConfigError, LatencySpec, SimConfig, check_same_scenario
from .engine import (
    aggregate,
    replicate,
    simulate,
    simulate_abandonment,
    simulate_precruitment,
    simulate_tiered,
)
from .report import Estimate, SimReport, TierReport

__all__ = [
    "ConfigError",
    "LatencySpec",
    "SimConfig",
    "check_same_scenario",
    "aggregate",
    "replicate",
    "simulate",
    "simulate_abandonment",
    "simulate_precruitment",
    "simulate_tiered",
    "Estimate",
    "SimReport",
    "TierReport",
]
