"""Scenario engine: configuration, decision pipelines, simulation and metrics."""

from .adversary import apply_adversary, byzantine_ids
from .config import AdversaryProfile, ConfigError, Scenario, load_scenario, parse_scenario
from .decide import closest_approach, decide, reflexive_maneuver, steer
from .metrics import MetricsReport, RunEvents, compute_metrics, write_csv
from .missions import MissionSpec, generate_missions
from .runner import Simulation, baseline_pipelines, run_scenario

__all__ = [
    "AdversaryProfile", "ConfigError", "MetricsReport", "MissionSpec", "RunEvents", "Scenario", "Simulation",
    "apply_adversary", "baseline_pipelines", "byzantine_ids", "closest_approach", "compute_metrics", "decide",
    "generate_missions", "load_scenario", "parse_scenario", "reflexive_maneuver", "run_scenario", "steer",
    "write_csv",
]
