"""Distributed Kalman filtering of dynamic fields over sensor networks."""

from .estimators import Problem
from .gains import GainConfig, GainSchedule, precompute_schedule
from .harness import ScenarioConfig, load_config, run, validate
from .model import FieldModel, RngStream, SensorSuite
from .network import SensorNetwork, generate
from .pseudo import build_pseudo_model

__all__ = [
    "FieldModel", "SensorSuite", "RngStream", "SensorNetwork", "generate", "build_pseudo_model",
    "GainConfig", "GainSchedule", "precompute_schedule", "Problem", "ScenarioConfig",
    "load_config", "validate", "run",
]
