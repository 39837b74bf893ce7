"""Simulator for jamming-aware geometric routing and learned node roles in a
contested wireless network."""

from .config import ExperimentConfig, load_config
from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    InsufficientDataError,
    JamsimError,
    OutputError,
)
from .harness import MetricsSeries, confidence_band, emit_results, run_experiment
from .world import World

__all__ = [
    "ConfigurationError",
    "DegenerateGeometryError",
    "ExperimentConfig",
    "InsufficientDataError",
    "JamsimError",
    "MetricsSeries",
    "OutputError",
    "World",
    "confidence_band",
    "emit_results",
    "load_config",
    "run_experiment",
]
__version__ = "0.1.0"
