"""Experiment configuration, execution and persistence."""

from .config import EXPERIMENTS, ExperimentConfig, load_config, validate_config
from .experiments import ExperimentResult, run

__all__ = ["EXPERIMENTS", "ExperimentConfig", "ExperimentResult", "load_config", "run", "validate_config"]
