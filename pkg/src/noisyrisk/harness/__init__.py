"""Experiment configuration, method orchestration, persistence and reporting."""

from .config import ConfigError, ExperimentConfig, load_config
from .runner import RunResult, load, persist, run_matrix, run_single

__all__ = ["ConfigError", "ExperimentConfig", "RunResult", "load", "load_config", "persist", "run_matrix", "run_single"]
