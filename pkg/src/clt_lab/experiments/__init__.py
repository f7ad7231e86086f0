"""Config-driven experiments and their reports."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .report import ExperimentReport, write_report
from .runners import RUNNERS, ExperimentError, run_experiment

__all__ = [
    "EXPERIMENTS", "ConfigError", "ExperimentConfig", "load_config", "ExperimentReport", "write_report",
    "RUNNERS", "ExperimentError", "run_experiment",
]
