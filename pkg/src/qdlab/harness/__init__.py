"""Experiment orchestration: configs, runners, sweeps, validation, CLI."""

from .config import ExperimentConfig, config_from_dict, load_config  # noqa: F401
from .runner import RunRecord, run, sweep  # noqa: F401
from .validate import run_validation  # noqa: F401
