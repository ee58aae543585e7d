"""Experiment generators, metrics and runners."""
from .config import EXPERIMENTS, default_config, load_config
from .runners import RUNNERS, Report, run

__all__ = ["EXPERIMENTS", "RUNNERS", "Report", "default_config", "load_config", "run"]
