"""Experiment configs, the sweep runner, report emission and the command line."""

from .config import KINDS, ExperimentConfig
from .report import emit_report
from .runner import ResultRecord, run_experiment, save_record

__all__ = ["KINDS", "ExperimentConfig", "ResultRecord", "emit_report", "run_experiment", "save_record"]
