"""Closed-loop experiment runner and selection metrics."""

from .calibrate import calibrate_snr
from .experiment import (PUBLISHED_GRID, PUBLISHED_REFERENCE, ExperimentConfig, ExperimentReport, check_compatible,
                         format_reference, make_subject, run_experiment, run_selections, run_training_session,
                         with_grid_cell)
from .metrics import dti, itr
from .pipeline import TRANSPORTS, Pipeline, stream_records

__all__ = [
    "PUBLISHED_GRID", "PUBLISHED_REFERENCE", "TRANSPORTS", "ExperimentConfig", "ExperimentReport", "Pipeline",
    "calibrate_snr", "check_compatible", "dti", "format_reference", "itr", "make_subject", "run_experiment",
    "run_selections", "run_training_session", "stream_records", "with_grid_cell",
]
