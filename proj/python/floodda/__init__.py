"""Shallow-water flood model with ensemble Kalman filter twin experiments."""

from ._core import (
    AlignmentError,
    Config,
    ConfigError,
    IoError,
    NumericalError,
    __version__,
    csi,
    default_output_root,
    gauge_sigma,
    generate_catchment,
    rmse,
    run_experiment,
    run_suite,
    run_truth,
    synthesize,
    wsr_sigma,
)

__all__ = [
    "AlignmentError",
    "Config",
    "ConfigError",
    "IoError",
    "NumericalError",
    "__version__",
    "csi",
    "default_output_root",
    "gauge_sigma",
    "generate_catchment",
    "rmse",
    "run_experiment",
    "run_suite",
    "run_truth",
    "synthesize",
    "wsr_sigma",
]
