"""Compressed-sensing reconstruction of a coherently driven cavity field."""

from .config import ConfigError, config_to_dict, parse_config
from .experiments import (ExperimentConfig, ExperimentError, RecoverySettings, SweepReport,
                          compression_ratio, nyquist_baseline, run_recovery_experiment,
                          success_sweep)
from .recovery import (CompressedSensingRecovery, DCTTransformer, OrthogonalMatchingPursuit,
                       RecoveryConfig, dct_matrix, min_measurements, mse, omp, recover_beta,
                       sparsity_estimate)
from .sensing import (FlipSchedule, MeasurementVector, SensingMatrix, build_matrix, build_row,
                      measure, sample_flip_schedule, simulate_measurement)
from .signal_model import (ComplexSeries, DomainError, NoiseSpec, RandomSmooth, SquarePulse,
                           Tabulated, TimeGrid, accumulate_alpha, discretize_beta, eval_drive,
                           integrate_alpha)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "config_to_dict", "parse_config",
    "ExperimentConfig", "ExperimentError", "RecoverySettings", "SweepReport",
    "compression_ratio", "nyquist_baseline", "run_recovery_experiment", "success_sweep",
    "CompressedSensingRecovery", "DCTTransformer", "OrthogonalMatchingPursuit",
    "RecoveryConfig", "dct_matrix", "min_measurements", "mse", "omp", "recover_beta",
    "sparsity_estimate",
    "FlipSchedule", "MeasurementVector", "SensingMatrix", "build_matrix", "build_row",
    "measure", "sample_flip_schedule", "simulate_measurement",
    "ComplexSeries", "DomainError", "NoiseSpec", "RandomSmooth", "SquarePulse", "Tabulated",
    "TimeGrid", "accumulate_alpha", "discretize_beta", "eval_drive", "integrate_alpha",
]
