"""Correlation statistics and error-bounded lossy compressibility of 2D fields."""

__version__ = "0.1.0"

from .fields import (Field2D, GrfSpec, generate_grf, generate_half_and_half,
                     load_raw_field, read_field, save_field, white_noise)
from .regression import LogRegression, RegressionFit, fit_groups, fit_log_regression
from .stats import CorrelationStatistics
from .svdstats import local_svd_stats, svd_truncation_level
from .variogram import (VariogramRange, empirical_variogram, fit_range, global_range,
                        local_variogram_stats)

__all__ = [
    "CorrelationStatistics", "Field2D", "GrfSpec", "LogRegression", "RegressionFit",
    "VariogramRange", "empirical_variogram", "fit_groups", "fit_log_regression",
    "fit_range", "generate_grf", "generate_half_and_half", "global_range",
    "load_raw_field", "local_svd_stats", "local_variogram_stats", "read_field",
    "save_field", "svd_truncation_level", "white_noise",
]
