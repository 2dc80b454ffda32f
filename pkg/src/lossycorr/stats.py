"""Correlation statistics of whole fields, as a function and a transformer."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_grid
from .exceptions import DegenerateFieldError, ValidationError
from .svdstats import local_svd_stats
from .variogram import global_range, local_variogram_stats

STATISTICS = ("global_range", "local_vario_std", "local_svd_std")


def statistic_column(name, H=32):
    """Records-table column for a statistic (local ones carry their window)."""
    if name == "global_range":
        return name
    if name in ("local_vario_std", "local_svd_std"):
        return f"{name}_H{int(H)}"
    raise ValidationError(f"unknown statistic {name!r}; expected one of {STATISTICS}")


def compute_statistic(field, name, H=32, threshold=0.99, model_form="a_squared"):
    """Scalar value of one statistic; NaN for a degenerate global variogram."""
    if name == "global_range":
        try:
            return global_range(field, model_form=model_form).range
        except DegenerateFieldError:
            return float("nan")
    if name == "local_vario_std":
        return local_variogram_stats(field, H, model_form=model_form).std
    if name == "local_svd_std":
        return local_svd_stats(field, H, threshold).std
    raise ValidationError(f"unknown statistic {name!r}; expected one of {STATISTICS}")


class CorrelationStatistics(TransformerMixin, BaseEstimator):
    """Map each field in ``X`` to a row of correlation statistics.

    Stateless: ``fit`` only records the output feature names. Rows can feed
    :class:`~lossycorr.regression.LogRegression` inside a pipeline.
    """

    def __init__(self, statistics=STATISTICS, window_size=32, threshold=0.99,
                 model_form="a_squared"):
        self.statistics = statistics
        self.window_size = window_size
        self.threshold = threshold
        self.model_form = model_form

    def fit(self, X=None, y=None):
        for name in self.statistics:
            statistic_column(name, self.window_size)
        self.n_features_out_ = len(self.statistics)
        return self

    def transform(self, X):
        if isinstance(X, np.ndarray) and X.ndim == 2:
            X = [X]
        rows = []
        for field in X:
            z = check_grid(field)
            rows.append([
                compute_statistic(z, name, self.window_size, self.threshold, self.model_form)
                for name in self.statistics
            ])
        return np.array(rows, dtype=np.float64).reshape(len(rows), len(self.statistics))

    def get_feature_names_out(self, input_features=None):
        return np.array([statistic_column(n, self.window_size) for n in self.statistics],
                        dtype=object)
