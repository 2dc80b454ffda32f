"""Logarithmic regression of compression ratio on a correlation statistic.

Model: ``cr = alpha + beta * ln(x) + eps``, fitted by ordinary least squares,
one fit per ``(codec, eb)`` group.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import InsufficientDataError, RankDeficiencyError, ValidationError

PREDICTORS = ("global_range", "local_vario_std", "local_svd_std")
FIT_COLUMNS = ("codec", "eb", "predictor", "alpha", "beta", "r2", "residual_std", "n")


class DomainError(ValidationError):
    """A predictor value is outside the domain of the logarithm."""


@dataclass
class RegressionFit:
    alpha: float
    beta: float
    n: int
    r_squared: float
    residual_std: float
    alpha_se: float = math.nan
    beta_se: float = math.nan
    predictor_name: str = "x"
    group: Optional[tuple] = None
    log_base: str = "e"

    def predict(self, x):
        return self.alpha + self.beta * np.log(np.asarray(x, dtype=np.float64))

    def to_row(self) -> dict:
        codec, eb = self.group if self.group else ("", math.nan)
        return {"codec": codec, "eb": eb, "predictor": self.predictor_name,
                "alpha": self.alpha, "beta": self.beta, "r2": self.r_squared,
                "residual_std": self.residual_std, "n": self.n}


def fit_log_regression(x, cr=None, predictor_name="x", group=None) -> RegressionFit:
    """OLS fit of ``cr`` on ``ln(x)``.

    ``x`` may also be a sequence of ``(x, cr)`` pairs when ``cr`` is omitted.
    """
    if cr is None:
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        x, cr = pts[:, 0], pts[:, 1]
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(cr, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValidationError(f"x and cr lengths differ: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("x and cr must be finite")
    if np.any(x <= 0):
        raise DomainError("log regression needs every x > 0")
    lx = np.log(x)
    xm, ym = lx.mean(), y.mean()
    dx, dy = lx - xm, y - ym
    sxx = float(dx @ dx)
    if sxx <= 1e-300 * n or np.unique(x).size < 2:
        raise RankDeficiencyError("log regression needs at least two distinct x values")
    beta = float(dx @ dy) / sxx
    alpha = float(ym - beta * xm)
    resid = y - (alpha + beta * lx)
    ss_res = float(resid @ resid)
    ss_tot = float(dy @ dy)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    s = math.sqrt(ss_res / (n - 2))
    return RegressionFit(
        alpha=alpha,
        beta=beta,
        n=n,
        r_squared=r2,
        residual_std=s,
        alpha_se=s * math.sqrt(1.0 / n + xm * xm / sxx),
        beta_se=s / math.sqrt(sxx),
        predictor_name=predictor_name,
        group=group,
    )


class LogRegression(RegressorMixin, BaseEstimator):
    """``y = alpha + beta * ln(x)`` as a scikit-learn regressor (one feature)."""

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValidationError(f"LogRegression takes one feature, got {X.shape[1]}")
        self.fit_ = fit_log_regression(X[:, 0], y)
        self.alpha_ = self.fit_.alpha
        self.beta_ = self.fit_.beta
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = validate_data(self, X, reset=False)
        if np.any(X <= 0):
            raise DomainError("log regression needs every x > 0")
        return self.fit_.predict(X[:, 0])


# --------------------------------------------------------------------------
# Grouped fits over sweep records
# --------------------------------------------------------------------------

@dataclass
class GroupedFits:
    fits: list = field(default_factory=list)
    points: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)


def predictor_column(columns, predictor_name):
    """Resolve a predictor name to a records column (``local_*`` carry ``_H{H}``)."""
    if predictor_name not in PREDICTORS:
        raise ValidationError(f"unknown predictor {predictor_name!r}; expected one of {PREDICTORS}")
    if predictor_name == "global_range":
        return "global_range" if "global_range" in columns else None
    prefix = predictor_name + "_H"
    matches = sorted(c for c in columns if c.startswith(prefix))
    return matches[0] if matches else None


def _as_float(value):
    if value is None or value == "":
        return math.nan
    try:
        return float(value)
    except (TypeError, ValueError):
        return math.nan


def fit_groups(records: Iterable[Mapping], predictor_name, column=None) -> GroupedFits:
    """One log fit per ``(codec, eb)`` group; failing groups are reported, not raised."""
    records = list(records)
    if predictor_name not in PREDICTORS:
        raise ValidationError(f"unknown predictor {predictor_name!r}; expected one of {PREDICTORS}")
    out = GroupedFits()
    if not records:
        out.skipped.append((None, "no records"))
        return out
    if column is None:
        column = predictor_column(records[0].keys(), predictor_name)
    if column is None:
        out.skipped.append((None, f"records carry no {predictor_name} column"))
        return out
    groups = {}
    for rec in records:
        key = (str(rec["codec"]), float(rec["eb"]))
        x, cr = _as_float(rec.get(column)), _as_float(rec.get("cr"))
        groups.setdefault(key, []).append((x, cr))
    for key in sorted(groups):
        pts = np.array(groups[key], dtype=np.float64)
        usable = pts[np.isfinite(pts).all(axis=1) & (pts[:, 0] > 0)]
        out.points[key] = usable
        try:
            fit = fit_log_regression(usable[:, 0], usable[:, 1], predictor_name, key)
        except (InsufficientDataError, RankDeficiencyError) as exc:
            out.skipped.append((key, str(exc)))
            continue
        out.fits.append(fit)
    return out


def format_value(v):
    """Shortest round-tripping text for floats, locale-free."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_fits_csv(fits, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(FIT_COLUMNS)
    for fit in fits:
        row = fit.to_row()
        writer.writerow([format_value(row[c]) for c in FIT_COLUMNS])
