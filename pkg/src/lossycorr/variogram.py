"""Empirical semi-variograms, squared-exponential range fits, local ranges.

The empirical estimator bins unordered grid-point pairs by their rounded
Euclidean distance ``b`` and reports

    gamma(b) = 1 / (2 N_b) * sum (z(x_i) - z(x_j))^2

over the ``N_b`` sampled pairs in the bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_grid, check_int, check_window_size
from .exceptions import DegenerateFieldError, InsufficientDataError, ValidationError

MODEL_FORMS = ("a_squared", "a_linear")
MAX_PAIR_OPERATIONS = 10 ** 8
# below this many pair operations bin sums are correctly rounded (math.fsum),
# so the result does not depend on pair visitation order
EXACT_SUM_LIMIT = 10 ** 6
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class VariogramEstimate:
    lags: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    max_lag: float
    stride: int

    @property
    def bins(self):
        return [(float(h), float(g), int(n)) for h, g, n in zip(self.lags, self.gamma, self.counts)]

    def to_dict(self) -> dict:
        return {"bins": [list(b) for b in self.bins], "max_lag": self.max_lag, "stride": self.stride}


@dataclass
class FittedVariogram:
    sill: float
    range: float
    weighted_rss: float
    model_form: str = "a_squared"

    def predict(self, h):
        h = np.asarray(h, dtype=np.float64)
        return self.sill * (1.0 - np.exp(-h * h / _scale(self.range, self.model_form)))

    def to_dict(self) -> dict:
        return {"c0": self.sill, "a": self.range, "model_form": self.model_form,
                "weighted_rss": self.weighted_rss}


@dataclass
class LocalStats:
    """Per-window statistic on a tiling of the field, with population moments."""

    window_size: int
    statistic_name: str
    values: np.ndarray
    mean: float
    std: float
    params: dict = field(default_factory=dict)

    @classmethod
    def from_grid(cls, window_size, statistic_name, values, **params):
        values = np.asarray(values, dtype=np.float64)
        return cls(window_size, statistic_name, values,
                   float(values.mean()), float(values.std()), params)

    def to_dict(self) -> dict:
        d = {"statistic_name": self.statistic_name, "H": self.window_size}
        d.update(self.params)
        d.update(values=self.values.ravel().tolist(), shape=list(self.values.shape),
                 mean=self.mean, std=self.std)
        return d


def _scale(a, model_form):
    return a * a if model_form == "a_squared" else a


def lag_offsets(max_lag):
    """Half-plane offsets ``(dx, dy)`` with ``0 < dx^2 + dy^2 <= max_lag^2``.

    Each unordered pair of grid points is reached by exactly one offset.
    Returns the offset arrays and their rounded-distance bin.
    """
    r = int(math.floor(max_lag))
    dy, dx = np.mgrid[-r:r + 1, 0:r + 1]
    dx, dy = dx.ravel(), dy.ravel()
    d = np.sqrt((dx * dx + dy * dy).astype(np.float64))
    keep = ((dx > 0) | (dy > 0)) & (d <= max_lag)
    dx, dy, d = dx[keep], dy[keep], d[keep]
    # d^2 is an integer so d is never exactly k + 0.5
    bins = np.rint(d).astype(np.int64)
    return dx, dy, bins


def auto_stride(shape, max_lag, budget=MAX_PAIR_OPERATIONS):
    """Smallest anchor stride keeping the pair-operation estimate under budget."""
    ny, nx = shape
    n_offsets = len(lag_offsets(max_lag)[0])
    s = 1
    while n_offsets * math.ceil(ny / s) * math.ceil(nx / s) > budget:
        s += 1
    return s


def _variogram_sums(blocks, max_lag, stride):
    """Binned squared-difference sums over the last two axes of ``blocks``.

    Leading axes are independent windows that share pair geometry, so counts
    are returned once. Offsets are visited in a fixed order.
    """
    h, w = blocks.shape[-2:]
    dx, dy, bins = lag_offsets(max_lag)
    nbins = int(bins.max()) + 1 if len(bins) else 1
    sums = np.zeros(blocks.shape[:-2] + (nbins,))
    counts = np.zeros(nbins, dtype=np.int64)
    s = stride
    for ox, oy, b in zip(dx.tolist(), dy.tolist(), bins.tolist()):
        r0 = -(-max(0, -oy) // s) * s
        r1 = h - max(0, oy)
        c1 = w - ox
        if r0 >= r1 or c1 <= 0:
            continue
        a = blocks[..., r0:r1:s, 0:c1:s]
        p = blocks[..., r0 + oy:r1 + oy:s, ox:c1 + ox:s]
        d = a - p
        sums[..., b] += np.einsum("...ij,...ij->...", d, d)
        counts[b] += a.shape[-2] * a.shape[-1]
    return sums, counts


def _variogram_sums_exact(z, max_lag, stride):
    """:func:`_variogram_sums` for one 2D field with correctly rounded bin sums."""
    h, w = z.shape
    dx, dy, bins = lag_offsets(max_lag)
    nbins = int(bins.max()) + 1 if len(bins) else 1
    terms = [[] for _ in range(nbins)]
    counts = np.zeros(nbins, dtype=np.int64)
    s = stride
    for ox, oy, b in zip(dx.tolist(), dy.tolist(), bins.tolist()):
        r0 = -(-max(0, -oy) // s) * s
        r1 = h - max(0, oy)
        c1 = w - ox
        if r0 >= r1 or c1 <= 0:
            continue
        d = z[r0:r1:s, 0:c1:s] - z[r0 + oy:r1 + oy:s, ox:c1 + ox:s]
        terms[b].append((d * d).ravel())
        counts[b] += d.size
    sums = np.array([math.fsum(np.concatenate(t)) if t else 0.0 for t in terms])
    return sums, counts


def empirical_variogram(field, max_lag, stride=1) -> VariogramEstimate:
    """Binned empirical semi-variogram of a 2D field.

    Pairs come from every offset within ``max_lag`` of an anchor; anchors are
    every ``stride``-th grid point in each direction (``stride=1`` uses all
    pairs). Bins with no sampled pair are omitted. Small problems get
    correctly rounded bin sums.
    """
    z = check_grid(field)
    ny, nx = z.shape
    stride = check_int(stride, "stride", minimum=1)
    max_lag = float(max_lag)
    diag = math.hypot(nx - 1, ny - 1)
    if not (math.isfinite(max_lag) and 1 <= max_lag <= diag):
        raise ValidationError(f"max_lag must lie in [1, {diag:.4g}], got {max_lag}")
    n_ops = len(lag_offsets(max_lag)[0]) * math.ceil(ny / stride) * math.ceil(nx / stride)
    if n_ops <= EXACT_SUM_LIMIT:
        sums, counts = _variogram_sums_exact(z, max_lag, stride)
    else:
        sums, counts = _variogram_sums(z, max_lag, stride)
    return _to_estimate(sums, counts, max_lag, stride)


def _to_estimate(sums, counts, max_lag, stride):
    keep = counts > 0
    keep[0] = False
    lags = np.flatnonzero(keep).astype(np.float64)
    n = counts[keep]
    gamma = sums[..., keep] / (2.0 * n)
    return VariogramEstimate(lags, gamma, n, max_lag, stride)


def _rss_profile(h2, gamma, weights, scales):
    """Weighted RSS with the closed-form sill, for each candidate scale."""
    f = 1.0 - np.exp(-h2[None, :] / scales[:, None])
    wf = weights * f
    c0 = (wf * gamma).sum(axis=1) / (wf * f).sum(axis=1)
    resid = gamma[None, :] - c0[:, None] * f
    return (weights * resid * resid).sum(axis=1), c0


def golden_section(fun, lo, hi, rtol=1e-6, max_iter=200):
    """Minimize a unimodal scalar function on ``[lo, hi]``.

    Stops when the bracket width drops below ``rtol`` times its midpoint.
    """
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if hi - lo <= rtol * 0.5 * (hi + lo):
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = fun(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = fun(x2)
    return x1 if f1 <= f2 else x2


def search_interval(max_lag, model_form):
    hi = 4.0 * max_lag
    if model_form == "a_linear":
        hi = hi * hi
    return 0.5, hi


def fit_range(v: VariogramEstimate, model_form="a_squared") -> FittedVariogram:
    """Weighted least-squares fit of ``c0 * (1 - exp(-h^2 / D))``.

    ``D = a^2`` for ``model_form="a_squared"`` and ``D = a`` for
    ``"a_linear"``. Weights are the bin pair counts. The sill is solved in
    closed form for each trial range; the range is located on a log grid
    and refined by golden-section search.
    """
    if model_form not in MODEL_FORMS:
        raise ValidationError(f"model_form must be one of {MODEL_FORMS}, got {model_form!r}")
    gamma = np.asarray(v.gamma, dtype=np.float64)
    if gamma.ndim != 1 or len(gamma) < 3:
        raise InsufficientDataError(f"need at least 3 variogram bins, got {len(gamma)}")
    if not np.any(gamma > 0):
        raise DegenerateFieldError("all variogram values are zero (constant field)")
    h = np.asarray(v.lags, dtype=np.float64)
    h2 = h * h
    weights = np.asarray(v.counts, dtype=np.float64)
    weights = weights / weights.sum()

    lo, hi = search_interval(v.max_lag, model_form)
    grid = np.geomspace(lo, hi, 65)
    rss, _ = _rss_profile(h2, gamma, weights, _scale(grid, model_form))
    i = int(np.argmin(rss))
    left, right = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]

    def objective(a):
        return float(_rss_profile(h2, gamma, weights, np.array([_scale(a, model_form)]))[0][0])

    a = golden_section(objective, left, right)
    rss_a, c0 = _rss_profile(h2, gamma, weights, np.array([_scale(a, model_form)]))
    # report RSS in units of raw pair counts
    total = float(np.sum(v.counts))
    return FittedVariogram(float(c0[0]), float(a), float(rss_a[0]) * total, model_form)


def default_max_lag(shape):
    return min(shape) / 4.0


def global_range(field, max_lag=None, stride="auto", model_form="a_squared") -> FittedVariogram:
    """Fitted range of the whole-field variogram."""
    z = check_grid(field)
    if max_lag is None:
        max_lag = default_max_lag(z.shape)
    if stride == "auto":
        stride = auto_stride(z.shape, max_lag)
    return fit_range(empirical_variogram(z, max_lag, stride), model_form)


def window_variograms(field, H, max_lag=None):
    """Empirical variograms of every complete HxH tile, computed jointly.

    Returns ``(lags, gamma, counts)`` where ``gamma`` has shape
    ``(rows, cols, nbins)``.
    """
    z = check_grid(field)
    H = check_window_size(z.shape, H)
    if max_lag is None:
        max_lag = H / 2.0
    nwy, nwx = z.shape[0] // H, z.shape[1] // H
    blocks = z[:nwy * H, :nwx * H].reshape(nwy, H, nwx, H).transpose(0, 2, 1, 3)
    sums, counts = _variogram_sums(blocks, float(max_lag), 1)
    est = _to_estimate(sums, counts, float(max_lag), 1)
    return est


def local_variogram_stats(field, H=32, model_form="a_squared") -> LocalStats:
    """Fitted range per HxH tile, with population mean and standard deviation.

    Tiles whose variogram is identically zero record the saturated range
    ``H / 2``.
    """
    est = window_variograms(field, H)
    nwy, nwx = est.gamma.shape[:2]
    ranges = np.empty((nwy, nwx))
    for r in range(nwy):
        for c in range(nwx):
            v = VariogramEstimate(est.lags, est.gamma[r, c], est.counts, est.max_lag, 1)
            try:
                ranges[r, c] = fit_range(v, model_form).range
            except DegenerateFieldError:
                ranges[r, c] = est.max_lag
    return LocalStats.from_grid(H, "local_vario_range", ranges, model_form=model_form)


class VariogramRange(BaseEstimator):
    """Estimator wrapper around :func:`global_range`.

    ``fit`` takes a single 2D field and sets ``variogram_``, ``range_`` and
    ``sill_``.
    """

    def __init__(self, max_lag=None, stride="auto", model_form="a_squared"):
        self.max_lag = max_lag
        self.stride = stride
        self.model_form = model_form

    def fit(self, X, y=None):
        z = check_grid(X)
        max_lag = default_max_lag(z.shape) if self.max_lag is None else self.max_lag
        stride = auto_stride(z.shape, max_lag) if self.stride == "auto" else self.stride
        self.variogram_ = empirical_variogram(z, max_lag, stride)
        self.fit_ = fit_range(self.variogram_, self.model_form)
        self.range_ = self.fit_.range
        self.sill_ = self.fit_.sill
        return self

    def predict(self, h):
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "fit_")
        return self.fit_.predict(h)
