"""Input validation helpers shared by the estimators and functions."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ValidationError


def check_grid(X, *, min_size=2, name="field"):
    """Return ``X`` as a finite, C-contiguous float64 2D array.

    Accepts a :class:`~lossycorr.fields.Field2D` or anything array-like.
    Float32 input is widened. Raises :class:`ValidationError` when the grid
    is smaller than ``min_size`` in either dimension or holds NaN/Inf.
    """
    values = getattr(X, "values", X)
    try:
        arr = check_array(
            values,
            dtype=np.float64,
            order="C",
            ensure_2d=True,
            ensure_min_samples=1,
            ensure_min_features=1,
            input_name=name,
        )
    except ValueError as exc:
        raise ValidationError(f"invalid {name}: {exc}") from exc
    ny, nx = arr.shape
    if ny < min_size or nx < min_size:
        raise ValidationError(
            f"{name} must be at least {min_size}x{min_size}, got {nx}x{ny}"
        )
    return arr


def check_positive(value, name, *, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValidationError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, *, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_window_size(shape, H):
    """Validate a tiling window size against a ``(ny, nx)`` grid shape."""
    from .exceptions import InsufficientDataError

    H = check_int(H, "H", minimum=8)
    ny, nx = shape
    if nx // H < 2 or ny // H < 2:
        raise InsufficientDataError(
            f"window size H={H} leaves fewer than 2x2 complete windows on a "
            f"{nx}x{ny} field"
        )
    return H


def iter_windows(arr, H):
    """Yield ``(row, col, window)`` for complete non-overlapping HxH tiles."""
    ny, nx = arr.shape
    for r in range(ny // H):
        for c in range(nx // H):
            yield r, c, arr[r * H:(r + 1) * H, c * H:(c + 1) * H]
