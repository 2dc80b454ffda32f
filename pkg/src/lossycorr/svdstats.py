"""Local SVD truncation levels.

For each HxH window the truncation level is the smallest number of singular
modes whose squared singular values reach ``threshold`` of the window's
total energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_grid, check_window_size
from .exceptions import ValidationError
from .variogram import LocalStats


@dataclass(frozen=True)
class TruncationLevel:
    k: int
    energy_fraction: float


def _check_threshold(threshold):
    threshold = float(threshold)
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {threshold}")
    return threshold


def truncation_from_singular_values(s, threshold) -> TruncationLevel:
    energy = np.square(np.asarray(s, dtype=np.float64))
    total = energy.sum()
    if total == 0.0:
        return TruncationLevel(1, 1.0)
    fraction = np.cumsum(energy) / total
    k = int(np.searchsorted(fraction, threshold, side="left")) + 1
    # cumulative rounding can leave the last entry a hair below 1
    k = min(k, len(fraction))
    return TruncationLevel(k, float(fraction[k - 1]))


def svd_truncation_level(window, threshold=0.99, center=True) -> TruncationLevel:
    """Truncation level of one window.

    With ``center=True`` (default) the window mean is removed first, so the
    energy is the window's variance; ``center=False`` uses raw energy.
    """
    threshold = _check_threshold(threshold)
    w = check_grid(window, name="window")
    if center:
        w = w - w.mean()
    s = np.linalg.svd(w, compute_uv=False)
    return truncation_from_singular_values(s, threshold)


def local_svd_stats(field, H=32, threshold=0.99, center=True) -> LocalStats:
    """Per-window truncation levels on the complete HxH tiling."""
    threshold = _check_threshold(threshold)
    z = check_grid(field)
    H = check_window_size(z.shape, H)
    nwy, nwx = z.shape[0] // H, z.shape[1] // H
    blocks = z[:nwy * H, :nwx * H].reshape(nwy, H, nwx, H).transpose(0, 2, 1, 3)
    if center:
        blocks = blocks - blocks.mean(axis=(2, 3), keepdims=True)
    s = np.linalg.svd(blocks, compute_uv=False)
    levels = np.empty((nwy, nwx))
    for r in range(nwy):
        for c in range(nwx):
            levels[r, c] = truncation_from_singular_values(s[r, c], threshold).k
    return LocalStats.from_grid(H, "svd_truncation_std", levels,
                                threshold=threshold, centered=center)
