"""Simplified multilevel codec standing in for MGARD.

Orthonormal 2D Haar decomposition over ``L = floor(log2(min(nx, ny)))``
levels on a grid padded (edge replication) to powers of two, uniform
quantization of every coefficient with bin ``delta``, and a decode check.
``delta`` starts at ``2*eb/(L+1)`` and is halved up to six times while the
bound fails; pixels still out of bound are patched with their exact values.
"""

import math

import numpy as np

from . import huffman
from .base import (FLAG_EXPERIMENTAL, Codec, join_sections, pack_stage, split_sections,
                   unpack_stage)
from ..exceptions import IntegrityError

INV_SQRT2 = 1.0 / math.sqrt(2.0)
MAX_HALVINGS = 6
_META = np.dtype([("levels", "<u1"), ("py", "<u4"), ("px", "<u4"), ("delta", "<f8")])


def n_levels(ny, nx):
    return int(math.floor(math.log2(min(ny, nx))))


def padded_shape(ny, nx):
    return 1 << (ny - 1).bit_length(), 1 << (nx - 1).bit_length()


def haar_forward(x, levels):
    """Mallat-layout orthonormal Haar transform (approximation top-left)."""
    c = np.array(x, dtype=np.float64, copy=True)
    h, w = c.shape
    for _ in range(levels):
        sub = c[:h, :w]
        even, odd = sub[:, 0::2], sub[:, 1::2]
        sub[:, :] = np.concatenate([(even + odd) * INV_SQRT2, (even - odd) * INV_SQRT2], axis=1)
        even, odd = sub[0::2, :], sub[1::2, :]
        sub[:, :] = np.concatenate([(even + odd) * INV_SQRT2, (even - odd) * INV_SQRT2], axis=0)
        h //= 2
        w //= 2
    return c


def haar_inverse(c, levels):
    x = np.array(c, dtype=np.float64, copy=True)
    H, W = x.shape
    for lev in reversed(range(levels)):
        h, w = H >> lev, W >> lev
        sub = x[:h, :w]
        a, d = sub[:h // 2, :].copy(), sub[h // 2:, :].copy()
        sub[0::2, :] = (a + d) * INV_SQRT2
        sub[1::2, :] = (a - d) * INV_SQRT2
        a, d = sub[:, :w // 2].copy(), sub[:, w // 2:].copy()
        sub[:, 0::2] = (a + d) * INV_SQRT2
        sub[:, 1::2] = (a - d) * INV_SQRT2
    return x


def _reconstruct(q, delta, levels, ny, nx):
    return np.ascontiguousarray(haar_inverse(q.astype(np.float64) * delta, levels)[:ny, :nx])


class MultilevelCodec(Codec):
    """MGARD-like (experimental) Haar multilevel codec with residual patching."""

    codec_id = "mgard-like"
    version = 1

    def __init__(self, eb=1e-3, lossless=True):
        self.eb = eb
        self.lossless = lossless

    def _encode(self, z, eb):
        ny, nx = z.shape
        levels = n_levels(ny, nx)
        py, px = padded_shape(ny, nx)
        coef = haar_forward(np.pad(z, ((0, py - ny), (0, px - nx)), mode="edge"), levels)
        delta = 2.0 * eb / (levels + 1)
        for attempt in range(MAX_HALVINGS + 1):
            q = np.rint(coef / delta).astype(np.int64)
            rec = _reconstruct(q, delta, levels, ny, nx)
            bad = ~(np.abs(z - rec) <= eb)
            if not bad.any() or attempt == MAX_HALVINGS:
                break
            delta /= 2.0
        positions = np.flatnonzero(bad)
        meta = np.array([(levels, py, px, delta)], dtype=_META)
        body = join_sections(
            meta.tobytes(),
            huffman.encode(q.ravel()),
            positions.astype("<u8").tobytes(),
            z.ravel()[positions].astype("<f8").tobytes(),
        )
        if self.lossless:
            return pack_stage(body, flags=FLAG_EXPERIMENTAL)
        return bytes([FLAG_EXPERIMENTAL]) + body

    def _decode(self, payload, ny, nx, eb):
        _, body = unpack_stage(payload)
        meta_b, stream, pos_b, val_b = split_sections(body, 4)
        if len(meta_b) != _META.itemsize:
            raise IntegrityError("bad multilevel metadata")
        meta = np.frombuffer(meta_b, dtype=_META)[0]
        levels, py, px, delta = int(meta["levels"]), int(meta["py"]), int(meta["px"]), float(meta["delta"])
        if (py, px) != padded_shape(ny, nx) or levels != n_levels(ny, nx):
            raise IntegrityError("multilevel geometry does not match header")
        q, _ = huffman.decode(stream)
        if q.size != py * px:
            raise IntegrityError("coefficient count mismatch")
        rec = _reconstruct(q.reshape(py, px), delta, levels, ny, nx)
        positions = np.frombuffer(pos_b, dtype="<u8").astype(np.int64)
        values = np.frombuffer(val_b, dtype="<f8")
        if len(positions) != len(values) or (len(positions) and positions.max() >= ny * nx):
            raise IntegrityError("corrupt residual patch list")
        rec.ravel()[positions] = values
        return rec
