"""Block-wise prediction codec in the style of SZ.

Each ``block_size`` x ``block_size`` block (raster order) uses either the
Lorenzo predictor ``W + N - NW`` over reconstructed values (zero outside the
field) or a least-squares plane ``b0 + b1*i + b2*j`` fitted to the block's
original values. Prediction errors are quantized with bin width ``2*eb``;
codes beyond 16-bit signed capacity, or whose reconstruction would miss the
bound by floating-point rounding, become an escape symbol and the value is
stored exactly.

Lorenzo pixels depend only on their west, north and north-west neighbours,
so every anti-diagonal ``i + j = d`` is computed as one vector step. The
arithmetic per pixel is the same as a raster scan.
"""

import numpy as np

from . import huffman
from .base import Codec, join_sections, pack_stage, split_sections, unpack_stage
from ..exceptions import IntegrityError

CODE_CAPACITY = 32767
ESCAPE = CODE_CAPACITY + 1
# E|e_W + e_N - e_NW| for three uniform quantization errors on [-eb, eb]
LORENZO_NOISE = 0.8


def _block_slices(ny, nx, bs):
    for r0 in range(0, ny, bs):
        for c0 in range(0, nx, bs):
            yield slice(r0, min(r0 + bs, ny)), slice(c0, min(c0 + bs, nx))


def fit_plane(block):
    """Least-squares ``b0 + b1*i + b2*j`` over local block coordinates."""
    h, w = block.shape
    i = np.arange(h, dtype=np.float64)
    j = np.arange(w, dtype=np.float64)
    ic, jc = i - i.mean(), j - j.mean()
    mean = block.mean()
    si, sj = (ic * ic).sum() * w, (jc * jc).sum() * h
    b1 = float((ic[:, None] * block).sum() / si) if si > 0 else 0.0
    b2 = float((jc[None, :] * block).sum() / sj) if sj > 0 else 0.0
    b0 = float(mean - b1 * i.mean() - b2 * j.mean())
    return b0, b1, b2


def plane_values(coef, h, w):
    b0, b1, b2 = coef
    i = np.arange(h, dtype=np.float64)[:, None]
    j = np.arange(w, dtype=np.float64)[None, :]
    return (b0 + b1 * i) + b2 * j


def lorenzo_original(z):
    """Lorenzo prediction from original values, zero outside the field."""
    p = np.zeros((z.shape[0] + 1, z.shape[1] + 1))
    p[1:, 1:] = z
    return (p[1:, :-1] + p[:-1, 1:]) - p[:-1, :-1]


def _diagonals(mask):
    """Group the True pixels of ``mask`` by anti-diagonal, in order."""
    rows, cols = np.nonzero(mask)
    d = rows + cols
    order = np.argsort(d, kind="stable")
    rows, cols, d = rows[order], cols[order], d[order]
    cuts = np.flatnonzero(np.diff(d)) + 1
    return zip(np.split(rows, cuts), np.split(cols, cuts))


class PredictorCodec(Codec):
    """SZ-like codec: Lorenzo / plane prediction, linear quantization, Huffman."""

    codec_id = "sz-like"
    version = 1

    def __init__(self, eb=1e-3, block_size=16, lossless=True):
        self.eb = eb
        self.block_size = block_size
        self.lossless = lossless

    # -- helpers -----------------------------------------------------------
    def _predictor_map(self, z, eb):
        ny, nx = z.shape
        bs = int(self.block_size)
        lor_err = np.abs(z - lorenzo_original(z))
        use_plane, coefs = [], []
        plane_pred = np.zeros_like(z)
        for rs, cs in _block_slices(ny, nx, bs):
            block = z[rs, cs]
            coef = fit_plane(block)
            pred = plane_values(coef, *block.shape)
            plane_cost = np.abs(block - pred).sum()
            lor_cost = lor_err[rs, cs].sum() + LORENZO_NOISE * eb * block.size
            if plane_cost <= lor_cost:
                use_plane.append(True)
                coefs.append(coef)
                plane_pred[rs, cs] = pred
            else:
                use_plane.append(False)
        return np.array(use_plane, dtype=bool), np.array(coefs, dtype=np.float64).reshape(-1, 3), plane_pred

    def _pixel_plane_mask(self, ny, nx, use_plane):
        mask = np.zeros((ny, nx), dtype=bool)
        for flag, (rs, cs) in zip(use_plane, _block_slices(ny, nx, int(self.block_size))):
            mask[rs, cs] = flag
        return mask

    # -- codec -------------------------------------------------------------
    def _encode(self, z, eb):
        ny, nx = z.shape
        q = 2.0 * eb
        use_plane, coefs, plane_pred = self._predictor_map(z, eb)
        plane_px = self._pixel_plane_mask(ny, nx, use_plane)

        codes = np.zeros((ny, nx), dtype=np.int64)
        R = np.zeros((ny + 1, nx + 1))

        # plane pixels do not depend on reconstructed neighbours
        pred = plane_pred[plane_px]
        orig = z[plane_px]
        code = np.rint((orig - pred) / q)
        recon = pred + code * q
        esc = (np.abs(code) > CODE_CAPACITY) | ~(np.abs(orig - recon) <= eb)
        recon[esc] = orig[esc]
        code[esc] = ESCAPE
        codes[plane_px] = code.astype(np.int64)
        R[1:, 1:][plane_px] = recon

        for r, c in _diagonals(~plane_px):
            pred = (R[r + 1, c] + R[r, c + 1]) - R[r, c]
            orig = z[r, c]
            code = np.rint((orig - pred) / q)
            recon = pred + code * q
            esc = (np.abs(code) > CODE_CAPACITY) | ~(np.abs(orig - recon) <= eb)
            recon[esc] = orig[esc]
            code[esc] = ESCAPE
            codes[r, c] = code.astype(np.int64)
            R[r + 1, c + 1] = recon

        escaped = z[codes == ESCAPE]
        header = np.array([self.block_size], dtype="<u2").tobytes()
        body = join_sections(
            header,
            np.packbits(use_plane).tobytes(),
            coefs.astype("<f8").tobytes(),
            huffman.encode(codes.ravel()),
            escaped.astype("<f8").tobytes(),
        )
        return pack_stage(body) if self.lossless else bytes([0]) + body

    def _decode(self, payload, ny, nx, eb):
        _, body = unpack_stage(payload)
        header, flags, coef_bytes, stream, esc_bytes = split_sections(body, 5)
        bs = int(np.frombuffer(header, dtype="<u2")[0])
        if bs < 1:
            raise IntegrityError("invalid block size")
        n_blocks = len(range(0, ny, bs)) * len(range(0, nx, bs))
        use_plane = np.unpackbits(np.frombuffer(flags, dtype=np.uint8), count=n_blocks).astype(bool)
        coefs = np.frombuffer(coef_bytes, dtype="<f8").reshape(-1, 3)
        if len(coefs) != use_plane.sum():
            raise IntegrityError("plane coefficient count mismatch")
        codes, _ = huffman.decode(stream)
        if codes.size != ny * nx:
            raise IntegrityError("code count does not match field size")
        codes = codes.reshape(ny, nx)
        escaped = np.frombuffer(esc_bytes, dtype="<f8")
        esc_mask = codes == ESCAPE
        if escaped.size != esc_mask.sum():
            raise IntegrityError("escape count mismatch")

        q = 2.0 * eb
        exact = np.zeros((ny, nx))
        exact[esc_mask] = escaped
        plane_pred = np.zeros((ny, nx))
        plane_px = np.zeros((ny, nx), dtype=bool)
        it = iter(coefs)
        for flag, (rs, cs) in zip(use_plane, _block_slices(ny, nx, bs)):
            if flag:
                coef = next(it)
                plane_pred[rs, cs] = plane_values(coef, rs.stop - rs.start, cs.stop - cs.start)
                plane_px[rs, cs] = True

        R = np.zeros((ny + 1, nx + 1))
        recon = plane_pred[plane_px] + codes[plane_px].astype(np.float64) * q
        esc = esc_mask[plane_px]
        recon[esc] = exact[plane_px][esc]
        R[1:, 1:][plane_px] = recon

        for r, c in _diagonals(~plane_px):
            pred = (R[r + 1, c] + R[r, c + 1]) - R[r, c]
            recon = pred + codes[r, c].astype(np.float64) * q
            esc = esc_mask[r, c]
            recon[esc] = exact[r, c][esc]
            R[r + 1, c + 1] = recon
        return np.ascontiguousarray(R[1:, 1:])
