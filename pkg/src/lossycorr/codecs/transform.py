"""4x4 block transform codec in the style of ZFP.

Per block: block-floating-point conversion to signed fixed point relative to
the block's largest exponent, separable orthonormal 4-point DCT-II, integer
coefficients ordered by total frequency, and sign-magnitude bit planes
emitted from the most significant plane down. The number of planes per
block is the smallest count whose local decode meets the error bound.

Block kinds: 0 = decodes to zero (1 byte marker), 1 = bit-plane coded,
2 = stored raw (bound unreachable in fixed point).
"""

import numpy as np

from .base import Codec, join_sections, pack_stage, split_sections, unpack_stage
from ..exceptions import IntegrityError

BLOCK = 4
FIXED_POINT_BITS = 44
ZERO, CODED, RAW = 0, 1, 2
_CHUNK = 4096


def dct_matrix(n=BLOCK):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


DCT = dct_matrix()
# coefficient (row, col) pairs sorted by total frequency, then row
FREQ_ORDER = sorted(((i, j) for i in range(BLOCK) for j in range(BLOCK)),
                    key=lambda t: (t[0] + t[1], t[0]))
_FLAT_ORDER = np.array([i * BLOCK + j for i, j in FREQ_ORDER])
_INV_ORDER = np.argsort(_FLAT_ORDER)


def _left(M, X):
    """``M @ X`` on the last two axes with a fixed summation order."""
    out = np.empty_like(X)
    for i in range(BLOCK):
        out[..., i, :] = ((M[i, 0] * X[..., 0, :] + M[i, 1] * X[..., 1, :])
                          + M[i, 2] * X[..., 2, :]) + M[i, 3] * X[..., 3, :]
    return out


def _right(X, M):
    """``X @ M.T`` on the last two axes with a fixed summation order."""
    out = np.empty_like(X)
    for j in range(BLOCK):
        out[..., :, j] = ((M[j, 0] * X[..., :, 0] + M[j, 1] * X[..., :, 1])
                          + M[j, 2] * X[..., :, 2]) + M[j, 3] * X[..., :, 3]
    return out


def forward_transform(X):
    return _right(_left(DCT, X), DCT)


def inverse_transform(C):
    return _right(_left(DCT.T, C), DCT.T)


def to_blocks(z):
    ny, nx = z.shape
    py, px = -ny % BLOCK, -nx % BLOCK
    zp = np.pad(z, ((0, py), (0, px)), mode="edge")
    by, bx = zp.shape[0] // BLOCK, zp.shape[1] // BLOCK
    return zp.reshape(by, BLOCK, bx, BLOCK).transpose(0, 2, 1, 3).reshape(-1, BLOCK, BLOCK), (by, bx)


def from_blocks(blocks, grid, ny, nx):
    by, bx = grid
    z = blocks.reshape(by, bx, BLOCK, BLOCK).transpose(0, 2, 1, 3).reshape(by * BLOCK, bx * BLOCK)
    return np.ascontiguousarray(z[:ny, :nx])


def decode_coefficients(signed, emax):
    """Reconstruct blocks from integer coefficients in frequency order."""
    C = signed.astype(np.float64)[:, _INV_ORDER].reshape(-1, BLOCK, BLOCK)
    X = inverse_transform(C)
    with np.errstate(over="ignore"):
        return np.ldexp(X, (emax.astype(np.int64) - FIXED_POINT_BITS)[:, None, None])


def _truncate(mags, nbits, planes):
    shift = (nbits - planes).astype(np.uint64)[:, None]
    return (mags >> shift) << shift


def _plane_bits(mags, nbits, pcount):
    """Emitted bit-plane bits of a chunk of blocks, in stream order."""
    T = int(pcount.max()) if len(pcount) else 0
    if T == 0:
        return np.empty(0, dtype=np.uint8)
    t = np.arange(T)
    plane = nbits[:, None] - 1 - t[None, :]
    valid = t[None, :] < pcount[:, None]
    plane = np.where(valid, plane, 0).astype(np.uint64)
    bits = (mags[:, None, :] >> plane[:, :, None]) & np.uint64(1)
    return bits[valid].ravel().astype(np.uint8)


def _read_planes(bits, nbits, pcount):
    T = int(pcount.max()) if len(pcount) else 0
    mags = np.zeros((len(nbits), BLOCK * BLOCK), dtype=np.uint64)
    if T == 0:
        return mags
    t = np.arange(T)
    plane = nbits[:, None] - 1 - t[None, :]
    valid = t[None, :] < pcount[:, None]
    plane = np.where(valid, plane, 0).astype(np.uint64)
    full = np.zeros((len(nbits), T, BLOCK * BLOCK), dtype=np.uint64)
    full[valid] = bits.reshape(-1, BLOCK * BLOCK)
    return (full << plane[:, :, None]).sum(axis=1, dtype=np.uint64)


class TransformCodec(Codec):
    """ZFP-like codec: 4x4 DCT blocks with in-loop verified bit-plane truncation."""

    codec_id = "zfp-like"
    version = 1

    def __init__(self, eb=1e-3, lossless=True):
        self.eb = eb
        self.lossless = lossless

    def _encode(self, z, eb):
        blocks, _ = to_blocks(z)
        nb = len(blocks)
        kind = np.full(nb, CODED, dtype=np.uint8)
        peak = np.abs(blocks).max(axis=(1, 2))
        # blocks that already decode to zero within the bound
        kind[peak <= eb] = ZERO
        coded = np.flatnonzero(kind == CODED)
        sub = blocks[coded]
        _, emax = np.frexp(peak[coded])
        fixed = np.rint(np.ldexp(sub, (FIXED_POINT_BITS - emax)[:, None, None]))
        coef = np.rint(forward_transform(fixed)).reshape(-1, BLOCK * BLOCK)[:, _FLAT_ORDER]
        coef = coef.astype(np.int64)
        mags = np.abs(coef).astype(np.uint64)
        neg = coef < 0
        # exact bit length: magnitudes stay below 2**53
        _, nbits = np.frexp(mags.max(axis=1).astype(np.float64))
        nbits = nbits.astype(np.int64)

        pcount = np.full(len(coded), -1, dtype=np.int64)
        pending = np.arange(len(coded))
        for planes in range(1, int(nbits.max(initial=0)) + 1):
            pending = pending[nbits[pending] >= planes]
            if not len(pending):
                break
            trunc = _truncate(mags[pending], nbits[pending], np.full(len(pending), planes))
            signed = np.where(neg[pending], -trunc.astype(np.int64), trunc.astype(np.int64))
            rec = decode_coefficients(signed, emax[pending])
            ok = np.abs(sub[pending] - rec).max(axis=(1, 2)) <= eb
            pcount[pending[ok]] = planes
            pending = pending[~ok]
        raw = pcount < 0
        kind[coded[raw]] = RAW
        keep = ~raw
        mags, neg, nbits, pcount, emax = mags[keep], neg[keep], nbits[keep], pcount[keep], emax[keep]

        plane_bits, sign_bits = [], []
        for s in range(0, len(mags), _CHUNK):
            sl = slice(s, s + _CHUNK)
            plane_bits.append(_plane_bits(mags[sl], nbits[sl], pcount[sl]))
            trunc = _truncate(mags[sl], nbits[sl], pcount[sl])
            sign_bits.append(neg[sl][trunc > 0].astype(np.uint8))
        plane_bits = np.concatenate(plane_bits) if plane_bits else np.empty(0, np.uint8)
        sign_bits = np.concatenate(sign_bits) if sign_bits else np.empty(0, np.uint8)

        body = join_sections(
            kind.tobytes(),
            emax.astype("<i2").tobytes(),
            nbits.astype(np.uint8).tobytes(),
            pcount.astype(np.uint8).tobytes(),
            np.packbits(plane_bits).tobytes(),
            np.packbits(sign_bits).tobytes(),
            blocks[kind == RAW].astype("<f8").tobytes(),
        )
        return pack_stage(body) if self.lossless else bytes([0]) + body

    def _decode(self, payload, ny, nx, eb):
        _, body = unpack_stage(payload)
        sections = split_sections(body, 7)
        kind = np.frombuffer(sections[0], dtype=np.uint8)
        grid = (-(-ny // BLOCK), -(-nx // BLOCK))
        if len(kind) != grid[0] * grid[1]:
            raise IntegrityError("block count does not match field size")
        emax = np.frombuffer(sections[1], dtype="<i2").astype(np.int64)
        nbits = np.frombuffer(sections[2], dtype=np.uint8).astype(np.int64)
        pcount = np.frombuffer(sections[3], dtype=np.uint8).astype(np.int64)
        n_coded = int((kind == CODED).sum())
        if not (len(emax) == len(nbits) == len(pcount) == n_coded):
            raise IntegrityError("coded block metadata mismatch")
        n_plane_bits = int(pcount.sum()) * BLOCK * BLOCK
        plane_bits = np.unpackbits(np.frombuffer(sections[4], dtype=np.uint8), count=n_plane_bits)
        raw = np.frombuffer(sections[6], dtype="<f8").reshape(-1, BLOCK, BLOCK)
        if len(raw) != (kind == RAW).sum() or len(plane_bits) != n_plane_bits:
            raise IntegrityError("block payload size mismatch")

        bit_pos = 0
        trunc_parts = []
        for s in range(0, n_coded, _CHUNK):
            sl = slice(s, s + _CHUNK)
            count = int(pcount[sl].sum()) * BLOCK * BLOCK
            trunc = _read_planes(plane_bits[bit_pos:bit_pos + count], nbits[sl], pcount[sl])
            bit_pos += count
            trunc_parts.append(trunc)
        trunc = np.concatenate(trunc_parts) if trunc_parts else np.zeros((0, BLOCK * BLOCK), np.uint64)
        nonzero = trunc > 0
        n_signs = int(nonzero.sum())
        signs = np.unpackbits(np.frombuffer(sections[5], dtype=np.uint8), count=n_signs).astype(bool)
        if len(signs) != n_signs:
            raise IntegrityError("sign bit count mismatch")
        neg = np.zeros_like(nonzero)
        neg[nonzero] = signs
        signed = np.where(neg, -trunc.astype(np.int64), trunc.astype(np.int64))

        out = np.zeros((len(kind), BLOCK, BLOCK))
        out[kind == CODED] = decode_coefficients(signed, emax)
        out[kind == RAW] = raw
        return from_blocks(out, grid, ny, nx)
