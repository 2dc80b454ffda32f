"""Codec contract, blob container, lossless byte stage and metrics.

Container layout (little-endian)::

    b"CSCX" | u8 version | u8 len(codec_id) | codec_id (utf-8)
    u32 nx | u32 ny | f64 eb | u32 crc32(payload) | payload
"""

from __future__ import annotations

import math
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import check_grid
from ..exceptions import (BoundViolationError, IntegrityError, ValidationError,
                          VersionError)
from ..fields import Field2D, as_field

MAGIC = b"CSCX"
_DIMS = struct.Struct("<IIdI")
WORKING_ITEMSIZE = 8

# payload flag bits
FLAG_DEFLATE = 0x01
FLAG_EXPERIMENTAL = 0x02


@dataclass
class CompressedBlob:
    codec_id: str
    nx: int
    ny: int
    eb: float
    version: int
    payload: bytes
    external: bool = False

    def to_bytes(self) -> bytes:
        cid = self.codec_id.encode("utf-8")
        if len(cid) > 255:
            raise ValidationError("codec_id longer than 255 bytes")
        return b"".join([
            MAGIC,
            bytes([self.version, len(cid)]),
            cid,
            _DIMS.pack(self.nx, self.ny, self.eb, zlib.crc32(self.payload)),
            self.payload,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedBlob":
        if len(data) < 6 or data[:4] != MAGIC:
            raise IntegrityError("not a CSCX blob (bad magic)")
        version, n = data[4], data[5]
        pos = 6 + n
        if len(data) < pos + _DIMS.size:
            raise IntegrityError("blob header truncated")
        codec_id = data[6:pos].decode("utf-8", errors="replace")
        nx, ny, eb, crc = _DIMS.unpack_from(data, pos)
        payload = bytes(data[pos + _DIMS.size:])
        if zlib.crc32(payload) != crc:
            raise IntegrityError(f"payload checksum mismatch for {codec_id} blob")
        return cls(codec_id, nx, ny, eb, version, payload,
                   external=codec_id.startswith("external"))

    @property
    def stored_size(self) -> int:
        """Bytes charged to the compressor when computing the ratio.

        Built-in codecs are charged for the whole container; external codecs
        only for what the external program wrote.
        """
        return len(self.payload) if self.external else len(self.to_bytes())


def pack_stage(body: bytes, flags=0, level=9) -> bytes:
    """Prefix a flags byte and deflate ``body`` when that makes it smaller."""
    deflated = zlib.compress(body, level)
    if len(deflated) < len(body):
        return bytes([flags | FLAG_DEFLATE]) + deflated
    return bytes([flags & ~FLAG_DEFLATE]) + body


def unpack_stage(payload: bytes):
    if not payload:
        raise IntegrityError("empty payload")
    flags = payload[0]
    body = payload[1:]
    if flags & FLAG_DEFLATE:
        try:
            body = zlib.decompress(body)
        except zlib.error as exc:
            raise IntegrityError(f"lossless stage failed: {exc}") from exc
    return flags, body


def join_sections(*sections) -> bytes:
    out = []
    for s in sections:
        out.append(struct.pack("<I", len(s)))
        out.append(bytes(s))
    return b"".join(out)


def split_sections(body: bytes, count):
    parts = []
    pos = 0
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", body, pos)
            pos += 4
            if pos + n > len(body):
                raise IntegrityError("section overruns payload")
            parts.append(body[pos:pos + n])
            pos += n
    except struct.error as exc:
        raise IntegrityError(f"payload truncated: {exc}") from exc
    return parts


def check_eb(eb):
    try:
        eb = float(eb)
    except (TypeError, ValueError):
        raise ValidationError(f"error bound must be a real number, got {eb!r}") from None
    if not (math.isfinite(eb) and eb > 0):
        raise ValidationError(f"error bound must be finite and > 0, got {eb!r}")
    return eb


@dataclass
class CodecRequest:
    field: Field2D
    eb: float
    codec_id: str
    codec_options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eb = check_eb(self.eb)


class Codec(TransformerMixin, BaseEstimator):
    """Error-bounded lossy codec.

    Subclasses implement ``_encode(values, eb) -> payload`` and
    ``_decode(payload, ny, nx, eb) -> values``. The estimator face makes a
    codec usable as a lossy filter: ``transform`` returns the reconstruction.
    """

    codec_id: ClassVar[str] = ""
    version: ClassVar[int] = 1

    def __init__(self, eb=1e-3):
        self.eb = eb

    def compress(self, field) -> CompressedBlob:
        eb = check_eb(self.eb)
        values = check_grid(field)
        payload = self._encode(values, eb)
        ny, nx = values.shape
        return CompressedBlob(self.codec_id, nx, ny, eb, self.version, payload)

    def decompress(self, blob) -> Field2D:
        if isinstance(blob, (bytes, bytearray, memoryview)):
            blob = CompressedBlob.from_bytes(bytes(blob))
        if blob.codec_id != self.codec_id:
            raise ValidationError(
                f"blob was written by {blob.codec_id!r}, not {self.codec_id!r}"
            )
        if blob.version != self.version:
            raise VersionError(
                f"{self.codec_id} blob version {blob.version} unsupported "
                f"(expected {self.version})"
            )
        values = self._decode(blob.payload, blob.ny, blob.nx, blob.eb)
        if values.shape != (blob.ny, blob.nx):
            raise IntegrityError("decoded shape does not match header")
        if not np.all(np.isfinite(values)):
            raise IntegrityError("decoded values are not finite")
        return Field2D(values, field_id=f"{self.codec_id}_reconstruction",
                       provenance=f"{self.codec_id} eb={blob.eb!r}")

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return self.decompress(self.compress(X)).values

    def _encode(self, values, eb):  # pragma: no cover - abstract
        raise NotImplementedError

    def _decode(self, payload, ny, nx, eb):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass
class CompressionRecord:
    field_id: str
    codec_id: str
    eb: float
    original_bytes: int
    compressed_bytes: int
    compression_ratio: float
    max_abs_error: float
    encode_seconds: float = 0.0
    decode_seconds: float = 0.0
    psnr: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def compression_metrics(original, reconstructed, blob, encode_seconds=0.0,
                        decode_seconds=0.0, field_id=None) -> CompressionRecord:
    """Sizes, ratio, max absolute error and PSNR of one compression run."""
    a = check_grid(original, name="original")
    b = check_grid(reconstructed, name="reconstructed")
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    original_bytes = a.size * WORKING_ITEMSIZE
    compressed_bytes = blob.stored_size
    if compressed_bytes <= 0:
        raise ValidationError("compressed size must be positive")
    diff = np.abs(a - b)
    max_err = float(diff.max())
    mse = float(np.mean(diff * diff))
    value_range = float(a.max() - a.min())
    if mse == 0.0:
        psnr = math.inf
    elif value_range == 0.0:
        psnr = -math.inf
    else:
        psnr = 20 * math.log10(value_range) - 10 * math.log10(mse)
    if field_id is None:
        field_id = getattr(original, "field_id", "field")
    return CompressionRecord(
        field_id=field_id,
        codec_id=blob.codec_id,
        eb=blob.eb,
        original_bytes=original_bytes,
        compressed_bytes=compressed_bytes,
        compression_ratio=original_bytes / compressed_bytes,
        max_abs_error=max_err,
        encode_seconds=encode_seconds,
        decode_seconds=decode_seconds,
        psnr=psnr,
    )


def run_codec(codec: Codec, field, check_bound=True):
    """Compress, decompress and measure ``field``.

    Returns ``(record, blob, reconstruction)``. Raises
    :class:`BoundViolationError` when ``check_bound`` and the bound fails.
    """
    field = as_field(field)
    t0 = time.perf_counter()
    blob = codec.compress(field)
    t1 = time.perf_counter()
    recon = codec.decompress(blob)
    t2 = time.perf_counter()
    record = compression_metrics(field, recon, blob, t1 - t0, t2 - t1, field.field_id)
    if check_bound and not record.max_abs_error <= blob.eb:
        raise BoundViolationError(
            f"{blob.codec_id} violated eb={blob.eb!r} on {field.field_id}: "
            f"max error {record.max_abs_error!r}"
        )
    return record, blob, recon
