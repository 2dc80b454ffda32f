"""Adapter running an external compressor through command templates.

Templates are formatted with ``{input}``, ``{output}``, ``{eb}``, ``{nx}``
and ``{ny}``; arrays are exchanged as headerless little-endian float64
files in a private temporary directory. No shell is involved.
"""

import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .base import CompressedBlob, check_eb, Codec
from .._validation import check_grid
from ..exceptions import ExternalCodecError, ValidationError
from ..fields import Field2D

REQUIRED_PLACEHOLDERS = ("{input}", "{output}")


def _check_template(template, name):
    if not isinstance(template, str) or not template.strip():
        raise ValidationError(f"{name} template must be a non-empty string")
    missing = [p for p in REQUIRED_PLACEHOLDERS if p not in template]
    if missing:
        raise ValidationError(f"{name} template lacks placeholders {missing}")


class ExternalCodec(Codec):
    """Wrap a compressor binary; the bound is verified after every compression."""

    version = 1

    def __init__(self, eb=1e-3, compress_command="", decompress_command="",
                 name="external", timeout=600.0):
        self.eb = eb
        self.compress_command = compress_command
        self.decompress_command = decompress_command
        self.name = name
        self.timeout = timeout

    @property
    def codec_id(self):
        return self.name if self.name.startswith("external") else f"external:{self.name}"

    def _run(self, template, **values):
        quoted = {k: shlex.quote(str(v)) for k, v in values.items()}
        argv = shlex.split(template.format(**quoted))
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalCodecError(f"{self.codec_id}: could not run {argv[0]!r}: {exc}",
                                     command=argv) from exc
        if proc.returncode != 0:
            raise ExternalCodecError(
                f"{self.codec_id}: command exited with status {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace').strip()}",
                command=argv, returncode=proc.returncode,
                stderr=proc.stderr.decode(errors="replace"),
            )
        out = Path(values["output"])
        if not out.exists():
            raise ExternalCodecError(f"{self.codec_id}: command produced no output file",
                                     command=argv, stderr=proc.stderr.decode(errors="replace"))
        return out.read_bytes()

    def compress(self, field) -> CompressedBlob:
        _check_template(self.compress_command, "compress")
        _check_template(self.decompress_command, "decompress")
        eb = check_eb(self.eb)
        values = check_grid(field)
        ny, nx = values.shape
        with tempfile.TemporaryDirectory(prefix="lossycorr-ext-") as tmp:
            src = Path(tmp) / "input.raw"
            values.astype("<f8").tofile(src)
            payload = self._run(self.compress_command, input=src, output=Path(tmp) / "output.bin",
                                eb=repr(eb), nx=nx, ny=ny)
        blob = CompressedBlob(self.codec_id, nx, ny, eb, self.version, payload, external=True)
        recon = self.decompress(blob).values
        err = float(np.max(np.abs(values - recon)))
        if not err <= eb:
            raise ExternalCodecError(
                f"{self.codec_id}: reconstruction error {err!r} exceeds eb={eb!r}")
        return blob

    def decompress(self, blob) -> Field2D:
        if isinstance(blob, (bytes, bytearray, memoryview)):
            blob = CompressedBlob.from_bytes(bytes(blob))
        _check_template(self.decompress_command, "decompress")
        with tempfile.TemporaryDirectory(prefix="lossycorr-ext-") as tmp:
            src = Path(tmp) / "compressed.bin"
            src.write_bytes(blob.payload)
            raw = self._run(self.decompress_command, input=src, output=Path(tmp) / "output.raw",
                            eb=repr(blob.eb), nx=blob.nx, ny=blob.ny)
        expected = blob.nx * blob.ny * 8
        if len(raw) != expected:
            raise ExternalCodecError(
                f"{self.codec_id}: decompressed {len(raw)} bytes, expected {expected}")
        values = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(blob.ny, blob.nx)
        if not np.all(np.isfinite(values)):
            raise ExternalCodecError(f"{self.codec_id}: decompressed data is not finite")
        return Field2D(values, field_id=f"{self.codec_id}_reconstruction",
                       provenance=f"{self.codec_id} eb={blob.eb!r}")
