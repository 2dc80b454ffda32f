"""Error-bounded lossy codecs and compression metrics."""

from .base import (CodecRequest, CompressedBlob, CompressionRecord, Codec,
                   compression_metrics, run_codec)
from .external import ExternalCodec
from .multilevel import MultilevelCodec
from .predictor import PredictorCodec
from .transform import TransformCodec
from ..exceptions import ValidationError

BUILTIN_CODECS = {
    PredictorCodec.codec_id: PredictorCodec,
    TransformCodec.codec_id: TransformCodec,
    MultilevelCodec.codec_id: MultilevelCodec,
}
ALIASES = {
    "predictor": PredictorCodec.codec_id,
    "sz": PredictorCodec.codec_id,
    "transform": TransformCodec.codec_id,
    "zfp": TransformCodec.codec_id,
    "multilevel": MultilevelCodec.codec_id,
    "mgard": MultilevelCodec.codec_id,
}


def get_codec(codec_id, eb=1e-3, **options) -> Codec:
    """Instantiate a codec by id (``sz-like``, ``zfp-like``, ``mgard-like``,
    or ``external[:name]`` with ``compress_command``/``decompress_command``)."""
    if codec_id.startswith("external"):
        options.setdefault("name", codec_id)
        return ExternalCodec(eb=eb, **options)
    key = ALIASES.get(codec_id, codec_id)
    try:
        cls = BUILTIN_CODECS[key]
    except KeyError:
        raise ValidationError(
            f"unknown codec {codec_id!r}; expected one of {sorted(BUILTIN_CODECS)} or external:<name>"
        ) from None
    return cls(eb=eb, **options)


def compress(request: CodecRequest) -> CompressedBlob:
    return get_codec(request.codec_id, request.eb, **request.codec_options).compress(request.field)


def decompress(blob, **options):
    """Decode a blob (object or serialized bytes) with the codec named in its header."""
    if isinstance(blob, (bytes, bytearray, memoryview)):
        blob = CompressedBlob.from_bytes(bytes(blob))
    return get_codec(blob.codec_id, blob.eb, **options).decompress(blob)


__all__ = [
    "BUILTIN_CODECS", "Codec", "CodecRequest", "CompressedBlob", "CompressionRecord",
    "ExternalCodec", "MultilevelCodec", "PredictorCodec", "TransformCodec",
    "compress", "compression_metrics", "decompress", "get_codec", "run_codec",
]
