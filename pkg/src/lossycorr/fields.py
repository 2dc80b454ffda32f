"""2D fields: Gaussian random field synthesis and raw volume ingestion.

Gaussian fields use a squared-exponential covariance

    C(x_i, x_j) = sigma^2 * sum_c w_c * exp(-|x_i - x_j|^2 / a_c^2)

sampled by FFT circulant embedding. Each component is drawn independently
from its own child of ``numpy.random.SeedSequence(seed)`` (PCG64 bit
generator, ``Generator.standard_normal`` for normals) and carries variance
``w_c * sigma^2``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sp_fft

from ._validation import check_grid, check_int, check_positive
from .exceptions import EmbeddingError, FormatError, ValidationError

DEFAULT_SIZE = 1028
MAX_CLIPPED_FRACTION = 1e-3

_DTYPES = {"float32": "f4", "float64": "f8"}
_BYTE_ORDERS = {"little": "<", "big": ">"}


@dataclass
class Field2D:
    """A 2D grid of finite reals, stored as a ``(ny, nx)`` C-order array."""

    values: np.ndarray
    field_id: str = "field"
    provenance: str = ""
    generator: Optional[dict] = None

    def __post_init__(self):
        self.values = check_grid(self.values, name=self.field_id or "field")

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def metadata(self) -> dict:
        meta = {
            "field_id": self.field_id,
            "nx": self.nx,
            "ny": self.ny,
            "provenance": self.provenance,
        }
        if self.generator is not None:
            meta["generator"] = self.generator
        return meta


def as_field(X, field_id="field") -> Field2D:
    if isinstance(X, Field2D):
        return X
    return Field2D(np.asarray(X), field_id=field_id, provenance="array")


@dataclass(frozen=True)
class GrfSpec:
    """Parameters of a (multi-range) squared-exponential Gaussian field.

    ``components`` holds ``(range, weight)`` pairs; ranges are in grid-point
    units and weights, which split the variance, must sum to one.
    """

    nx: int = DEFAULT_SIZE
    ny: int = DEFAULT_SIZE
    components: tuple = ((8.0, 1.0),)
    variance: float = 1.0
    mean: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self,
            "components",
            tuple((float(a), float(w)) for a, w in self.components),
        )
        self.validate()

    @classmethod
    def single(cls, a, **kwargs) -> "GrfSpec":
        return cls(components=((a, 1.0),), **kwargs)

    @classmethod
    def equal_mix(cls, ranges: Sequence[float], **kwargs) -> "GrfSpec":
        w = 1.0 / len(ranges)
        return cls(components=tuple((a, w) for a in ranges), **kwargs)

    def validate(self):
        check_int(self.nx, "nx", minimum=2)
        check_int(self.ny, "ny", minimum=2)
        check_int(self.seed, "seed")
        if not self.components:
            raise ValidationError("components must be non-empty")
        for a, w in self.components:
            if not (math.isfinite(a) and a > 0):
                raise ValidationError(f"every range a must be > 0, got {a}")
            if not (math.isfinite(w) and w > 0):
                raise ValidationError(f"every weight must be > 0, got {w}")
        total = math.fsum(w for _, w in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(
                f"component weights must sum to 1 within 1e-12, got {total!r}"
            )
        check_positive(self.variance, "variance", allow_zero=True)
        if not math.isfinite(self.mean):
            raise ValidationError("mean must be finite")

    def covariance(self, h):
        """Model covariance at Euclidean lag ``h`` (array-like)."""
        h2 = np.square(np.asarray(h, dtype=np.float64))
        return self.variance * sum(w * np.exp(-h2 / (a * a)) for a, w in self.components)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["components"] = [list(c) for c in self.components]
        return d

    @classmethod
    def from_dict(cls, d) -> "GrfSpec":
        d = dict(d)
        d["components"] = tuple(tuple(c) for c in d.get("components", ((8.0, 1.0),)))
        return cls(**d)


def embedding_size(n, a):
    """Periodic embedding length for one axis.

    At least ``2n`` and wide enough that the covariance has decayed to
    ~exp(-25) at the wrap point, so the embedded spectrum stays (almost)
    non-negative.
    """
    return sp_fft.next_fast_len(max(2 * n, int(math.ceil(10.0 * a))))


def circulant_spectrum(shape, a):
    """Clipped eigenvalues of the circulant embedding of ``exp(-h^2/a^2)``.

    Returns ``(eigenvalues, clipped_fraction)``. Negative eigenvalues are set
    to zero and the remainder rescaled so the total (variance) is preserved.
    """
    my, mx = shape
    dy = np.minimum(np.arange(my), my - np.arange(my)).astype(np.float64)
    dx = np.minimum(np.arange(mx), mx - np.arange(mx)).astype(np.float64)
    base = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (a * a))
    lam = sp_fft.fft2(base).real
    total = lam.sum()
    negative = -lam[lam < 0].sum()
    clipped_fraction = negative / np.abs(lam).sum()
    if clipped_fraction > MAX_CLIPPED_FRACTION:
        raise EmbeddingError(
            f"circulant embedding for a={a} on {mx}x{my} has {clipped_fraction:.3%} "
            f"negative spectral mass (limit {MAX_CLIPPED_FRACTION:.1%})"
        )
    lam = np.clip(lam, 0.0, None)
    lam *= total / lam.sum()
    return lam, clipped_fraction


def _sample_unit_field(ny, nx, a, rng):
    my, mx = embedding_size(ny, a), embedding_size(nx, a)
    lam, _ = circulant_spectrum((my, mx), a)
    scale = np.sqrt(lam / (my * mx))
    xi = rng.standard_normal((2, my, mx))
    z = sp_fft.fft2(scale * (xi[0] + 1j * xi[1]))
    return np.ascontiguousarray(z.real[:ny, :nx])


def generate_grf(spec: GrfSpec, field_id: Optional[str] = None) -> Field2D:
    """Draw one realization of the Gaussian field described by ``spec``."""
    spec.validate()
    values = np.zeros((spec.ny, spec.nx))
    if spec.variance > 0:
        children = np.random.SeedSequence(spec.seed).spawn(len(spec.components))
        for (a, w), child in zip(spec.components, children):
            rng = np.random.Generator(np.random.PCG64(child))
            values += math.sqrt(w * spec.variance) * _sample_unit_field(spec.ny, spec.nx, a, rng)
    if spec.mean:
        values += spec.mean
    ranges = "+".join(f"{a:g}" for a, _ in spec.components)
    return Field2D(
        values,
        field_id=field_id or f"grf_a{ranges}_s{spec.seed}",
        provenance=f"grf ranges={ranges} seed={spec.seed}",
        generator={"kind": "grf", **spec.to_dict()},
    )


def generate_half_and_half(nx, ny, a_left, a_right, seed=0, variance=1.0,
                           field_id=None) -> Field2D:
    """Left half from a GRF with range ``a_left``, right half from ``a_right``.

    A deliberately non-stationary field: the two halves come from independent
    realizations and meet at column ``nx // 2``.
    """
    seeds = np.random.SeedSequence(seed).generate_state(2)
    left = generate_grf(GrfSpec.single(a_left, nx=nx, ny=ny, variance=variance, seed=int(seeds[0])))
    right = generate_grf(GrfSpec.single(a_right, nx=nx, ny=ny, variance=variance, seed=int(seeds[1])))
    half = nx // 2
    values = np.concatenate([left.values[:, :half], right.values[:, half:]], axis=1)
    return Field2D(
        values,
        field_id=field_id or f"half_a{a_left:g}_a{a_right:g}_s{seed}",
        provenance=f"half-and-half ranges={a_left:g}|{a_right:g} seed={seed}",
        generator={"kind": "half_and_half", "nx": nx, "ny": ny, "ranges": [a_left, a_right],
                   "variance": variance, "seed": seed},
    )


def white_noise(nx, ny, seed=0, distribution="normal", field_id=None) -> Field2D:
    """iid noise: standard normal, or uniform on [0, 1)."""
    rng = np.random.default_rng(seed)
    if distribution == "normal":
        values = rng.standard_normal((ny, nx))
    elif distribution == "uniform":
        values = rng.random((ny, nx))
    else:
        raise ValidationError(f"unknown distribution {distribution!r}")
    return Field2D(
        values,
        field_id=field_id or f"noise_{distribution}_s{seed}",
        provenance=f"white noise {distribution} seed={seed}",
        generator={"kind": "white_noise", "nx": nx, "ny": ny, "seed": seed,
                   "distribution": distribution},
    )


def constant_field(nx, ny, value=0.0, field_id=None) -> Field2D:
    return Field2D(
        np.full((ny, nx), float(value)),
        field_id=field_id or f"const_{value:g}",
        provenance=f"constant {value!r}",
        generator={"kind": "constant", "nx": nx, "ny": ny, "value": value},
    )


# --------------------------------------------------------------------------
# Raw binary I/O
# --------------------------------------------------------------------------

def _raw_dtype(dtype, byte_order):
    try:
        return np.dtype(_BYTE_ORDERS[byte_order] + _DTYPES[dtype])
    except KeyError:
        raise ValidationError(
            f"unsupported dtype/byte order {dtype!r}/{byte_order!r}; "
            f"expected one of {sorted(_DTYPES)} / {sorted(_BYTE_ORDERS)}"
        ) from None


def load_raw_field(path, dims, dtype="float64", byte_order="little",
                   slice_axis=0, slice_index=0, field_id=None) -> Field2D:
    """Read a headerless row-major array and return a 2D field.

    ``dims`` is the C-order shape of the stored array: ``(ny, nx)`` for 2D
    data, three extents for a volume. For volumes the plane at
    ``slice_index`` along ``slice_axis`` is returned; for 2D data the slice
    arguments are ignored.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (2, 3) or any(d < 1 for d in dims):
        raise ValidationError(f"dims must be 2 or 3 positive integers, got {dims}")
    raw_dtype = _raw_dtype(dtype, byte_order)
    path = Path(path)
    expected = int(np.prod(dims)) * raw_dtype.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for dims {dims} ({dtype}), found {actual}"
        )
    data = np.fromfile(path, dtype=raw_dtype).reshape(dims)
    if len(dims) == 3:
        if not 0 <= slice_axis < 3:
            raise ValidationError(f"slice_axis must be 0, 1 or 2, got {slice_axis}")
        if not 0 <= slice_index < dims[slice_axis]:
            raise IndexError(
                f"slice_index {slice_index} out of range for axis {slice_axis} "
                f"of extent {dims[slice_axis]}"
            )
        data = np.take(data, slice_index, axis=slice_axis)
        provenance = f"{path.name} axis={slice_axis} index={slice_index}"
        default_id = f"{path.stem}_ax{slice_axis}_{slice_index}"
    else:
        provenance = path.name
        default_id = path.stem
    values = np.ascontiguousarray(data, dtype=np.float64)
    return Field2D(values, field_id=field_id or default_id, provenance=provenance)


def write_raw_field(field, path, dtype="float64", byte_order="little"):
    """Write ``field`` as a headerless row-major array."""
    values = getattr(field, "values", field)
    np.ascontiguousarray(values).astype(_raw_dtype(dtype, byte_order)).tofile(path)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_field(field: Field2D, path):
    """Write raw float64 little-endian data plus a JSON metadata sidecar."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    write_raw_field(field, tmp)
    os.replace(tmp, path)
    meta = field.metadata()
    meta.update(dtype="float64", byte_order="little")
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_field(path, dims=None, dtype=None, byte_order=None) -> Field2D:
    """Load a raw 2D field, taking missing layout details from its sidecar."""
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    if dims is None:
        if "nx" not in meta:
            raise FormatError(f"{path}: no sidecar metadata; pass dims explicitly")
        dims = (meta["ny"], meta["nx"])
    field = load_raw_field(
        path,
        dims,
        dtype=dtype or meta.get("dtype", "float64"),
        byte_order=byte_order or meta.get("byte_order", "little"),
        field_id=meta.get("field_id"),
    )
    if meta.get("provenance"):
        field.provenance = meta["provenance"]
    field.generator = meta.get("generator")
    return field
