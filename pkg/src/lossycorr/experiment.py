"""Compression sweeps: materialize fields, compute statistics, run codecs.

A sweep config is JSON::

    {
      "fields": [{"kind": "grf_ranges", "nx": 256, "ny": 256,
                  "ranges": [2, 4, 8], "seeds": [1, 2, 3]}],
      "codecs": [{"id": "sz-like"}, {"id": "zfp-like"}],
      "error_bounds": [1e-5, 1e-4, 1e-3, 1e-2],
      "statistics": [{"name": "global_range"},
                     {"name": "local_vario_std", "H": 32},
                     {"name": "local_svd_std", "H": 32, "threshold": 0.99}],
      "seed": 0
    }

Field kinds: ``grf`` (explicit ``components``), ``grf_ranges`` (one
single-range field per range and seed), ``multi_range`` (equal-weight mix
per entry of ``ranges``), ``half_and_half``, ``white_noise``, ``constant``
and ``raw`` (``path``, ``dims``, ``slice_indices``...).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .codecs import get_codec, run_codec
from .exceptions import BoundViolationError, ExternalCodecError, SchemaError, ValidationError
from .fields import (GrfSpec, constant_field, generate_grf, generate_half_and_half,
                     load_raw_field, white_noise)
from .regression import fit_groups, format_value, predictor_column, write_fits_csv
from .stats import STATISTICS, compute_statistic, statistic_column

DEFAULT_H = 32
DEFAULT_STATISTICS = (
    {"name": "global_range"},
    {"name": "local_vario_std", "H": DEFAULT_H},
    {"name": "local_svd_std", "H": DEFAULT_H, "threshold": 0.99},
)
CURVE_SAMPLES = 100


@dataclass
class ExperimentConfig:
    fields: list
    codecs: list
    error_bounds: list
    statistics: list = field(default_factory=lambda: [dict(s) for s in DEFAULT_STATISTICS])
    output_dir: Optional[str] = None
    seed: int = 0
    threads: Optional[int] = None
    record_timings: bool = False

    def __post_init__(self):
        if not self.fields:
            raise ValidationError("config needs at least one field spec")
        if not self.codecs:
            raise ValidationError("config needs at least one codec")
        if not self.error_bounds:
            raise ValidationError("config needs at least one error bound")
        self.codecs = [{"id": c} if isinstance(c, str) else dict(c) for c in self.codecs]
        for c in self.codecs:
            if "id" not in c:
                raise ValidationError(f"codec entry without id: {c}")
        bounds = []
        for eb in self.error_bounds:
            eb = float(eb)
            if not (math.isfinite(eb) and eb > 0):
                raise ValidationError(f"error bounds must be > 0, got {eb}")
            bounds.append(eb)
        self.error_bounds = sorted(set(bounds))
        self.statistics = [{"name": s} if isinstance(s, str) else dict(s) for s in self.statistics]
        for s in self.statistics:
            if s.get("name") not in STATISTICS:
                raise ValidationError(f"unknown statistic {s.get('name')!r}")

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        missing = {"fields", "codecs", "error_bounds"} - set(d)
        if missing:
            raise SchemaError(f"config is missing keys: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def window(self, name):
        for s in self.statistics:
            if s["name"] == name:
                return int(s.get("H", DEFAULT_H))
        return DEFAULT_H

    def record_columns(self):
        return [
            "field_id", "codec", "eb", "original_bytes", "compressed_bytes", "cr",
            "max_abs_error", "global_range",
            statistic_column("local_vario_std", self.window("local_vario_std")),
            statistic_column("local_svd_std", self.window("local_svd_std")),
            "encode_seconds", "decode_seconds",
        ]


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------

def _seeds(spec, default):
    if "seeds" in spec:
        return [int(s) for s in spec["seeds"]]
    return [int(spec.get("seed", default))]


def materialize_fields(config: ExperimentConfig):
    """Expand every field spec of ``config`` into concrete fields, in order."""
    out = []
    for spec in config.fields:
        kind = spec.get("kind", "grf")
        nx, ny = int(spec.get("nx", 256)), int(spec.get("ny", 256))
        variance = float(spec.get("variance", 1.0))
        if kind == "grf":
            comps = spec.get("components") or [[spec.get("range", 8.0), 1.0]]
            for s in _seeds(spec, config.seed):
                g = GrfSpec(nx=nx, ny=ny, components=comps, variance=variance, seed=s)
                out.append(generate_grf(g, spec.get("id")))
        elif kind == "grf_ranges":
            for a in spec["ranges"]:
                for s in _seeds(spec, config.seed):
                    out.append(generate_grf(GrfSpec.single(a, nx=nx, ny=ny, variance=variance, seed=s)))
        elif kind == "multi_range":
            for ranges in spec["ranges"]:
                for s in _seeds(spec, config.seed):
                    g = GrfSpec.equal_mix(ranges, nx=nx, ny=ny, variance=variance, seed=s)
                    out.append(generate_grf(g))
        elif kind == "half_and_half":
            a1, a2 = spec["ranges"]
            for s in _seeds(spec, config.seed):
                out.append(generate_half_and_half(nx, ny, a1, a2, seed=s, variance=variance))
        elif kind == "white_noise":
            for s in _seeds(spec, config.seed):
                out.append(white_noise(nx, ny, seed=s, distribution=spec.get("distribution", "normal")))
        elif kind == "constant":
            out.append(constant_field(nx, ny, float(spec.get("value", 0.0)), spec.get("id")))
        elif kind == "raw":
            for idx in spec.get("slice_indices", [spec.get("slice_index", 0)]):
                f = load_raw_field(spec["path"], spec["dims"], spec.get("dtype", "float64"),
                                   spec.get("byte_order", "little"), int(spec.get("slice_axis", 0)),
                                   int(idx))
                out.append(f)
        else:
            raise ValidationError(f"unknown field kind {kind!r}")
    ids = [f.field_id for f in out]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValidationError(f"duplicate field ids in config: {dupes}")
    return out


def field_statistics(field, config: ExperimentConfig) -> dict:
    stats = {}
    for s in config.statistics:
        H = int(s.get("H", DEFAULT_H))
        stats[statistic_column(s["name"], H)] = compute_statistic(
            field.values, s["name"], H, float(s.get("threshold", 0.99)),
            s.get("model_form", "a_squared"))
    return stats


# --------------------------------------------------------------------------
# Sweep
# --------------------------------------------------------------------------

def thread_count(requested=None):
    if requested:
        return max(1, int(requested))
    env = os.environ.get("CSC_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _job(field, codec_spec, eb):
    options = dict(codec_spec.get("options", {}))
    codec = get_codec(codec_spec["id"], eb, **options)
    where = f"(field={field.field_id}, codec={codec_spec['id']}, eb={eb!r})"
    try:
        record, _, _ = run_codec(codec, field)
    except BoundViolationError as exc:
        raise BoundViolationError(f"bound violation for {where}: {exc}") from exc
    except ExternalCodecError as exc:
        raise ExternalCodecError(f"external codec failed for {where}: {exc}", command=exc.command,
                                 returncode=exc.returncode, stderr=exc.stderr) from exc
    return record


def run_sweep(config: ExperimentConfig, threads=None):
    """Run every (field, codec, eb) job; rows come back in canonical order."""
    fields = materialize_fields(config)
    n = thread_count(threads or config.threads)
    with ThreadPoolExecutor(max_workers=n) as pool:
        stats = dict(zip((f.field_id for f in fields),
                         pool.map(lambda f: field_statistics(f, config), fields)))
        jobs = [(f, c, eb) for f in fields for c in config.codecs for eb in config.error_bounds]
        records = list(pool.map(lambda j: _job(*j), jobs))

    columns = config.record_columns()
    rows = []
    for (f, c, eb), rec in zip(jobs, records):
        row = dict.fromkeys(columns, "")
        row.update(
            field_id=f.field_id, codec=rec.codec_id, eb=eb,
            original_bytes=rec.original_bytes, compressed_bytes=rec.compressed_bytes,
            cr=rec.compression_ratio, max_abs_error=rec.max_abs_error,
        )
        for k, v in stats[f.field_id].items():
            row[k] = v
        if config.record_timings:
            row.update(encode_seconds=rec.encode_seconds, decode_seconds=rec.decode_seconds)
        rows.append(row)
    rows.sort(key=lambda r: (r["field_id"], r["codec"], r["eb"]))
    return fields, rows


def records_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def manifest(config: ExperimentConfig, fields) -> dict:
    codecs = []
    for c in config.codecs:
        params = get_codec(c["id"], config.error_bounds[0], **c.get("options", {})).get_params()
        params.pop("eb", None)
        codecs.append({"id": c["id"], "params": params})
    return {
        "tool": "lossycorr",
        "version": __version__,
        "config": config.to_dict(),
        "codecs": codecs,
        "fields": [f.metadata() for f in fields],
        "columns": config.record_columns(),
    }


def write_sweep(config: ExperimentConfig, out_dir, threads=None):
    """Run a sweep and write ``records.csv`` and ``manifest.json`` to ``out_dir``."""
    out_dir = Path(out_dir)
    fields, rows = run_sweep(config, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.csv"
    _atomic_write(records_path, records_csv(rows, config.record_columns()))
    _atomic_write(out_dir / "manifest.json",
                  json.dumps(manifest(config, fields), indent=2, sort_keys=True) + "\n")
    return records_path


# --------------------------------------------------------------------------
# Fits and plot-ready reports
# --------------------------------------------------------------------------

BASE_COLUMNS = ("field_id", "codec", "eb", "cr", "max_abs_error")


def read_records(path, predictor_name=None):
    """Load a records CSV, checking the columns a fit or report needs."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        rows = list(reader)
    expected = list(BASE_COLUMNS)
    missing = [c for c in BASE_COLUMNS if c not in columns]
    column = None
    if predictor_name is not None:
        column = predictor_column(columns, predictor_name)
        if column is None:
            expected.append(predictor_name if predictor_name == "global_range"
                            else f"{predictor_name}_H<window>")
            missing.append(expected[-1])
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}; expected at least {expected}")
    return rows, column


def verify_bounds(rows):
    for r in rows:
        if not float(r["max_abs_error"]) <= float(r["eb"]):
            raise BoundViolationError(
                f"record (field={r['field_id']}, codec={r['codec']}, eb={r['eb']}) "
                f"has max_abs_error {r['max_abs_error']}")


def fits_csv(rows, predictor_name, column=None):
    grouped = fit_groups(rows, predictor_name, column)
    buf = io.StringIO()
    write_fits_csv(grouped.fits, buf)
    return buf.getvalue(), grouped


def filter_eb(rows, below=None, exclude=()):
    exclude = {float(e) for e in exclude}
    return [r for r in rows
            if float(r["eb"]) not in exclude and (below is None or float(r["eb"]) < below)]


def report_panels(rows, predictor_name, column=None):
    """Plot-ready CSV text per codec: observed points plus fitted curve samples."""
    grouped = fit_groups(rows, predictor_name, column)
    fits = {f.group: f for f in grouped.fits}
    panels = {}
    for key in sorted(grouped.points):
        codec, eb = key
        lines = panels.setdefault(codec, [])
        pts = grouped.points[key]
        for x, cr in pts:
            lines.append(("point", codec, eb, x, cr))
        fit = fits.get(key)
        if fit is not None:
            for x in np.linspace(pts[:, 0].min(), pts[:, 0].max(), CURVE_SAMPLES):
                lines.append(("curve", codec, eb, float(x), float(fit.predict(x))))
    out = {}
    for codec, lines in panels.items():
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["kind", "codec", "eb", predictor_name, "cr"])
        for line in lines:
            writer.writerow([format_value(v) for v in line])
        out[codec] = buf.getvalue()
    return out, grouped
