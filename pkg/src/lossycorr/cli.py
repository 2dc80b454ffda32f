"""Command-line interface: ``lossycorr <subcommand> ...``."""

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .codecs import CompressedBlob, decompress, get_codec, run_codec
from .exceptions import LossyCorrError
from .experiment import (ExperimentConfig, filter_eb, fits_csv, read_records, report_panels,
                         verify_bounds, write_sweep)
from .fields import GrfSpec, generate_grf, load_raw_field, read_field, save_field
from .regression import PREDICTORS
from .svdstats import local_svd_stats
from .variogram import (auto_stride, default_max_lag, empirical_variogram, fit_range,
                        local_variogram_stats)


def _write_text(path, text):
    """Write atomically; ``None`` or ``-`` means stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_text_bytes(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_input(args):
    if not Path(args.input).exists():
        raise FileNotFoundError(f"input file not found: {args.input}")
    dims = tuple(args.dims) if getattr(args, "dims", None) else None
    return read_field(args.input, dims=dims)


def cmd_gen(args):
    ranges = args.range or [8.0]
    weights = args.weight or [1.0 / len(ranges)] * len(ranges)
    if len(weights) != len(ranges):
        raise LossyCorrError("--weight must be given once per --range")
    spec = GrfSpec(nx=args.nx, ny=args.ny, components=tuple(zip(ranges, weights)),
                   variance=args.variance, seed=args.seed)
    field = generate_grf(spec, args.field_id)
    save_field(field, args.out)


def cmd_ingest(args):
    if not Path(args.input).exists():
        raise FileNotFoundError(f"input file not found: {args.input}")
    field = load_raw_field(args.input, args.dims, args.dtype, args.byte_order,
                           args.slice_axis, args.slice_index, args.field_id)
    save_field(field, args.out)


def cmd_stats(args):
    field = _load_input(args)
    everything = not (args.global_variogram or args.local_variogram or args.local_svd)
    out = {"field_id": field.field_id, "nx": field.nx, "ny": field.ny}
    if args.global_variogram or everything:
        max_lag = args.max_lag or default_max_lag(field.shape)
        stride = args.stride or auto_stride(field.shape, max_lag)
        v = empirical_variogram(field, max_lag, stride)
        fit = fit_range(v, args.model_form)
        out["global_variogram"] = {**v.to_dict(), "fit": fit.to_dict()}
    if args.local_variogram or everything:
        out["local_variogram"] = local_variogram_stats(
            field, args.local_variogram or 32, args.model_form).to_dict()
    if args.local_svd or everything:
        out["local_svd"] = local_svd_stats(field, args.local_svd or 32, args.threshold).to_dict()
    _write_text(args.out, _dump(out))


def _codec_options(args):
    options = {}
    if args.codec.startswith("external"):
        options.update(compress_command=args.compress_cmd or "",
                       decompress_command=args.decompress_cmd or "")
    return options


def cmd_compress(args):
    field = _load_input(args)
    codec = get_codec(args.codec, args.eb, **_codec_options(args))
    record, blob, recon = run_codec(codec, field)
    if not args.timings:
        record.encode_seconds = record.decode_seconds = 0.0
    if args.blob:
        _write_text_bytes(args.blob, blob.to_bytes())
    if args.recon:
        save_field(recon, args.recon)
    _write_text(args.out, _dump(record.to_dict()))


def cmd_decompress(args):
    if not Path(args.input).exists():
        raise FileNotFoundError(f"input file not found: {args.input}")
    blob = CompressedBlob.from_bytes(Path(args.input).read_bytes())
    options = {}
    if blob.codec_id.startswith("external"):
        options.update(compress_command=args.compress_cmd or "",
                       decompress_command=args.decompress_cmd or "")
    save_field(decompress(blob, **options), args.out)


def cmd_sweep(args):
    if not Path(args.config).exists():
        raise FileNotFoundError(f"config not found: {args.config}")
    config = ExperimentConfig.load(args.config)
    out_dir = args.out or config.output_dir
    if not out_dir:
        raise LossyCorrError("no output directory: pass -o or set output_dir in the config")
    path = write_sweep(config, out_dir, args.threads)
    print(path)


def cmd_fit(args):
    rows, column = read_records(args.records, args.predictor)
    verify_bounds(rows)
    rows = filter_eb(rows, args.below_eb, args.exclude_eb or ())
    text, grouped = fits_csv(rows, args.predictor, column)
    for key, reason in grouped.skipped:
        print(f"skipped group {key}: {reason}", file=sys.stderr)
    _write_text(args.out, text)


def cmd_report(args):
    out_dir = Path(args.out)
    predictors = args.predictor or list(PREDICTORS)
    panels = {}
    for name in predictors:
        rows, column = read_records(args.records, name)
        verify_bounds(rows)
        rows = filter_eb(rows, args.below_eb, args.exclude_eb or ())
        texts, grouped = report_panels(rows, name, column)
        for codec, text in texts.items():
            panels[f"panel_{name}_{codec}.csv"] = text
        fit_text, _ = fits_csv(rows, name, column)
        panels[f"fits_{name}.csv"] = fit_text
    out_dir.mkdir(parents=True, exist_ok=True)
    for fname, text in sorted(panels.items()):
        _write_text(out_dir / fname, text)
        print(out_dir / fname)


def build_parser():
    p = argparse.ArgumentParser(prog="lossycorr", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a Gaussian random field")
    g.add_argument("--nx", type=int, default=1028)
    g.add_argument("--ny", type=int, default=1028)
    g.add_argument("--range", type=float, action="append",
                   help="correlation range; repeat for a multi-range field")
    g.add_argument("--weight", type=float, action="append",
                   help="variance weight per --range (default: equal)")
    g.add_argument("--variance", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--field-id")
    g.add_argument("--out", "-o", required=True, help="raw output file (sidecar .json added)")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("ingest", help="extract a 2D slice from a raw volume")
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--dims", type=int, nargs="+", required=True, help="C-order shape")
    i.add_argument("--dtype", choices=["float32", "float64"], default="float64")
    i.add_argument("--byte-order", choices=["little", "big"], default="little")
    i.add_argument("--slice-axis", type=int, default=0)
    i.add_argument("--slice-index", type=int, default=0)
    i.add_argument("--field-id")
    i.add_argument("--out", "-o", required=True)
    i.set_defaults(func=cmd_ingest)

    s = sub.add_parser("stats", help="variogram and SVD statistics of a field")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--dims", type=int, nargs=2, help="(ny, nx) when no sidecar exists")
    s.add_argument("--global-variogram", action="store_true")
    s.add_argument("--local-variogram", type=int, metavar="H", nargs="?", const=32)
    s.add_argument("--local-svd", type=int, metavar="H", nargs="?", const=32)
    s.add_argument("--threshold", type=float, default=0.99)
    s.add_argument("--max-lag", type=float)
    s.add_argument("--stride", type=int)
    s.add_argument("--model-form", choices=["a_squared", "a_linear"], default="a_squared")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("compress", help="compress one field and report metrics")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--dims", type=int, nargs=2)
    c.add_argument("--codec", default="sz-like")
    c.add_argument("--eb", type=float, required=True)
    c.add_argument("--compress-cmd", help="external codec compress template")
    c.add_argument("--decompress-cmd", help="external codec decompress template")
    c.add_argument("--blob", help="write the compressed blob here")
    c.add_argument("--recon", help="write the reconstruction here")
    c.add_argument("--timings", action="store_true", help="keep wall-clock timings in the record")
    c.add_argument("--out", "-o")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="decode a blob back to a raw field")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--compress-cmd")
    d.add_argument("--decompress-cmd")
    d.add_argument("--out", "-o", required=True)
    d.set_defaults(func=cmd_decompress)

    w = sub.add_parser("sweep", help="run a compression sweep from a JSON config")
    w.add_argument("--config", required=True)
    w.add_argument("--threads", type=int, help="worker threads (default: $CSC_THREADS or 1)")
    w.add_argument("--out", "-o")
    w.set_defaults(func=cmd_sweep)

    for name, func, helptext in (("fit", cmd_fit, "fit log regressions per (codec, eb)"),
                                 ("report", cmd_report, "write plot-ready panel CSVs")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("--records", required=True)
        if name == "fit":
            r.add_argument("--predictor", choices=PREDICTORS, required=True)
            r.add_argument("--out", "-o")
        else:
            r.add_argument("--predictor", choices=PREDICTORS, action="append")
            r.add_argument("--out", "-o", required=True, help="output directory")
        r.add_argument("--below-eb", type=float, help="keep only error bounds strictly below")
        r.add_argument("--exclude-eb", type=float, action="append")
        r.set_defaults(func=func)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (LossyCorrError, OSError, IndexError, ValueError, KeyError) as exc:
        print(f"lossycorr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
