"""Acceptance suite: one test per criterion, each with its tolerance and
runtime budget. Every criterion prints a single PASS/FAIL line; the lines
are repeated in the pytest terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import statistics

import numpy as np
import pytest
from scipy.stats import spearmanr

from acceptance_report import criterion
from lossycorr.codecs import get_codec, run_codec
from lossycorr.experiment import ExperimentConfig, fits_csv, read_records, write_sweep
from lossycorr.fields import (GrfSpec, constant_field, generate_grf, generate_half_and_half,
                              white_noise)
from lossycorr.regression import PREDICTORS, fit_log_regression
from lossycorr.svdstats import svd_truncation_level
from lossycorr.variogram import empirical_variogram, global_range, local_variogram_stats
from oracles import brute_variogram

BUILTIN = ("sz-like", "zfp-like", "mgard-like")
EBS = (1e-5, 1e-4, 1e-3, 1e-2)
SEEDS = (1, 2, 3)


def test_criterion_1_bound_compliance():
    with criterion(1, "bound compliance, zero tolerance", 180) as info:
        corpus = [generate_grf(GrfSpec.single(a, nx=256, ny=256, seed=s))
                  for a in (2, 8, 32) for s in SEEDS]
        corpus += [generate_half_and_half(256, 256, 2, 12, seed=1),
                   white_noise(256, 256, seed=1), constant_field(256, 256, 0.75)]
        worst, runs = 0.0, 0
        for f in corpus:
            for codec_id in BUILTIN:
                for eb in EBS:
                    record, _, _ = run_codec(get_codec(codec_id, eb), f, check_bound=False)
                    assert record.max_abs_error <= eb, (f.field_id, codec_id, eb, record.max_abs_error)
                    worst = max(worst, record.max_abs_error / eb)
                    runs += 1
        info["detail"] = f"{runs} runs, worst max_abs_error/eb = {worst:.6f}"


def test_criterion_2_variogram_oracle():
    with criterion(2, "variogram equals exhaustive pair enumeration", 5) as info:
        rng = np.random.default_rng(2024)
        bins_checked = 0
        for _ in range(20):
            ny, nx = (int(v) for v in rng.integers(2, 17, size=2))
            z = rng.standard_normal((ny, nx)) * 10 ** rng.uniform(-2, 2)
            max_lag = float(rng.uniform(1, math.hypot(nx - 1, ny - 1)))
            v = empirical_variogram(z, max_lag, stride=1)
            oracle = brute_variogram(z, max_lag)
            assert [int(h) for h in v.lags] == list(oracle)
            for h, g, n in v.bins:
                assert (g, n) == oracle[int(h)], (ny, nx, max_lag, h)
                bins_checked += 1
        info["detail"] = f"20 fields, {bins_checked} bins bit-identical"


def test_criterion_3_grf_covariance():
    with criterion(3, "GRF covariance within 3 Monte-Carlo SE", 30) as info:
        a = 4.0
        fields = [generate_grf(GrfSpec.single(a, nx=64, ny=64, variance=1.0, seed=s)).values
                  for s in range(200)]
        worst = 0.0
        for h in range(4):
            per = []
            for z in fields:
                if h == 0:
                    per.append(np.mean(z * z))
                else:
                    per.append(0.5 * (np.mean(z[:, :-h] * z[:, h:]) + np.mean(z[:-h] * z[h:])))
            per = np.array(per)
            se = per.std(ddof=1) / math.sqrt(len(per))
            z_score = abs(per.mean() - math.exp(-h * h / (a * a))) / se
            worst = max(worst, z_score)
            assert z_score <= 3, (h, per.mean(), se)
        info["detail"] = f"max |error|/SE over lags 0-3 = {worst:.2f}"


def test_criterion_4_range_recovery():
    with criterion(4, "median fitted range within 25% of a", 60) as info:
        parts = []
        for a in (4, 8, 16):
            fitted = [global_range(generate_grf(GrfSpec.single(a, nx=512, ny=512, seed=s))).range
                      for s in range(5)]
            med = statistics.median(fitted)
            parts.append(f"a={a}: {med:.2f}")
            assert abs(med - a) <= 0.25 * a, (a, fitted)
        info["detail"] = ", ".join(parts)


def test_criterion_5_trend():
    with criterion(5, "CR increases with range (Spearman >= 0.9, beta > 0)", 300) as info:
        ranges = (2, 4, 8, 16, 32, 64)
        fields = [(a, generate_grf(GrfSpec.single(a, nx=256, ny=256, seed=s)))
                  for a in ranges for s in SEEDS]
        parts = []
        for codec_id in ("sz-like", "zfp-like"):
            codec = get_codec(codec_id, 1e-3)
            a_vals, crs = [], []
            for a, f in fields:
                record, _, _ = run_codec(codec, f)
                a_vals.append(a)
                crs.append(record.compression_ratio)
            rho = spearmanr(a_vals, crs).statistic
            fit = fit_log_regression(a_vals, crs)
            parts.append(f"{codec_id}: rho={rho:.3f} beta={fit.beta:.2f}")
            assert rho >= 0.9 and fit.beta > 0, (codec_id, rho, fit.beta)
        info["detail"] = "; ".join(parts)


def test_criterion_6_local_discrimination():
    with criterion(6, "half-and-half local_vario_std exceeds single-range fields", 60) as info:
        half = [local_variogram_stats(generate_half_and_half(256, 256, 2, 12, seed=s), H=32).std
                for s in SEEDS]
        single = {a: [local_variogram_stats(generate_grf(GrfSpec.single(a, nx=256, ny=256, seed=s)),
                                            H=32).std for s in SEEDS]
                  for a in (2, 4, 8, 12)}
        top = max(max(v) for v in single.values())
        info["detail"] = f"min half={min(half):.3f} vs max single={top:.3f}"
        assert min(half) > top, (half, single)


def test_criterion_7_svd_truncation():
    with criterion(7, "SVD rank-k fixtures and invariances", 10) as info:
        rng = np.random.default_rng(7)
        n = 32
        centre = np.eye(n) - np.ones((n, n)) / n
        for k in (1, 2, 5):
            # left factor orthogonal to the ones vector: zero-mean window of rank exactly k
            U, _ = np.linalg.qr(centre @ rng.standard_normal((n, k)))
            V, _ = np.linalg.qr(rng.standard_normal((n, k)))
            w = U @ np.diag(np.linspace(1.0, 0.5, k)) @ V.T
            assert abs(w.mean()) < 1e-14 and np.linalg.matrix_rank(w) == k
            assert svd_truncation_level(w, 0.99).k == k
        for _ in range(100):
            w = rng.standard_normal((32, 32)) @ np.diag(np.geomspace(1, 1e-2, 32)) @ rng.standard_normal((32, 32))
            k = svd_truncation_level(w).k
            assert svd_truncation_level(w + rng.uniform(-100, 100)).k == k
            assert svd_truncation_level(w * rng.choice([-1, 1]) * 10 ** rng.uniform(-4, 4)).k == k
        info["detail"] = "k in {1,2,5} exact; 100 windows shift/scale invariant"


def test_criterion_8_regression_recovery():
    with criterion(8, "log regression recovery", 10) as info:
        x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        fit = fit_log_regression(x, 2.0 + 3.0 * np.log(x))
        assert abs(fit.alpha - 2.0) <= 1e-10 * 2.0 and abs(fit.beta - 3.0) <= 1e-10 * 3.0
        rng = np.random.default_rng(8)
        ok = 0
        for _ in range(100):
            xs = rng.uniform(1, 100, 50)
            ys = 5.0 + 1.5 * np.log(xs) + rng.normal(0, 0.1, 50)
            f = fit_log_regression(xs, ys)
            ok += abs(f.alpha - 5.0) <= 3 * f.alpha_se and abs(f.beta - 1.5) <= 3 * f.beta_se
        info["detail"] = f"noiseless exact to 1e-10; noisy {ok}/100 within 3 SE"
        assert ok >= 95


DESK_SWEEP = {
    "fields": [
        {"kind": "grf_ranges", "nx": 256, "ny": 256, "ranges": [2, 4, 8, 16, 32, 64],
         "seeds": [1, 2, 3]},
        {"kind": "half_and_half", "nx": 256, "ny": 256, "ranges": [2, 12], "seeds": [1, 2, 3]},
    ],
    "codecs": ["sz-like", "zfp-like", "mgard-like"],
    "error_bounds": [1e-5, 1e-4, 1e-3, 1e-2],
    "statistics": [{"name": "global_range"},
                   {"name": "local_vario_std", "H": 32},
                   {"name": "local_svd_std", "H": 32, "threshold": 0.99}],
    "seed": 0,
}


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "sweep and fits byte-identical across runs and thread counts", 600) as info:
        config = ExperimentConfig.from_dict(DESK_SWEEP)
        outputs = []
        for run, threads in (("serial", 1), ("parallel", 4)):
            records = write_sweep(config, tmp_path / run, threads=threads)
            fits = b""
            for name in PREDICTORS:
                rows, column = read_records(records, name)
                text, _ = fits_csv(rows, name, column)
                fits += text.encode()
            outputs.append((records.read_bytes(), fits))
        assert outputs[0][0] == outputs[1][0]
        assert outputs[0][1] == outputs[1][1]
        n_rows = outputs[0][0].count(b"\n") - 1
        info["detail"] = f"{n_rows} records, 3 fits tables identical (threads 1 vs 4)"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
