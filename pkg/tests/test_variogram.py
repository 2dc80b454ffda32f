import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lossycorr.exceptions import (DegenerateFieldError, InsufficientDataError,
                                  ValidationError)
from lossycorr.fields import GrfSpec, generate_grf, generate_half_and_half, white_noise
from lossycorr.variogram import (VariogramEstimate, VariogramRange, auto_stride,
                                 empirical_variogram, fit_range, global_range, lag_offsets,
                                 local_variogram_stats, window_variograms)
from oracles import brute_variogram


def assert_matches_oracle(z, max_lag):
    v = empirical_variogram(z, max_lag, stride=1)
    oracle = brute_variogram(z, max_lag)
    assert list(v.lags) == [float(b) for b in oracle]
    for h, g, n in v.bins:
        og, on = oracle[int(h)]
        assert n == on
        assert g == og, (h, g, og)


def test_three_by_three_example():
    z = np.arange(1, 10, dtype=float).reshape(3, 3)
    assert_matches_oracle(z, 2)


@pytest.mark.parametrize("seed", range(6))
def test_real_fields_match_oracle(seed):
    rng = np.random.default_rng(seed)
    ny, nx = rng.integers(2, 17, size=2)
    z = rng.standard_normal((ny, nx)) * 10 ** rng.uniform(-3, 3)
    max_lag = float(rng.uniform(1, math.hypot(nx - 1, ny - 1)))
    assert_matches_oracle(z, max_lag)


def test_offsets_cover_each_pair_once():
    dx, dy, bins = lag_offsets(3.0)
    offs = set(zip(dx.tolist(), dy.tolist()))
    assert len(offs) == len(dx)
    for ox, oy in offs:
        assert (-ox, -oy) not in offs
    assert np.all(bins == np.rint(np.hypot(dx, dy)))


def test_constant_field_zero_gamma():
    v = empirical_variogram(np.full((20, 30), 7.0), 6)
    assert np.all(v.gamma == 0)
    assert np.all(v.counts >= 1)


def test_white_noise_sill():
    z = white_noise(512, 512, seed=2).values
    v = empirical_variogram(z, 16, stride=1)
    assert np.all(np.abs(v.gamma - 1.0) <= 0.05)


def test_estimate_invariants(grf64):
    v = empirical_variogram(grf64.values, 16)
    assert np.all(np.diff(v.lags) > 0)
    assert np.all(v.counts >= 1)
    assert np.all(v.gamma >= 0)


def test_strided_subset_and_auto_stride():
    z = white_noise(40, 40, seed=1).values
    v = empirical_variogram(z, 5, stride=3)
    assert v.stride == 3 and np.all(v.counts > 0)
    assert auto_stride((1028, 1028), 257) > 1
    assert auto_stride((64, 64), 16) == 1
    s = auto_stride((1028, 1028), 257)
    n_off = len(lag_offsets(257)[0])
    assert n_off * math.ceil(1028 / s) ** 2 <= 1e8 < n_off * math.ceil(1028 / (s - 1)) ** 2


@pytest.mark.parametrize("max_lag", [0.5, 0, -1, 100.0, float("nan")])
def test_bad_max_lag(max_lag):
    with pytest.raises(ValidationError):
        empirical_variogram(np.zeros((8, 8)), max_lag)


def test_too_small_field():
    with pytest.raises(ValidationError):
        empirical_variogram(np.zeros((1, 8)), 1)


def test_shift_and_scale(grf64):
    z = grf64.values[:24, :24]
    base = empirical_variogram(z, 8)
    shifted = empirical_variogram(z + 123.0, 8)
    np.testing.assert_allclose(shifted.gamma, base.gamma, rtol=1e-9)
    scaled = empirical_variogram(z * -3.0, 8)
    np.testing.assert_allclose(scaled.gamma, 9.0 * base.gamma, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(z=arrays(np.float64, st.tuples(st.integers(2, 10), st.integers(2, 10)),
                elements=st.floats(-1e3, 1e3, allow_nan=False)),
       c=st.floats(0.1, 10))
def test_scale_property(z, c):
    max_lag = max(1.0, min(z.shape) / 2)
    base = empirical_variogram(z, max_lag).gamma
    np.testing.assert_allclose(empirical_variogram(c * z, max_lag).gamma, c * c * base,
                               rtol=1e-9, atol=1e-300)


@settings(max_examples=20, deadline=None)
@given(z=arrays(np.int64, st.tuples(st.integers(2, 8), st.integers(2, 8)),
                elements=st.integers(-1000, 1000)),
       max_lag=st.floats(1, 12))
def test_integer_fields_match_oracle(z, max_lag):
    max_lag = min(max_lag, math.hypot(*(np.array(z.shape) - 1)))
    if max_lag < 1:
        return
    assert_matches_oracle(z.astype(float), max_lag)


def model_estimate(c0, a, lags, counts=None, form="a_squared"):
    lags = np.asarray(lags, dtype=float)
    D = a * a if form == "a_squared" else a
    gamma = c0 * (1 - np.exp(-lags ** 2 / D))
    counts = np.ones_like(lags, dtype=np.int64) * 100 if counts is None else counts
    return VariogramEstimate(lags, gamma, counts, float(lags.max()), 1)


def test_noiseless_fit():
    fit = fit_range(model_estimate(1.0, 5.0, np.arange(1, 33)))
    assert fit.range == pytest.approx(5.0, rel=1e-6)
    assert fit.sill == pytest.approx(1.0, rel=1e-6)
    assert fit.weighted_rss >= 0


def test_noiseless_fit_linear_form():
    fit = fit_range(model_estimate(2.0, 30.0, np.arange(1, 33), form="a_linear"), "a_linear")
    assert fit.range == pytest.approx(30.0, rel=1e-6)
    assert fit.sill == pytest.approx(2.0, rel=1e-6)


def test_fit_invariant_to_count_scaling():
    rng = np.random.default_rng(0)
    lags = np.arange(1, 20)
    counts = rng.integers(10, 1000, size=len(lags))
    v = model_estimate(1.0, 6.0, lags, counts)
    v.gamma = v.gamma * (1 + 0.05 * rng.standard_normal(len(lags)))
    a = fit_range(v)
    b = fit_range(VariogramEstimate(v.lags, v.gamma, counts * 17, v.max_lag, 1))
    assert b.range == pytest.approx(a.range, rel=1e-9)
    assert b.sill == pytest.approx(a.sill, rel=1e-9)


def test_fit_errors():
    with pytest.raises(DegenerateFieldError):
        fit_range(model_estimate(0.0, 5.0, np.arange(1, 10)))
    with pytest.raises(InsufficientDataError):
        fit_range(model_estimate(1.0, 5.0, [1, 2]))
    with pytest.raises(ValidationError):
        fit_range(model_estimate(1.0, 5.0, [1, 2, 3]), model_form="quadratic")
    with pytest.raises(DegenerateFieldError):
        global_range(np.full((32, 32), 1.5))


def test_global_range_a8():
    f = generate_grf(GrfSpec.single(8, nx=512, ny=512, seed=0))
    assert 6 <= global_range(f).range <= 10


def test_global_range_ordering():
    r4 = global_range(generate_grf(GrfSpec.single(4, nx=512, ny=512, seed=3))).range
    r32 = global_range(generate_grf(GrfSpec.single(32, nx=512, ny=512, seed=3))).range
    assert r32 > r4


def test_estimator_api(grf64):
    est = VariogramRange(max_lag=16)
    assert est.get_params()["max_lag"] == 16
    est.fit(grf64.values)
    assert est.range_ > 0 and est.sill_ > 0
    assert est.predict([0.0])[0] == 0.0
    assert est.predict([1e6])[0] == pytest.approx(est.sill_)


def test_window_variograms_match_individual(grf64):
    est = window_variograms(grf64.values, 16)
    for r in range(4):
        for c in range(4):
            w = grf64.values[16 * r:16 * r + 16, 16 * c:16 * c + 16]
            single = empirical_variogram(w, 8)
            np.testing.assert_allclose(est.gamma[r, c], single.gamma, rtol=1e-12)
            np.testing.assert_array_equal(est.counts, single.counts)


def test_local_stats_shape_and_moments(grf64):
    z = grf64.values[:, :50]
    ls = local_variogram_stats(z, H=16)
    assert ls.values.shape == (4, 3)
    assert ls.std == pytest.approx(float(np.std(ls.values)), abs=0)
    assert ls.mean == pytest.approx(float(np.mean(ls.values)))
    assert ls.statistic_name == "local_vario_range"


def test_local_stats_order_independent(grf64):
    z = grf64.values
    ls = local_variogram_stats(z, H=16)
    # permuting whole tiles permutes the window grid and leaves the summary unchanged
    tiles = z.reshape(4, 16, 4, 16)
    perm = tiles[::-1, :, [2, 0, 3, 1], :].reshape(64, 64)
    lp = local_variogram_stats(perm, H=16)
    np.testing.assert_array_equal(np.sort(lp.values, axis=None), np.sort(ls.values, axis=None))
    assert lp.std == pytest.approx(ls.std, rel=1e-12)


def test_local_stats_degenerate_window_saturates():
    z = white_noise(64, 64, seed=0).values
    z[:32, :32] = 1.0
    ls = local_variogram_stats(z, H=32)
    assert ls.values[0, 0] == 16.0


def test_local_stats_insufficient():
    with pytest.raises(InsufficientDataError):
        local_variogram_stats(np.zeros((40, 40)), H=32)


def test_local_homogeneity_and_heterogeneity():
    single = generate_grf(GrfSpec.single(4, nx=256, ny=256, seed=1))
    ls = local_variogram_stats(single, H=32)
    assert ls.std / ls.mean <= 0.5
    half = local_variogram_stats(generate_half_and_half(256, 256, 2, 12, seed=1), H=32)
    assert half.std > ls.std
