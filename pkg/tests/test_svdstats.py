import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lossycorr.exceptions import InsufficientDataError, ValidationError
from lossycorr.fields import GrfSpec, generate_grf, white_noise
from lossycorr.svdstats import local_svd_stats, svd_truncation_level
from oracles import gram_truncation


def zero_mean_rank_k(k, n=32, seed=0):
    """Rank-k window whose entries sum to zero, so centering leaves it unchanged."""
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, k))
    V = rng.standard_normal((n, k))
    U -= U.mean(axis=0)
    w = U @ V.T
    assert abs(w.mean()) < 1e-12
    return w


@pytest.mark.parametrize("k", [1, 2, 5])
def test_rank_k_fixture(k):
    # equal singular values make the k-th mode necessary at 0.99
    rng = np.random.default_rng(k)
    Q1, _ = np.linalg.qr(rng.standard_normal((32, 32)))
    Q2, _ = np.linalg.qr(rng.standard_normal((32, 32)))
    ones = np.ones(32) / np.sqrt(32)
    # columns orthogonal to the all-ones vector keep the window zero-mean
    Q1 = Q1 - np.outer(ones, ones @ Q1)
    Q1, _ = np.linalg.qr(Q1[:, :k])
    w = Q1 @ np.diag(np.linspace(2.0, 1.0, k)) @ Q2[:, :k].T
    assert abs(w.mean()) < 1e-12
    assert svd_truncation_level(w).k == k


def test_two_by_two_three_one():
    # zero-mean 2x2 with singular values {3, 1}
    w = np.array([[2.0, 1.0], [-1.0, -2.0]])
    s = np.linalg.svd(w, compute_uv=False)
    np.testing.assert_allclose(s, [3.0, 1.0])
    t = svd_truncation_level(w)
    assert t.k == 2
    assert svd_truncation_level(w, threshold=0.9).k == 1


@pytest.mark.parametrize("seed", range(5))
def test_gram_oracle_random(seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((32, 32)) @ np.diag(np.geomspace(1, 1e-3, 32)) @ rng.standard_normal((32, 32))
    for thr in (0.5, 0.9, 0.99):
        assert svd_truncation_level(w, thr).k == gram_truncation(w, thr)


def test_constant_window_is_one():
    assert svd_truncation_level(np.full((8, 8), 4.0)).k == 1
    assert svd_truncation_level(np.zeros((8, 8)), center=False).k == 1


def test_invariants_on_random_windows():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(4, 33))
        r = int(rng.integers(1, n + 1))
        w = rng.standard_normal((n, r)) @ rng.standard_normal((r, n))
        k = svd_truncation_level(w).k
        assert svd_truncation_level(w + rng.uniform(-50, 50)).k == k
        c = rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 3)
        assert svd_truncation_level(c * w).k == k


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), t1=st.floats(0.05, 1.0), t2=st.floats(0.05, 1.0))
def test_threshold_monotone(seed, t1, t2):
    w = np.random.default_rng(seed).standard_normal((12, 12))
    lo, hi = sorted((t1, t2))
    t_lo, t_hi = svd_truncation_level(w, lo), svd_truncation_level(w, hi)
    assert t_lo.k <= t_hi.k
    assert t_hi.energy_fraction >= hi - 1e-12
    assert 1 <= t_lo.k <= t_hi.k <= 12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), thr=st.floats(0.05, 0.999))
def test_level_definition(seed, thr):
    w = np.random.default_rng(seed).standard_normal((10, 10))
    t = svd_truncation_level(w, thr)
    s = np.linalg.svd(w - w.mean(), compute_uv=False)
    frac = np.cumsum(s ** 2) / np.sum(s ** 2)
    assert frac[t.k - 1] >= thr - 1e-12
    assert t.k == 1 or frac[t.k - 2] < thr


@pytest.mark.parametrize("thr", [0.0, -0.1, 1.5, float("nan")])
def test_bad_threshold(thr):
    with pytest.raises(ValidationError):
        svd_truncation_level(np.eye(4), thr)


def test_local_identical_rank_one_windows():
    tile = zero_mean_rank_k(1, n=16)
    z = np.tile(tile, (4, 3))
    ls = local_svd_stats(z, H=16)
    assert ls.values.shape == (4, 3)
    assert ls.std == 0.0 and ls.mean == 1.0


def test_local_matches_per_window(grf64):
    ls = local_svd_stats(grf64.values, H=16)
    for r in range(4):
        for c in range(4):
            w = grf64.values[16 * r:16 * r + 16, 16 * c:16 * c + 16]
            assert ls.values[r, c] == svd_truncation_level(w).k
    assert ls.statistic_name == "svd_truncation_std"
    assert ls.params["threshold"] == 0.99


def test_local_order_independent(grf64):
    z = grf64.values
    perm = z.reshape(4, 16, 4, 16)[[1, 3, 0, 2]].reshape(64, 64)
    a, b = local_svd_stats(z, H=16), local_svd_stats(perm, H=16)
    np.testing.assert_array_equal(np.sort(a.values, axis=None), np.sort(b.values, axis=None))
    assert a.std == b.std


def test_smooth_needs_fewer_modes():
    smooth = local_svd_stats(generate_grf(GrfSpec.single(32, nx=256, ny=256, seed=1)), H=32)
    noise = local_svd_stats(white_noise(256, 256, seed=1), H=32)
    assert smooth.mean < noise.mean


def test_local_insufficient():
    with pytest.raises(InsufficientDataError):
        local_svd_stats(np.zeros((40, 70)), H=32)
