"""The compiled kernels and the numpy fallback must produce the same samples."""

import numpy as np
import pytest

from wpextrema import _backend, _fallback
from wpextrema._rng import seed_hash

_kernels = pytest.importorskip("wpextrema._kernels")

SH = seed_hash(20240601)
P0S = np.array([0.5, 0.3, 0.9, 0.75, 0.01, 0.99] * 20)


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "python")


def test_environment_forces_fallback(monkeypatch):
    monkeypatch.setenv("WPEXTREMA_BACKEND", "python")
    mod, name = _backend._load()
    assert mod is _fallback and name == "python"


@pytest.mark.parametrize("continuous", [False, True])
@pytest.mark.parametrize("level", [0.8, 0.5, float("nan"), 1.0])
def test_bridge_extrema(continuous, level):
    a = _kernels.bridge_extrema(P0S, 120, SH, 11, level, continuous)
    b = _fallback.bridge_extrema(P0S, 120, SH, 11, level, continuous)
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-13)
    np.testing.assert_allclose(a[1], b[1], rtol=0, atol=1e-13)
    np.testing.assert_array_equal(a[2], b[2])
    np.testing.assert_array_equal(a[3], b[3])
    np.testing.assert_allclose(a[4], b[4], rtol=0, atol=1e-13)


def test_bridge_paths():
    a, ya = _kernels.bridge_paths(P0S, 64, SH, 3)
    b, yb = _fallback.bridge_paths(P0S, 64, SH, 3)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(ya, yb)


@pytest.mark.parametrize("budget", [7, 10_000])
def test_grid_walk(budget):
    m0 = np.array([1, 3, 5, 9, 0, 10] * 30, dtype=np.int64)
    for got, want in zip(_kernels.grid_walk(m0, 10, budget, SH, 2, 8),
                         _fallback.grid_walk(m0, 10, budget, SH, 2, 8)):
        np.testing.assert_array_equal(got, want)


def test_grid_paths():
    np.testing.assert_array_equal(_kernels.grid_paths(4, 10, 60, SH, 5, 300),
                                  _fallback.grid_paths(4, 10, 60, SH, 5, 300))


@pytest.mark.parametrize("m0", [[4, 4, 4], [2, 4, 6], [3, 3, 3, 3, 0], [12, 0, 0], [1, 2, 3, 4, 2]])
def test_nplayer_walk(m0):
    m0 = np.array(m0, dtype=np.int64)
    for got, want in zip(_kernels.nplayer_walk(m0, 12, 5000, SH, 9, 400),
                         _fallback.nplayer_walk(m0, 12, 5000, SH, 9, 400)):
        np.testing.assert_array_equal(got, want)


def test_chunk_boundaries_do_not_matter():
    whole = _kernels.bridge_extrema(P0S, 50, SH, 0, 0.7, False)
    parts = [_kernels.bridge_extrema(P0S[lo:lo + 37], 50, SH, lo, 0.7, False)
             for lo in range(0, P0S.size, 37)]
    for i in range(5):
        np.testing.assert_array_equal(whole[i], np.concatenate([p[i] for p in parts]))
