import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylstereo import _core_py, kernels

_core = pytest.importorskip("cylstereo._core")

KIND_CODES = [0, 1, 2, 3]


def data(seed, n):
    rng = np.random.default_rng(seed)
    return rng.gamma(2.0, 1.0, n) + 1e-3, rng.gamma(2.0, 1.0, n) + 1e-3


def test_compiled_backend_selected():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("kind", KIND_CODES)
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(kind, seed):
    z, h = data(seed, 60)
    p = np.unique(np.concatenate([[0.0], _core_py.poles(z, h, kind)]))
    t = np.sort(np.concatenate([p, np.geomspace(1e-3, p[-1] * 1.5, 40)]))
    np.testing.assert_allclose(_core.poles(z, h, kind), _core_py.poles(z, h, kind), rtol=1e-14)
    np.testing.assert_allclose(_core.un_grid(z, h, kind, t), _core_py.un_grid(z, h, kind, t), rtol=1e-12, atol=0)
    off = np.geomspace(1e-3, p[-1] * 1.5, 37)
    v1, hit1 = _core.ntilde_grid(z, h, kind, off)
    v2, hit2 = _core_py.ntilde_grid(z, h, kind, off)
    np.testing.assert_allclose(v1, v2, rtol=1e-12)
    np.testing.assert_array_equal(hit1, hit2)
    np.testing.assert_array_equal(
        _core.window_count_grid(z, h, kind, off, 0.05), _core_py.window_count_grid(z, h, kind, off, 0.05)
    )


@pytest.mark.parametrize("kind", KIND_CODES)
def test_pole_hits_agree(kind):
    z, h = data(1, 20)
    p = _core_py.poles(z, h, kind)
    _, hit1 = _core.ntilde_grid(z, h, kind, np.sort(p))
    _, hit2 = _core_py.ntilde_grid(z, h, kind, np.sort(p))
    assert hit1.sum() >= 20 and hit2.sum() >= 20


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_upper_hull_backends_agree(vals):
    t = np.arange(len(vals), dtype=float)
    u = np.asarray(vals)
    np.testing.assert_array_equal(_core.upper_hull(t, u), _core_py.upper_hull(t, u))
