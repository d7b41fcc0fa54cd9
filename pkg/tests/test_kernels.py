import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifit import _fallback, kernels
from ifit.models.trait import integer_weights

ck = pytest.importorskip("ifit._ckernels")


@given(st.integers(1, 120), st.integers(1, 4), st.integers(0, 2**32), st.booleans())
def test_knn_backends_agree(n, p, seed, dup):
    rng = np.random.default_rng(seed)
    x = rng.random((n, p))
    if dup:
        x[::3] = x[0]
        x = np.round(x, 1)  # many exact distance ties
    t = rng.standard_normal((n, 2))
    k = int(np.ceil(np.sqrt(n)))
    np.testing.assert_allclose(ck.knn_tricube(x, t, k), _fallback.knn_tricube(x, t, k), rtol=1e-12, atol=1e-14)


def test_gillespie_backends_identical(rng):
    grid = np.arange(1, 51) / 50.0
    for _ in range(20):
        th = rng.uniform(0, 5, 3)
        u = rng.random(20000)
        a, ua = ck.gillespie_mm(*th, 100, 100, 0, 0, grid, u)
        b, ub = _fallback.gillespie_mm(*th, 100, 100, 0, 0, grid, u)
        assert ua == ub
        np.testing.assert_array_equal(a, b)


def test_gillespie_reports_exhausted_buffer():
    grid = np.arange(1, 51) / 50.0
    u = np.full(3, 0.5)
    assert ck.gillespie_mm(5.0, 1.0, 1.0, 100, 100, 0, 0, grid, u)[1] == -1
    assert _fallback.gillespie_mm(5.0, 1.0, 1.0, 100, 100, 0, 0, grid, u)[1] == -1


def test_trait_backends_identical(rng):
    for gamma in (0.0, 0.2, 1.0):
        w = integer_weights([gamma, 0.6, 0.15, 0.8])
        cdf = np.cumsum(w)
        traits = rng.integers(0, w.size, 500).astype(np.int64)
        u = rng.random((3000, 3))
        a_tr, b_tr = traits.copy(), traits.copy()
        a = ck.trait_dynamics(a_tr, w, cdf, gamma, u)
        b = _fallback.trait_dynamics(b_tr, w, cdf, gamma, u)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a_tr, b_tr)
        np.testing.assert_array_equal(np.bincount(a_tr, minlength=w.size), a)


def test_toad_backends_identical(rng):
    d = rng.standard_cauchy((62, 66))
    c, pk = rng.random((62, 66)), rng.random((62, 66))
    for prob in (0.0, 0.6, 1.0):
        np.testing.assert_array_equal(ck.toad_paths(d, c, pk, prob), _fallback.toad_paths(d, c, pk, prob))


def test_backend_is_compiled_by_default():
    if not os.environ.get("IFIT_PURE_PYTHON"):
        assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, IFIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import ifit.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
