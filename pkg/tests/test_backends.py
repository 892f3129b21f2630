import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from annealcast import _kernels_py

ck = pytest.importorskip("annealcast._ckernels")

series = arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e6, 1e6))


@given(series, st.floats(0.01, 1.0), st.integers(0, 20))
def test_ema_bit_identical(x, alpha, start):
    assert np.array_equal(_kernels_py.ema(x, alpha, start), ck.ema(x, alpha, start), equal_nan=True)


@given(series, st.integers(1, 30))
def test_wilder_bit_identical(x, period):
    start = period - 1
    assert np.array_equal(_kernels_py.wilder(x, period, start), ck.wilder(x, period, start), equal_nan=True)


@pytest.mark.parametrize("seed", range(5))
def test_cd_sweep_agrees(seed):
    rng = np.random.default_rng(seed)
    X = np.asfortranarray(rng.standard_normal((60, 12)))
    X[:, 4] = 0.0
    r = rng.standard_normal(60)
    pen = np.full(12, 3.0)
    nrm2 = (X * X).sum(axis=0)
    coords = rng.permutation(12).astype(np.intp)
    g1, r1 = np.zeros(12), r.copy()
    g2, r2 = np.zeros(12), r.copy()
    c1 = _kernels_py.cd_sweep(X, r1, g1, pen, nrm2, coords)
    c2 = ck.cd_sweep(X, r2, g2, pen, nrm2, coords)
    # dot products differ only in summation order (BLAS vs a plain loop)
    assert c1 == pytest.approx(c2, abs=1e-12)
    assert np.max(np.abs(g1 - g2)) <= 1e-12 and np.max(np.abs(r1 - r2)) <= 1e-12
    assert g1[4] == g2[4] == 0.0


@pytest.mark.parametrize("pure,expected", [("1", "python"), ("0", "cython")])
def test_backend_switch(pure, expected):
    env = dict(os.environ, ANNEALCAST_PURE=pure)
    out = subprocess.run(
        [sys.executable, "-c", "from annealcast import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected
