import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import ndimage

from sigid import _backend, _fallback

core = pytest.importorskip("sigid._core", reason="compiled extension not built")


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "python")
    if os.environ.get("SIGID_PURE_PYTHON", "") in ("", "0"):
        assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    out = subprocess.run([sys.executable, "-c", "from sigid import _backend; print(_backend.BACKEND)"],
                         env=dict(os.environ, SIGID_PURE_PYTHON="1"), capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("seed", range(30))
def test_zhang_suen_agree(seed):
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.random((40, 60)), rng.uniform(0.8, 3))
    img = np.pad((field > np.quantile(field, rng.uniform(0.3, 0.8))).astype(np.uint8), 1)
    np.testing.assert_array_equal(core.zhang_suen(img), _fallback.zhang_suen(img))


@pytest.mark.parametrize("seed", range(15))
def test_smo_agree_bitwise(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 200))
    x = rng.uniform(0, 1, (n, 3))
    y = np.where(rng.random(n) < 0.3, 1.0, -1.0)
    y[:2] = (1.0, -1.0)
    k = x @ x.T
    K = np.ascontiguousarray((k + k.T) / 2)
    C = float(rng.choice([0.5, 10.0, 1e3]))
    runs = []
    for mod in (core, _fallback):
        alpha, grad = np.zeros(n), -np.ones(n)
        it, ok = mod.smo_solve(K, y, C, alpha, grad, 1e-3, 1000 * n)
        runs.append((alpha, grad, it, ok))
    (a1, g1, i1, ok1), (a2, g2, i2, ok2) = runs
    assert (i1, ok1) == (i2, ok2)
    assert np.array_equal(a1, a2) and np.array_equal(g1, g2)
