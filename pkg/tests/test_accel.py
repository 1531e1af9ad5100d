import os
import subprocess
import sys

import numpy as np
import pytest

from dirichlet_ops import _accel


@pytest.fixture
def poly_arrays():
    rng = np.random.default_rng(0)
    n = np.array([1, 2, 3, 5, 6, 12, 30])
    return np.log(n.astype(float)), rng.normal(size=n.size) + 1j * rng.normal(size=n.size)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_eval_backends_agree(poly_arrays):
    logs, cs = poly_arrays
    z = np.random.default_rng(1).normal(size=(7, 9)) + 1j * np.random.default_rng(2).normal(size=(7, 9))
    a = _accel.dirichlet_eval_numpy(logs, cs, z)
    b = _accel.dirichlet_eval_numba(logs, cs, z)
    assert a.shape == z.shape
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    va, da = _accel.dirichlet_eval_deriv_numpy(logs, cs, z)
    vb, db = _accel.dirichlet_eval_deriv_numba(logs, cs, z)
    assert np.allclose(va, vb, rtol=1e-13, atol=1e-13) and np.allclose(da, db, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_character_kernel_backends_agree(poly_arrays):
    logs, cs = poly_arrays
    exps = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [2, 1, 0], [1, 1, 1]], dtype=float)
    rng = np.random.default_rng(3)
    angles = rng.uniform(0, 2 * np.pi, size=(500, 3))
    sigma, t = rng.exponential(size=500), rng.uniform(size=500)
    a = _accel.character_derivative_sq_numpy(cs * logs, logs, exps, angles, sigma, t)
    b = _accel.character_derivative_sq_numba(cs * logs, logs, exps, angles, sigma, t)
    assert np.allclose(a, b, rtol=1e-12)


def test_eval_matches_direct_sum(poly_arrays):
    logs, cs = poly_arrays
    z = 0.4 - 2.0j
    ref = np.sum(cs * np.exp(-z * logs))
    assert _accel.dirichlet_eval_numpy(logs, cs, np.array([z]))[0] == pytest.approx(ref, rel=1e-14)


def test_env_flag_selects_numpy():
    env = dict(os.environ, DIRICHLET_OPS_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from dirichlet_ops import _accel; print(_accel.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
