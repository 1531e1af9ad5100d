"""Hot numeric kernels, compiled with numba when available.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. ``DIRICHLET_OPS_NUMBA=0`` in the environment (or a missing numba
install) selects the numpy path at import time. Both paths are importable
under explicit names so tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DIRICHLET_OPS_NUMBA", "1").lower() not in ("0", "false", "no")

BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference path

def dirichlet_eval_numpy(logs, coeffs, z):
    """Return sum_k coeffs[k] * exp(-z * logs[k]) for every entry of z."""
    z = np.asarray(z, dtype=np.complex128)
    if logs.size == 0:
        return np.zeros(z.shape, dtype=np.complex128)
    flat = z.reshape(-1)
    out = np.exp(-np.multiply.outer(flat, logs)) @ coeffs
    return out.reshape(z.shape)


def dirichlet_eval_deriv_numpy(logs, coeffs, z):
    """Value and z-derivative of the Dirichlet polynomial at every entry of z."""
    z = np.asarray(z, dtype=np.complex128)
    if logs.size == 0:
        zero = np.zeros(z.shape, dtype=np.complex128)
        return zero, zero.copy()
    flat = z.reshape(-1)
    terms = np.exp(-np.multiply.outer(flat, logs))
    val = terms @ coeffs
    der = terms @ (-logs * coeffs)
    return val.reshape(z.shape), der.reshape(z.shape)


def character_derivative_sq_numpy(amps, logs, exps, angles, sigma, t):
    """|f'_chi(sigma_i + i t_i)|^2 per sample i.

    ``amps[k] = a_k * log(k)``; ``exps`` is the (support x primes) exponent
    matrix, ``angles`` the (samples x primes) character angles, ``sigma`` and
    ``t`` the per-sample abscissa and ordinate.
    """
    phase = angles @ exps.T - np.multiply.outer(t, logs)
    mod = np.exp(-np.multiply.outer(sigma, logs))
    vals = (mod * np.exp(1j * phase)) @ amps
    return vals.real ** 2 + vals.imag ** 2


# ---------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _dirichlet_eval_nb(logs, coeffs, z):
        out = np.empty(z.size, dtype=np.complex128)
        m = logs.size
        for i in range(z.size):
            zi = z[i]
            acc = 0j
            for k in range(m):
                acc += coeffs[k] * np.exp(-zi * logs[k])
            out[i] = acc
        return out

    @njit(cache=True)
    def _dirichlet_eval_deriv_nb(logs, coeffs, z):
        val = np.empty(z.size, dtype=np.complex128)
        der = np.empty(z.size, dtype=np.complex128)
        m = logs.size
        for i in range(z.size):
            zi = z[i]
            acc = 0j
            dacc = 0j
            for k in range(m):
                term = coeffs[k] * np.exp(-zi * logs[k])
                acc += term
                dacc -= logs[k] * term
            val[i] = acc
            der[i] = dacc
        return val, der

    @njit(cache=True)
    def _character_derivative_sq_nb(amps, logs, exps, angles, sigma, t):
        ns = angles.shape[0]
        m = amps.size
        npr = angles.shape[1]
        out = np.empty(ns)
        for i in range(ns):
            acc = 0j
            for k in range(m):
                ph = -t[i] * logs[k]
                for j in range(npr):
                    ph += exps[k, j] * angles[i, j]
                acc += amps[k] * np.exp(-sigma[i] * logs[k]) * np.exp(1j * ph)
            out[i] = acc.real * acc.real + acc.imag * acc.imag
        return out


def dirichlet_eval_numba(logs, coeffs, z):
    z = np.asarray(z, dtype=np.complex128)
    out = _dirichlet_eval_nb(logs, coeffs, np.ascontiguousarray(z.reshape(-1)))
    return out.reshape(z.shape)


def dirichlet_eval_deriv_numba(logs, coeffs, z):
    z = np.asarray(z, dtype=np.complex128)
    val, der = _dirichlet_eval_deriv_nb(logs, coeffs, np.ascontiguousarray(z.reshape(-1)))
    return val.reshape(z.shape), der.reshape(z.shape)


def character_derivative_sq_numba(amps, logs, exps, angles, sigma, t):
    return _character_derivative_sq_nb(
        np.ascontiguousarray(amps, dtype=np.complex128),
        np.ascontiguousarray(logs, dtype=np.float64),
        np.ascontiguousarray(exps, dtype=np.float64),
        np.ascontiguousarray(angles, dtype=np.float64),
        np.ascontiguousarray(sigma, dtype=np.float64),
        np.ascontiguousarray(t, dtype=np.float64),
    )


if USE_NUMBA:
    dirichlet_eval = dirichlet_eval_numba
    dirichlet_eval_deriv = dirichlet_eval_deriv_numba
    character_derivative_sq = character_derivative_sq_numba
else:
    dirichlet_eval = dirichlet_eval_numpy
    dirichlet_eval_deriv = dirichlet_eval_deriv_numpy
    character_derivative_sq = character_derivative_sq_numpy
