import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dirichlet_ops.dirichlet_core import DirichletPolynomial, e
from dirichlet_ops.spaces import (
    AlphaFamily,
    Tabulated,
    WeightTable,
    kappa_check,
    kernel,
    kernel_coefficients,
    lp_weight_identity,
    mc_derivative_energy,
    mc_lp_check,
    measure_from_json,
    norm_Amu2,
    norm_Amu2k,
    norm_H2,
    norm_H2k,
    pairing,
    partial_kernel,
    smooth_indices,
    smooth_logs,
    weight,
    weight_quadrature,
)

alphas = st.floats(-0.9, 6.0)


def hat_density():
    """Linear decay from 2 at 0 to 0 at 1 (a probability density)."""
    return Tabulated((0.0, 1.0), (2.0, 0.0))


# -- measures -----------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.5, -0.5])
def test_alpha_weight_against_mpmath(alpha):
    mu = AlphaFamily(alpha)
    for n in (2, 7, 100):
        # substitute sigma = u^2 so the sigma^alpha endpoint singularity disappears
        ref = mpmath.quad(lambda u: 2 * u * mpmath.power(n, -2 * u * u) * 2 ** (alpha + 1)
                          / mpmath.gamma(alpha + 1) * u ** (2 * alpha) * mpmath.exp(-2 * u * u),
                          [0, 1, mpmath.inf])
        assert weight(n, mu) == pytest.approx(float(ref), rel=1e-12)


@given(alphas, st.floats(1e-6, 80.0))
def test_alpha_beta_matches_quadrature(alpha, sigma):
    mu = AlphaFamily(alpha)
    ref, _ = integrate.quad(lambda u: (sigma - u) * mu.density(u), 0.0, sigma, limit=200,
                            epsabs=0, epsrel=1e-11)
    assert mu.beta(sigma) == pytest.approx(ref, rel=1e-7, abs=1e-300)


@given(alphas)
def test_beta_small_sigma_asymptotics(alpha):
    # beta(s) ~ C s^{a+2} / ((a+1)(a+2)), C = 2^{a+1}/Gamma(a+1)
    mu = AlphaFamily(alpha)
    s = 1e-7
    C = 2 ** (alpha + 1) / math.gamma(alpha + 1)
    assert mu.beta(s) == pytest.approx(C * s ** (alpha + 2) / ((alpha + 1) * (alpha + 2)), rel=1e-5)


def test_alpha_rejects_bad_parameter():
    with pytest.raises(ValueError):
        AlphaFamily(-1.0)


def test_tabulated_exact_formulas():
    mu = hat_density()
    for s in (0.1, 0.5, 0.99, 2.0):
        top = min(s, 1.0)
        assert mu.cdf(s) == pytest.approx(integrate.quad(mu.density, 0, top)[0], rel=1e-12)
        assert mu.first_moment(s) == pytest.approx(integrate.quad(lambda u: u * mu.density(u), 0, top)[0],
                                                   rel=1e-12)
        assert mu.beta(s) == pytest.approx(integrate.quad(lambda u: (s - u) * mu.density(u), 0, top)[0],
                                           rel=1e-11)
    for n in (2, 5, 1000):
        ref = integrate.quad(lambda u: n ** (-2 * u) * mu.density(u), 0, 1, epsabs=0, epsrel=1e-13)[0]
        assert weight(n, mu) == pytest.approx(ref, rel=1e-11)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        Tabulated((0.0, 1.0), (1.0, 1.0 + 1e-2))  # mass off by 5e-3
    with pytest.raises(ValueError):
        Tabulated((0.0, 1.0, 2.0), (0.0, 0.0, 1.0))  # 0 not in the support
    mu = Tabulated.normalized((0.0, 1.0, 3.0), (1.0, 1.0, 0.0))
    assert mu.cdf(3.0) == pytest.approx(1.0)


def test_measure_json_round_trip():
    for mu in (AlphaFamily(1.5), hat_density()):
        assert measure_from_json(mu.to_json()) == mu


def test_weight_quadrature_agrees_with_closed_form():
    mu = AlphaFamily(1.0)
    wq = weight_quadrature(37, mu)
    assert wq.value == pytest.approx(weight(37, mu), rel=1e-10)


def test_weight_table_is_read_only():
    table = WeightTable(AlphaFamily(0.0), 10)
    assert table[1] == 1.0
    assert table[3] == pytest.approx(1.0 / (1.0 + math.log(3)))
    with pytest.raises(ValueError):
        table.values[0] = 2.0


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.5])
def test_inverse_weight_bound_holds(alpha):
    mu = AlphaFamily(alpha)
    for eps in (0.05, 0.3, 1.0):
        C = mu.inv_weight_bound(eps)
        n = np.unique(np.logspace(0, 12, 400).astype(np.int64))
        assert np.all(1.0 / mu.weight_log(np.log(n)) <= C * n.astype(float) ** eps * (1 + 1e-12))


# -- norms ----------------------------------------------------------------------

def test_norm_examples():
    assert norm_H2(e(2) + e(3)) == pytest.approx(math.sqrt(2))
    mu = AlphaFamily(0.0)
    f = DirichletPolynomial({1: 1.0, 2: 2.0})
    assert norm_Amu2(f, mu) == pytest.approx(math.sqrt(1 + 4 / (1 + math.log(2))))
    assert norm_Amu2(f, None) == pytest.approx(norm_H2(f))


def test_h2k_norm_uses_power():
    f = e(1) + e(2)
    # f^2 = e1 + 2 e2 + e4 -> H^2 norm sqrt(6); H^4 norm = 6^{1/4}
    assert norm_H2k(f, 2) == pytest.approx(6 ** 0.25)


def test_h2k_norm_matches_boundary_average():
    # ||f||_{H^4}^4 equals the Haar average of |f_chi(0)|^4 over the torus in the primes 2, 3
    f = DirichletPolynomial({1: 0.3, 2: 1.0, 3: -0.5j, 6: 0.2})
    th = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    a, b = np.meshgrid(th, th)
    z2, z3 = np.exp(1j * a), np.exp(1j * b)
    vals = 0.3 + z2 - 0.5j * z3 + 0.2 * z2 * z3
    assert norm_H2k(f, 2) == pytest.approx(float(np.mean(np.abs(vals) ** 4)) ** 0.25, rel=1e-12)


def test_strict_power_overflow():
    with pytest.raises(OverflowError):
        norm_Amu2k(e(1000), 3, None, cutoff=10 ** 6)
    assert norm_Amu2k(e(1000), 3, None, cutoff=10 ** 6, strict=False) == 0.0


# -- kernels ----------------------------------------------------------------------

def test_reproducing_property():
    mu = AlphaFamily(1.0)
    f = DirichletPolynomial({1: 0.5, 2: 1 - 1j, 6: 2.0, 9: -0.3j})
    s = 0.8 + 1.3j
    K = kernel_coefficients(s, mu, f.support)
    assert pairing(f, K, mu) == pytest.approx(f(s), abs=1e-13)


def test_full_kernel_brute_force_and_tail():
    mu = AlphaFamily(0.0)
    s, w = 1.1 + 0.5j, 0.9 - 2j
    val = kernel(s, w, mu, cutoff=1000)
    ref = mpmath.nsum(lambda n: (1 + mpmath.log(n)) * mpmath.power(n, -(mpmath.mpc(1.1, -0.5) + mpmath.mpc(0.9, -2))),
                      [1, mpmath.inf])
    assert abs(val.value - complex(ref)) <= val.tail_bound
    assert val.tail_bound < 0.05
    with pytest.raises(ValueError):
        kernel(0.5, 0.4, mu)


def test_smooth_enumeration():
    assert smooth_indices(2, 30) == [1, 2, 3, 4, 6, 8, 9, 12, 16, 18, 24, 27]
    logs = smooth_logs(3, math.log(1000))
    assert np.allclose(np.exp(logs), sorted(smooth_indices(3, 1000)), rtol=1e-12)


def test_partial_kernel_geometric_closed_form():
    # l = 1, H^2: sum_k 2^{-k z} = 1 / (1 - 2^{-z})
    s, w = 0.05 + 1j, 0.02 - 3j
    z = np.conj(s) + w
    val = partial_kernel(1, s, w, None)
    assert val.value == pytest.approx(1.0 / (1.0 - 2.0 ** (-z)), rel=1e-11)


def test_partial_kernel_alpha_closed_form():
    # l = 1, alpha = 0: sum_k (1 + k log 2) q^k, q = 2^{-x}
    x = 0.3
    q = 2.0 ** (-x)
    ref = 1 / (1 - q) + math.log(2) * q / (1 - q) ** 2
    val = partial_kernel(1, x / 2, x / 2, AlphaFamily(0.0))
    assert val.value.real == pytest.approx(ref, rel=1e-11)
    assert val.tail_bound <= 1e-12 * abs(val.value)


def test_partial_kernel_tail_bound_is_valid():
    mu = AlphaFamily(1.0)
    coarse = partial_kernel(2, 0.2, 0.2, mu, cutoff=10 ** 4)
    fine = partial_kernel(2, 0.2, 0.2, mu, tol=1e-13)
    assert abs(fine.value - coarse.value) <= coarse.tail_bound


# -- checks -------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 2.5])
def test_lp_identity_single_index(alpha):
    r = lp_weight_identity(11, AlphaFamily(alpha))
    assert r.rel_error <= 1e-10


def test_lp_identity_tabulated():
    r = lp_weight_identity(5, hat_density())
    assert r.rel_error <= 1e-9


def test_kappa_alpha_family_consistent():
    rep = kappa_check(AlphaFamily(0.0), [0.5, 0.1, 0.01], [2.0 ** -j for j in range(1, 12)])
    # beta(s)/s ~ s^{a+1} for the alpha family, so the ratio behaves like eta^{a+1}
    assert rep.limsup[-1] == pytest.approx(0.01, rel=0.05)
    assert rep.verdict == "consistent with (kappa)"


def test_mc_derivative_energy_within_three_se():
    f = DirichletPolynomial({1: 1.0, 2: 0.7, 3: -0.4j, 6: 0.5, 10: 0.2 + 0.1j})
    r = mc_derivative_energy(f, 0.2, samples=50_000, seed=7)
    assert abs(r.z_score) < 3.0


def test_mc_single_term_has_zero_variance():
    r = mc_derivative_energy(DirichletPolynomial({2: 1.5}), 0.3, samples=1000)
    assert r.estimate == pytest.approx(r.closed_form, rel=1e-12)
    assert r.z_score == 0.0


def test_mc_lp_check_agrees():
    f = DirichletPolynomial({1: 0.5, 2: 1.0, 3: 0.5j, 4: -0.3})
    r = mc_lp_check(f, AlphaFamily(0.0), samples=50_000, seed=3)
    assert abs(r.z_score) < 3.0
    assert r.closed_form == pytest.approx(norm_Amu2(f, AlphaFamily(0.0)) ** 2)


def test_mc_z_scores_are_calibrated():
    # across many seeds the z-scores should look standard normal
    f = DirichletPolynomial({5: 0.4 - 1j, 10: 1.2, 18: -0.7j, 19: 0.3, 20: 0.9 + 0.2j})
    zs = np.array([mc_derivative_energy(f, 0.25, samples=5_000, seed=s).z_score for s in range(200)])
    assert abs(zs.mean()) < 0.3
    assert 0.8 < zs.std() < 1.2
    assert np.mean(np.abs(zs) > 2) < 0.12
