"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python3 -m pytest tests/test_acceptance.py -v``; the lines are
collected again in the terminal summary.
"""

import filecmp
import time
from pathlib import Path

import numpy as np
import pytest

from dirichlet_ops.carleson import corollary4_estimate, theorem8_check
from dirichlet_ops.cli import main as cli_main
from dirichlet_ops.counting import N_beta, N_beta_via_lemma1, littlewood_check
from dirichlet_ops.dirichlet_core import DirichletPolynomial, Symbol, compose
from dirichlet_ops.operators import certify, compactness_report, hs_norm, norms_over_truncations
from dirichlet_ops.spaces import (
    AlphaFamily,
    kernel_coefficients,
    lp_weight_identity,
    mc_derivative_energy,
    norm_Amu2,
    norm_Amu2k,
    pairing,
    smooth_indices,
)
from dirichlet_ops.suite import generate_corpus

from conftest import random_poly

ROOT = Path(__file__).resolve().parents[1]
MU = AlphaFamily(0.0)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(seed=2024, count=20, c0_choices=(1, 2))


@pytest.fixture(scope="module")
def s_grid():
    rng = np.random.default_rng(50)
    return [complex(x, y) for x, y in zip(rng.uniform(0.01, 3.0, 50), rng.uniform(-10.0, 10.0, 50))]


def test_c01_littlewood_paley_identity(record_criterion):
    worst = 0.0
    for alpha in (0.0, 1.0, 2.5):
        mu = AlphaFamily(alpha)
        for n in range(2, 101):
            worst = max(worst, lp_weight_identity(n, mu).rel_error)
    assert record_criterion(1, "Littlewood-Paley weight identity", worst <= 1e-8, f"max rel error {worst:.2e}")


def test_c02_monte_carlo_energy(record_criterion):
    rng = np.random.default_rng(7)
    zs = []
    for i in range(5):
        f = random_poly(rng, support=20, terms=5)
        zs.append(mc_derivative_energy(f, 0.25, samples=100_000, seed=i).z_score)
    worst = max(abs(z) for z in zs)
    assert record_criterion(2, "Monte Carlo character/t integral", worst <= 3.0, f"max |z| {worst:.2f}")


def test_c03_contraction(corpus, record_criterion):
    worst, monotone = 0.0, True
    for Phi in corpus:
        vals = [v for _, v in norms_over_truncations(Phi, MU, [64, 256, 1024])]
        worst = max(worst, max(vals))
        monotone &= all(b >= a for a, b in zip(vals, vals[1:]))
    ok = worst <= 1 + 1e-6 and monotone
    assert record_criterion(3, "contraction on truncations", ok, f"max norm {worst:.12f}, nondecreasing={monotone}")


def test_c04_littlewood_inequality(corpus, s_grid, record_criterion):
    violations, live = 0, 0
    for Phi in corpus:
        rep = littlewood_check(Phi, s_grid, MU, tol=1e-9)
        violations += len(rep.violations)
        live += sum(1 for r in rep.rows if r[4] > 0)
    ident = certify(Symbol(1, DirichletPolynomial()))
    eq = max(abs(N_beta(ident, s, MU).value - float(MU.beta(s.real))) for s in s_grid)
    ok = violations == 0 and eq <= 1e-9
    assert record_criterion(4, "Littlewood inequality", ok,
                            f"{violations} violations over {len(corpus) * len(s_grid)} points "
                            f"({live} with preimages), identity equality error {eq:.1e}")


def test_c05_translate_integral(corpus, s_grid, record_criterion):
    worst = 0.0
    for Phi in corpus:
        for s in s_grid:
            direct = N_beta(Phi, s, MU).value
            via = N_beta_via_lemma1(Phi, s, MU).value
            worst = max(worst, abs(direct - via) / max(1.0, direct))
    dil = 0.0
    for c0 in (1, 2, 3):
        Phi = certify(Symbol(c0, DirichletPolynomial()))
        for s in s_grid:
            dil = max(dil, abs(N_beta_via_lemma1(Phi, s, MU).value - float(MU.beta(s.real / c0))))
    ok = worst <= 1e-6 and dil <= 1e-9
    assert record_criterion(5, "translate-integral cross-validation", ok, f"max scaled diff {worst:.1e}, dilations {dil:.1e}")


def test_c06_hilbert_schmidt(record_criterion):
    Phi = certify(Symbol(0, DirichletPolynomial({1: 1.25, 2: 0.25})), "c0_zero", eta=0.5)
    rs = [hs_norm(Phi, MU, N) for N in (100, 1000, 10000)]
    partial = [r.partial for r in rs]
    upper = [r.partial + r.tail_bound + r.term_error for r in rs]
    ratio = rs[-1].tail_bound / rs[-1].partial
    ok = partial == sorted(partial) and upper == sorted(upper, reverse=True) and ratio < 1e-3
    assert record_criterion(6, "Hilbert-Schmidt partial sums", ok,
                            f"partials {', '.join(f'{p:.6f}' for p in partial)}; final tail/sum {ratio:.2e}")


def test_c07_norm_path(record_criterion):
    rng = np.random.default_rng(77)
    symbols = generate_corpus(seed=78, count=10, c0_choices=(0, 1, 2))
    N = 4096
    worst = 0.0
    for i, Phi in enumerate(symbols):
        k = 1 + i % 3
        P = random_poly(rng, support=8, terms=3)
        a = norm_Amu2k(compose(P, Phi, N), k, MU, N, strict=False)
        b = norm_Amu2(compose(P ** k, Phi, N), MU) ** (1.0 / k)
        worst = max(worst, abs(a - b) / max(1.0, b))
    assert record_criterion(7, "norm path through powers", worst <= 1e-10, f"max rel diff {worst:.1e}")


def test_c08_compactness_consistency(record_criterion):
    grid = [2.0 ** -j for j in range(1, 13)]
    cases = {
        "s": (Symbol(1, DirichletPolynomial()), "vanishes", False),
        "2s": (Symbol(2, DirichletPolynomial()), "persists", False),
        "s+2-2^-s": (Symbol(1, DirichletPolynomial({1: 2.0, 2: -1.0})), "vanishes", True),
    }
    details, ok = [], True
    for name, (Phi, _, compact) in cases.items():
        Phi = certify(Phi)
        rep = compactness_report(Phi, MU, grid, [0.0, 1.0])
        rho = corollary4_estimate(Phi, MU, grid, [0.0, 1.0])
        want = "vanishes" if compact else "persists"
        agree = rep.re_trend == rep.n_beta_trend == rho.trend == want
        if name == "2s":
            agree &= all(abs(r[2] - 0.5) < 1e-12 for r in rep.rows)
        ok &= agree
        details.append(f"{name}: {rep.re_trend}/{rep.n_beta_trend}/{rho.trend}")
    assert record_criterion(8, "compactness indicators agree", ok, "; ".join(details))


def test_c09_carleson_closed_form(record_criterion):
    ident = certify(Symbol(1, DirichletPolynomial()))
    hs = [2.0 ** -k for k in range(3, 11)]
    rep = theorem8_check(ident, None, hs, 0.0)
    err_n = max(abs(r[1] - r[0] / 2) for r in rep.rows)
    err_l = max(abs(r[2] - 4 * r[0]) for r in rep.rows)
    ratio = max(abs(r[3] - 0.125) for r in rep.rows)
    ok = err_n <= 1e-6 and err_l <= 1e-6 and ratio <= 1e-5
    assert record_criterion(9, "window counting closed form", ok,
                            f"sup N error {err_n:.1e}, lambda error {err_l:.1e}, ratio deviation {ratio:.1e}")


def test_c10_kernel_adjoint(record_criterion):
    rng = np.random.default_rng(10)
    symbols = generate_corpus(seed=11, count=10, c0_choices=(1, 2), support=(2, 4, 8))
    cut = 2 ** 60
    idx = smooth_indices(1, cut)
    worst, worst_tail = 0.0, 0.0
    for Phi in symbols:
        f = random_poly(rng, support=16, terms=4)
        s = complex(rng.uniform(0.3, 1.5), rng.uniform(-5, 5))
        w = complex(Phi(s))
        comp = compose(f, Phi, cut, return_tail=True)
        lhs = pairing(comp.poly, kernel_coefficients(s, MU, idx), MU)
        rhs = pairing(f, kernel_coefficients(w, MU, smooth_indices(1, f.max_index)), MU)
        # omitted indices m > cut contribute at most tail_l1 * cut^{-Re s}
        worst_tail = max(worst_tail, comp.tail_l1 * cut ** (-s.real))
        worst = max(worst, abs(lhs - rhs))
    ok = worst <= 1e-8 and worst_tail <= 1e-9
    assert record_criterion(10, "kernel adjoint identity", ok, f"max diff {worst:.1e}, truncation bound {worst_tail:.1e}")


def test_c11_reproducibility(tmp_path, record_criterion):
    cfg = str(ROOT / "configs" / "default.json")
    t0 = time.perf_counter()
    codes = [cli_main(["verify", "--config", cfg, "--out", str(tmp_path / d), "--quiet"]) for d in ("a", "b")]
    elapsed = time.perf_counter() - t0
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = bool(csvs) and all(filecmp.cmp(tmp_path / "a" / n, tmp_path / "b" / n, shallow=False) for n in csvs)
    ok = same and elapsed < 600 and codes == [0, 0]
    assert record_criterion(11, "verify reproducibility", ok,
                            f"{len(csvs)} CSV files identical={same}, two runs {elapsed:.1f}s, exit codes {codes}")
