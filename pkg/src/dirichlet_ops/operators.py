"""Symbol validation and composition operators C_Phi on H^2 and A_mu^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize, sparse

from .counting import N_beta, N_phi
from .dirichlet_core import (
    Certificate,
    DirichletPolynomial,
    Symbol,
    compose,
    is_smooth,
    first_primes,
    multiply,
)
from .spaces import MeasureDensity, _full_kernel_tail, partial_kernel, weights_for


class ValidationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# validation

def im_bound(phi: DirichletPolynomial) -> float:
    """A = |Im c_1| + sum_{n>=2} |c_n|, a bound on |Im phi| over the closed half-plane."""
    return abs(phi.constant_term.imag) + sum(abs(c) for n, c in phi if n > 1)


def validate_symbol(Phi: Symbol, mode: str = "c0_pos", eta: float = 0.0, tol: float = 1e-12,
                    samples: int = 100_000, t_max: float = 1000.0) -> Certificate:
    """Check the mapping condition Re phi >= target on the right half-plane.

    ``c0_pos`` targets 0; ``c0_zero`` targets 1/2 + eta. The coefficient test
    Re c_1 - sum_{n>=2} |c_n| >= target is a proof; otherwise the boundary
    minimum of Re phi(it) is sampled on [-t_max/2, t_max/2], refined locally,
    and reported as non-rigorous.
    """
    if mode not in ("c0_pos", "c0_zero"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "c0_zero" and not eta > 0:
        raise ValueError("c0_zero mode needs eta > 0")
    target = 0.0 if mode == "c0_pos" else 0.5 + eta
    phi = Phi.phi
    rest = sum(abs(c) for n, c in phi if n > 1)
    margin = phi.constant_term.real - rest - target
    if margin >= 0:
        return Certificate(mode, "sufficient", margin, eta)
    t = np.linspace(-0.5 * t_max, 0.5 * t_max, samples)
    re = phi.eval_array(1j * t).real
    i = int(np.argmin(re))
    step = t[1] - t[0]
    res = optimize.minimize_scalar(lambda x: phi(1j * x).real, bounds=(t[i] - step, t[i] + step),
                                   method="bounded", options={"xatol": 1e-12})
    t_min, low = (float(res.x), float(res.fun)) if res.fun < re[i] else (float(t[i]), float(re[i]))
    sampled_margin = low - target
    if sampled_margin < -tol:
        return Certificate(mode, "invalid", sampled_margin, eta, witness_t=t_min, samples=samples)
    return Certificate(mode, "empirical", sampled_margin, eta, witness_t=t_min, samples=samples)


def certify(Phi: Symbol, mode: Optional[str] = None, eta: float = 0.0, **kw) -> Symbol:
    """``Phi`` with its certificate and coefficient Im-bound attached."""
    mode = mode or ("c0_pos" if Phi.c0 >= 1 else "c0_zero")
    cert = validate_symbol(Phi, mode, eta, **kw)
    return Phi.with_certificate(cert, im_bound=im_bound(Phi.phi))


def _require_valid(Phi: Symbol):
    cert = Phi.validity
    if cert is None:
        raise ValidationError("symbol has no validation certificate (call certify first)")
    if not cert.valid:
        raise ValidationError(f"symbol failed validation (witness t={cert.witness_t})")
    if Phi.c0 == 0 and not (cert.mode == "c0_zero" and cert.eta > 0):
        raise ValidationError("c0 = 0 symbols need a c0_zero certificate with eta > 0")


# ---------------------------------------------------------------------------
# truncated matrices

@dataclass
class OperatorMatrix:
    """M[m-1, n-1] = coefficient of e_m^mu in C_Phi(e_n^mu), m, n <= N."""

    N: int
    matrix: sparse.csc_matrix
    symbol: Symbol
    measure: Optional[MeasureDensity]
    dropped: np.ndarray = field(repr=False)  # per column: l1 mass of e_n o Phi beyond N

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def operator_matrix(Phi: Symbol, mu: Optional[MeasureDensity], N: int) -> OperatorMatrix:
    """Truncated matrix of C_Phi in the orthonormal basis e_n / sqrt(w_h(n))."""
    _require_valid(Phi)
    w = weights_for(range(1, N + 1), mu)
    rows, cols, vals = [], [], []
    dropped = np.zeros(N)
    for n in range(1, N + 1):
        comp = compose(DirichletPolynomial.monomial(n), Phi, N, return_tail=True)
        dropped[n - 1] = comp.tail_l1
        scale = 1.0 / math.sqrt(w[n - 1])
        for m, c in comp.poly:
            rows.append(m - 1)
            cols.append(n - 1)
            vals.append(c * math.sqrt(w[m - 1]) * scale)
    M = sparse.csc_matrix((np.array(vals, dtype=np.complex128), (rows, cols)), shape=(N, N))
    return OperatorMatrix(N, M, Phi, mu, dropped)


class NormEstimate(NamedTuple):
    value: float
    iterations: int
    residual: float
    vector: np.ndarray


def operator_norm(M, tol: float = 1e-12, max_iter: int = 10_000, start: Optional[np.ndarray] = None) -> NormEstimate:
    """Largest singular value by power iteration on M^H M.

    Rayleigh quotients of a positive semidefinite matrix increase along the
    iteration and never exceed the top eigenvalue, so the value is a lower
    bound for the truncated norm, which is itself a lower bound for the norm
    of the operator. ``start`` (padded with zeros if shorter) warm-starts the
    iteration; seeding with the top vector of a smaller truncation makes the
    sequence over growing N nondecreasing.
    """
    A = M.matrix if isinstance(M, OperatorMatrix) else M
    n = A.shape[1]
    if n == 0:
        return NormEstimate(0.0, 0, 0.0, np.zeros(0))
    AH = A.conj().T
    v = np.ones(n, dtype=np.complex128) / np.sqrt(np.arange(1, n + 1))
    if start is not None and np.linalg.norm(start[:n]) > 0:
        v = np.zeros(n, dtype=np.complex128)
        v[: len(start)] = start[:n]
    v = v / np.linalg.norm(v)
    lam = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        Av = A @ v
        w = AH @ Av
        lam_new = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return NormEstimate(0.0, it, 0.0, v)
        residual = float(np.linalg.norm(w - lam_new * v))
        converged = abs(lam_new - lam) <= tol * max(lam_new, 1e-300) and residual <= math.sqrt(tol) * max(lam_new, 1e-300)
        lam = max(lam, lam_new)
        v = w / nw
        if converged:
            return NormEstimate(math.sqrt(lam), it, residual, v)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", residual)


def norms_over_truncations(Phi: Symbol, mu: Optional[MeasureDensity], Ns: Sequence[int], tol: float = 1e-12) -> list:
    """operator_norm at increasing N, each run warm-started from the previous top vector."""
    out = []
    start = None
    for N in sorted(Ns):
        est = operator_norm(operator_matrix(Phi, mu, N), tol=tol, start=start)
        out.append((N, est.value))
        start = est.vector
    return out


# ---------------------------------------------------------------------------
# Hilbert-Schmidt sums

class HSResult(NamedTuple):
    partial: float
    tail_bound: float
    N: int
    term_error: float  # bound on the error in the computed terms from series truncation
    terms: np.ndarray


def hs_norm(Phi: Symbol, mu: Optional[MeasureDensity], N: int, series_cutoff: int = 2 ** 40) -> HSResult:
    """sum_{n<=N} ||C_Phi(e_n^mu)||^2 and a bound on the remaining terms.

    For c0 = 0, ``e_n o Phi = n^{-c_1} exp(-log(n) phi_0)``. The powers
    phi_0^m / m! are expanded once (up to ``series_cutoff``) and every column
    is a polynomial in log n over them. The tail bound sums
    n^{-1-2 eta} / w_h(n) over n > N, which dominates every omitted term
    under Re Phi >= 1/2 + eta.
    """
    _require_valid(Phi)
    cert = Phi.validity
    if Phi.c0 != 0 or cert.mode != "c0_zero":
        raise ValidationError("hs_norm needs a c0 = 0 symbol with a c0_zero certificate")
    eta = cert.eta
    phi0 = Phi.phi.without_constant()
    c1 = Phi.c1
    # Q_m = phi0^m / m! truncated at series_cutoff
    powers = [DirichletPolynomial.constant(1.0)]
    abs_powers = [DirichletPolynomial.constant(1.0)]
    term, aterm = powers[0], abs_powers[0]
    m = 1
    while phi0 and (1 << m) <= series_cutoff:
        term = multiply(term, phi0, series_cutoff) / m
        aterm = multiply(aterm, phi0.abs(), series_cutoff) / m
        if not term and not aterm:
            break
        powers.append(term)
        abs_powers.append(aterm)
        m += 1
    index = sorted({k for p in powers for k in p.support})
    pos = {k: i for i, k in enumerate(index)}
    Q = np.zeros((len(index), len(powers)), dtype=np.complex128)
    for j, p in enumerate(powers):
        for k, c in p:
            Q[pos[k], j] = c
    kept_abs = np.array([p.l1_norm() for p in abs_powers])
    wk = weights_for(index, mu)
    ns = np.arange(1, N + 1, dtype=np.float64)
    L = np.log(ns)
    V = np.power.outer(-L, np.arange(len(powers)))  # (N, M)
    coeffs = V @ Q.T  # (N, K)
    scale2 = np.exp(-2.0 * c1.real * L)
    sq = (np.abs(coeffs) ** 2) @ wk
    wn = weights_for(range(1, N + 1), mu)
    terms = scale2 * sq / wn
    # dropped l1 mass per column: exp(L ||phi0||_1) minus the kept absolute series
    full = np.exp(L * phi0.l1_norm())
    kept = np.power.outer(L, np.arange(len(powers))) @ kept_abs
    drop = np.sqrt(scale2) * np.maximum(full - kept, 0.0)
    norm_n = np.sqrt(scale2 * sq)
    term_error = float(np.sum((2 * norm_n * drop + drop ** 2) / wn))
    tail = _full_kernel_tail(1.0 + 2.0 * eta, N, mu)
    return HSResult(float(np.sum(terms)), tail, N, term_error, terms)


# ---------------------------------------------------------------------------
# essential norm estimators

def trend(values: Sequence[float], rel: float = 0.05, floor: float = 1e-12) -> str:
    """'vanishes' if the last grid value is below rel * max (or floor); else 'persists'.

    Heuristic reading of a limit along a grid ordered toward the limit point.
    """
    vals = [float(v) for v in values]
    if not vals:
        return "empty"
    top = max(vals)
    last = vals[-1]
    if last <= floor or last <= rel * top:
        return "vanishes"
    return "persists"


def default_sigma_grid(j_max: int = 12, j_min: int = 1) -> list:
    return [2.0 ** -j for j in range(j_min, j_max + 1)]


def default_t_window(Phi: Symbol, center: float = 0.0, points: int = 5) -> list:
    A = Phi.im_bound if Phi.im_bound is not None else Phi.coefficient_im_bound()
    half = A + Phi.c0 + 1.0
    return [float(t) for t in np.linspace(center - half, center + half, points)]


@dataclass
class EssNormEstimate:
    value: float  # factor * max ratio over the whole grid
    tail_value: float  # factor * max ratio over the smallest sigma
    factor: float
    rows: list  # (sigma, t, N_beta, beta(sigma), ratio)
    trend: str
    rigorous: bool = False
    limit: float = 0.0  # extrapolated sigma -> 0 limit of the scaled per-sigma readings
    limit_error: float = 0.0


def essnorm_upper(Phi: Symbol, mu: MeasureDensity, sigma_grid: Optional[Sequence[float]] = None,
                  t_window: Optional[Sequence[float]] = None, delta: float = 1e-6) -> EssNormEstimate:
    """(2A + c0) * max_grid N_{beta,Phi}(s) / beta_h(Re s), a grid reading of the limsup bound."""
    if Phi.c0 < 1:
        raise ValueError("essnorm_upper needs c0 >= 1")
    _require_valid(Phi)
    sig = sorted(sigma_grid or default_sigma_grid(), reverse=True)
    ts = list(t_window) if t_window is not None else default_t_window(Phi)
    A = Phi.im_bound if Phi.im_bound is not None else im_bound(Phi.phi)
    factor = 2.0 * A + Phi.c0
    rows, per_sigma = [], []
    for s_re in sig:
        b = float(mu.beta(s_re))
        best = 0.0
        for t in ts:
            nb = N_beta(Phi, complex(s_re, t), mu, delta).value
            r = nb / b
            rows.append((s_re, t, nb, b, r))
            best = max(best, r)
        per_sigma.append(best)
    lim, err = extrapolate_limit(per_sigma)
    return EssNormEstimate(factor * max(per_sigma), factor * per_sigma[-1], factor, rows, trend(per_sigma),
                           limit=factor * lim, limit_error=factor * err)


def extrapolate_limit(values: Sequence[float]) -> tuple:
    """Aitken delta-squared estimate of the limit of a sequence and its distance to the last term.

    Falls back on the last term (error: the last increment) when fewer than
    three terms exist or the second difference vanishes.
    """
    v = [float(x) for x in values]
    if len(v) < 3:
        return v[-1], (abs(v[-1] - v[-2]) if len(v) == 2 else 0.0)
    x0, x1, x2 = v[-3:]
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    if denom == 0.0 or abs(denom) <= 1e-15 * max(1.0, abs(x2)):
        return x2, abs(d2)
    est = x2 - d2 * d2 / denom
    return est, abs(x2 - est)


def _check_smooth(Phi: Symbol, l: int):
    bound = first_primes(l)[-1]
    for n in Phi.phi.support:
        if not is_smooth(n, bound):
            raise ValidationError(f"index {n} of phi has a prime factor above p_{l} = {bound}")


@dataclass
class EssNormLower:
    value: float
    rows: list  # (sigma, t, kernel_ratio, re_ratio)
    kernel_trend: str
    re_trend: str
    tail_value: float = 0.0  # kernel ratio at the smallest sigma
    limit: float = 0.0
    limit_error: float = 0.0


def essnorm_lower(Phi: Symbol, mu: Optional[MeasureDensity], l: int = 1,
                  sigma_grid: Optional[Sequence[float]] = None, t_values: Sequence[float] = (0.0,),
                  tol: float = 1e-12) -> EssNormLower:
    """max_grid sqrt(K^l_{Phi(s)}(Phi(s)) / K^l_s(s)) and the indicator Re s / Re Phi(s)."""
    if Phi.c0 < 1:
        raise ValueError("essnorm_lower needs c0 >= 1")
    _require_valid(Phi)
    _check_smooth(Phi, l)
    sig = sorted(sigma_grid or default_sigma_grid(), reverse=True)
    rows, kr, rr = [], [], []
    for s_re in sig:
        kbest, rbest = 0.0, 0.0
        for t in t_values:
            s = complex(s_re, t)
            w = complex(Phi(s))
            num = partial_kernel(l, w, w, mu, tol=tol).value.real
            den = partial_kernel(l, s, s, mu, tol=tol).value.real
            ratio = math.sqrt(num / den)
            re_ratio = s.real / w.real
            rows.append((s_re, t, ratio, re_ratio))
            kbest, rbest = max(kbest, ratio), max(rbest, re_ratio)
        kr.append(kbest)
        rr.append(rbest)
    return EssNormLower(max(kr), rows, trend(kr), trend(rr), kr[-1], *extrapolate_limit(kr))


def essnorm_gap(upper: EssNormEstimate, lower: EssNormLower) -> float:
    """(upper limit + its error) - (lower limit - its error); negative values flag an inconsistency.

    Both estimators read limits as sigma -> 0, so their extrapolated limits
    are compared rather than grid maxima, which sit at unrelated sigma.
    """
    return (upper.limit + upper.limit_error) - (lower.limit - lower.limit_error)


@dataclass
class CompactnessReport:
    rows: list  # (sigma, t, re_ratio, n_beta_ratio, n_phi_ratio)
    re_trend: str
    n_beta_trend: str
    n_phi_trend: str
    verdict: str  # "compact", "not compact" or "inconclusive"
    heuristic: bool = True


def compactness_report(Phi: Symbol, mu: MeasureDensity, sigma_grid: Optional[Sequence[float]] = None,
                       t_window: Optional[Sequence[float]] = None, delta: float = 1e-6) -> CompactnessReport:
    """Grid trends of Re s / Re Phi(s), N_{beta,Phi}(s)/beta_h(Re s) and N_Phi(s)/Re s."""
    if Phi.c0 < 1:
        raise ValueError("compactness criteria need c0 >= 1")
    _require_valid(Phi)
    sig = sorted(sigma_grid or default_sigma_grid(), reverse=True)
    ts = list(t_window) if t_window is not None else default_t_window(Phi)
    rows = []
    re_s, nb_s, np_s = [], [], []
    for s_re in sig:
        b = float(mu.beta(s_re))
        a, bb, c = 0.0, 0.0, 0.0
        for t in ts:
            s = complex(s_re, t)
            rr = s_re / complex(Phi(s)).real
            nbr = N_beta(Phi, s, mu, delta).value / b
            npr = N_phi(Phi, s, delta).value / s_re
            rows.append((s_re, t, rr, nbr, npr))
            a, bb, c = max(a, rr), max(bb, nbr), max(c, npr)
        re_s.append(a)
        nb_s.append(bb)
        np_s.append(c)
    trends = (trend(re_s), trend(nb_s), trend(np_s))
    if all(x == "vanishes" for x in trends):
        verdict = "compact"
    elif all(x == "persists" for x in trends):
        verdict = "not compact"
    else:
        verdict = "inconclusive"
    return CompactnessReport(rows, *trends, verdict)
