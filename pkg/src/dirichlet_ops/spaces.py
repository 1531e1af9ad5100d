"""Measures on (0, inf), the weights w_h(n), beta_h, norms and kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import _accel
from .dirichlet_core import (
    DEFAULT_CUTOFF,
    DirichletPolynomial,
    factorize,
    first_primes,
    multiply,
    required_horizon,
)


class QuadratureError(RuntimeError):
    """Raised when a quadrature misses its accuracy target."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3e})")
        self.achieved = achieved


class WeightValue(NamedTuple):
    value: float
    error: float
    provenance: str  # "closed-form", "piecewise-exact" or "quadrature"


def _as_float_array(x):
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# measure densities

class MeasureDensity:
    """Density ``h`` of a probability measure on (0, inf) with 0 in its support.

    Subclasses supply the density, its distribution function and first moment
    function; ``beta``, ``weight`` and the kernel bounds are built on top.
    """

    kind = "abstract"

    def density(self, sigma):
        raise NotImplementedError

    def cdf(self, sigma):
        """int_0^sigma h."""
        raise NotImplementedError

    def first_moment(self, sigma):
        """int_0^sigma u h(u) du."""
        raise NotImplementedError

    def beta(self, sigma):
        raise NotImplementedError

    def weight_log(self, logn):
        """w_h(n) as a function of log(n), vectorised."""
        raise NotImplementedError

    @property
    def support_end(self) -> float:
        return math.inf

    @property
    def mean(self) -> float:
        return float(self.first_moment(self.support_end if math.isfinite(self.support_end) else 1e6))

    def inv_weight_bound(self, eps: float) -> float:
        """A constant C with 1 / w_h(n) <= C n^eps for every n >= 1.

        Uses w_h(n) >= n^{-eps} mu((0, eps/2]), valid whenever 0 is in the
        support of the measure.
        """
        mass = float(self.cdf(eps / 2.0))
        if mass <= 0.0:
            return math.inf
        return 1.0 / mass

    def weight(self, n: int) -> float:
        return float(self.weight_log(np.array([math.log(n)]))[0])

    def to_json(self) -> dict:
        raise NotImplementedError

    def tail_start(self, rate: float, rel: float = 1e-17) -> float:
        """sigma_max with int_{sigma_max}^inf sigma e^{-rate sigma} dsigma below rel / rate^2."""
        # (rate*S + 1) e^{-rate*S} <= rel
        x = max(1.0, -math.log(rel))
        for _ in range(60):
            x = -math.log(rel) + math.log1p(x)
        return x / rate


@dataclass(frozen=True)
class AlphaFamily(MeasureDensity):
    """d mu_alpha = 2^{alpha+1} / Gamma(alpha+1) sigma^alpha e^{-2 sigma} d sigma."""

    alpha: float = 0.0
    kind = "alpha"

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError(f"alpha must exceed -1, got {self.alpha}")

    @property
    def _norm(self) -> float:
        a = self.alpha
        return math.exp((a + 1) * math.log(2.0) - special.gammaln(a + 1))

    def density(self, sigma):
        s = _as_float_array(sigma)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._norm * np.where(s > 0, s, 0.0) ** self.alpha * np.exp(-2.0 * s)
        out = np.where(s > 0, out, 0.0 if self.alpha > 0 else (self._norm if self.alpha == 0 else np.inf))
        return out if np.ndim(sigma) else float(out)

    def cdf(self, sigma):
        s = np.maximum(_as_float_array(sigma), 0.0)
        out = special.gammainc(self.alpha + 1, 2.0 * s)
        return out if np.ndim(sigma) else float(out)

    def first_moment(self, sigma):
        s = np.maximum(_as_float_array(sigma), 0.0)
        out = 0.5 * (self.alpha + 1) * special.gammainc(self.alpha + 2, 2.0 * s)
        return out if np.ndim(sigma) else float(out)

    @property
    def mean(self) -> float:
        return 0.5 * (self.alpha + 1)

    def beta(self, sigma):
        """beta(sigma) = int_0^sigma (sigma - u) h(u) du, free of cancellation near 0.

        Uses beta = C sigma^{a+2}/((a+1)(a+2)) 1F1(a+1; a+3; -2 sigma) with
        Kummer's transformation to a positive series; large sigma falls back
        on the incomplete-gamma form, where no cancellation occurs.
        """
        s = np.atleast_1d(_as_float_array(sigma))
        out = np.zeros_like(s)
        a = self.alpha
        small = (s > 0) & (s <= 50.0)
        if np.any(small):
            x = 2.0 * s[small]
            kmax = int(x.max() + 12.0 * math.sqrt(x.max()) + 40)
            k = np.arange(kmax, dtype=np.float64)
            b = a + 3.0
            log_poch = special.gammaln(b + k) - special.gammaln(b)
            logx = np.log(x)
            logs = np.log1p(k)[None, :] + np.outer(logx, k) - log_poch[None, :] - x[:, None]
            series = np.exp(logs).sum(axis=1)
            pref = np.exp((a + 1) * math.log(2.0) - special.gammaln(a + 1)
                          + (a + 2) * np.log(s[small])) / ((a + 1) * (a + 2))
            out[small] = pref * series
        big = s > 50.0
        if np.any(big):
            sb = s[big]
            out[big] = sb * special.gammainc(a + 1, 2 * sb) - 0.5 * (a + 1) * special.gammainc(a + 2, 2 * sb)
        return out if np.ndim(sigma) else float(out[0])

    def weight_log(self, logn):
        L = _as_float_array(logn)
        return (1.0 + L) ** (-(self.alpha + 1.0))

    def inv_weight_bound(self, eps: float) -> float:
        a = self.alpha + 1.0
        if a <= eps:
            return 1.0
        return math.exp(a * math.log(a / eps) - a + eps)

    def inv_weight_tail_integral(self, x: float, log_lo: float) -> float:
        """int_{e^{log_lo}}^inf u^{-x} (1 + log u)^{alpha+1} du for x > 1."""
        y = x - 1.0
        a = self.alpha + 1.0
        z = y * (1.0 + log_lo)
        return math.exp(y + special.gammaln(a + 1) - (a + 1) * math.log(y)) * special.gammaincc(a + 1, z)

    def to_json(self) -> dict:
        return {"kind": "alpha", "alpha": self.alpha}


def _e1(x):
    """(1 - e^{-x}) / x, stable at 0."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-x) / x
    return np.where(np.abs(x) < 1e-8, 1.0 - x / 2.0, out)


def _e2(x):
    """(1 - e^{-x}(1 + x)) / x^2, stable at 0."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (-np.expm1(-x) - x * np.exp(-x)) / (x * x)
    series = 0.5 - x / 3.0 + x * x / 8.0 - x ** 3 / 30.0 + x ** 4 / 144.0
    return np.where(np.abs(x) < 1e-2, series, out)


@dataclass(frozen=True)
class Tabulated(MeasureDensity):
    """Piecewise-linear density on a grid ``0 = g_0 < ... < g_m``, zero beyond ``g_m``."""

    grid: tuple = field(default=())
    values: tuple = field(default=())
    mass_tol: float = 1e-6
    kind = "tabulated"

    def __post_init__(self):
        g = tuple(float(v) for v in self.grid)
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if len(g) < 2 or len(g) != len(v):
            raise ValueError("tabulated density needs matching grid and values of length >= 2")
        if g[0] != 0.0:
            raise ValueError("tabulated grid must start at 0")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("tabulated grid must be strictly increasing")
        if any(x < 0 for x in v):
            raise ValueError("density values must be nonnegative")
        if v[0] == 0.0 and v[1] == 0.0:
            raise ValueError("0 must lie in the support: density vanishes on the first cell")
        mass = self.cdf(g[-1])
        if abs(mass - 1.0) > self.mass_tol:
            raise ValueError(f"density integrates to {mass:.9g}, not 1 (use Tabulated.normalized)")

    @classmethod
    def normalized(cls, grid, values, **kw) -> "Tabulated":
        g = np.asarray(grid, dtype=np.float64)
        v = np.asarray(values, dtype=np.float64)
        mass = float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(g)))
        return cls(tuple(g), tuple(v / mass), **kw)

    @property
    def _arrays(self):
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        return g, v, np.diff(g), np.diff(v) / np.diff(g)

    @property
    def support_end(self) -> float:
        return self.grid[-1]

    def density(self, sigma):
        s = _as_float_array(sigma)
        out = np.interp(s, self.grid, self.values, left=0.0, right=0.0)
        out = np.where(s < 0, 0.0, out)
        return out if np.ndim(sigma) else float(out)

    def _segment_integrals(self, sigma, order: int):
        """int_0^sigma u^order h(u) du for order in (0, 1); exact for piecewise-linear h."""
        g, v, L, m = self._arrays
        s = np.atleast_1d(_as_float_array(sigma))
        a = g[:-1][None, :]
        top = np.clip(s[:, None], a, g[1:][None, :])
        d = top - a  # covered length of each cell
        h0 = v[:-1][None, :]
        mm = m[None, :]
        if order == 0:
            part = h0 * d + mm * d * d / 2.0
        else:
            part = a * (h0 * d + mm * d * d / 2.0) + h0 * d * d / 2.0 + mm * d ** 3 / 3.0
        out = part.sum(axis=1)
        return out if np.ndim(sigma) else float(out[0])

    def cdf(self, sigma):
        return self._segment_integrals(sigma, 0)

    def first_moment(self, sigma):
        return self._segment_integrals(sigma, 1)

    def beta(self, sigma):
        """Exact piecewise integration of (sigma - u) h(u); every cell adds a nonnegative term."""
        g, v, L, m = self._arrays
        s = np.atleast_1d(_as_float_array(sigma))
        a = g[:-1][None, :]
        top = np.clip(s[:, None], a, g[1:][None, :])
        c = top - a
        dist = s[:, None] - a  # sigma - a >= c on covered cells
        h0 = v[:-1][None, :]
        mm = m[None, :]
        part = h0 * (dist * c - c * c / 2.0) + mm * (dist * c * c / 2.0 - c ** 3 / 3.0)
        out = np.where(c > 0, part, 0.0).sum(axis=1)
        return out if np.ndim(sigma) else float(out[0])

    def weight_log(self, logn):
        """Exact int e^{-2 sigma log n} h(sigma) d sigma over the linear cells."""
        g, v, L, m = self._arrays
        lam = 2.0 * np.atleast_1d(_as_float_array(logn))[:, None]
        a = g[:-1][None, :]
        x = lam * L[None, :]
        cell = np.exp(-lam * a) * (v[:-1][None, :] * L[None, :] * _e1(x) + m[None, :] * L[None, :] ** 2 * _e2(x))
        out = cell.sum(axis=1)
        return out if np.ndim(logn) else float(out[0])

    @property
    def mean(self) -> float:
        return float(self.first_moment(self.grid[-1]))

    def to_json(self) -> dict:
        return {"kind": "tabulated", "grid": list(self.grid), "values": list(self.values)}


def measure_from_json(data: Mapping) -> MeasureDensity:
    kind = data.get("kind")
    if kind == "alpha":
        return AlphaFamily(float(data.get("alpha", 0.0)))
    if kind == "tabulated":
        if data.get("normalize"):
            return Tabulated.normalized(data["grid"], data["values"])
        return Tabulated(tuple(data["grid"]), tuple(data["values"]))
    raise ValueError(f"unknown measure kind {kind!r}")


# ---------------------------------------------------------------------------
# weights

def weight(n: int, mu: MeasureDensity) -> float:
    """w_h(n) = int n^{-2 sigma} h(sigma) d sigma (closed form / exact cells)."""
    if n < 1:
        raise ValueError("weights are defined for n >= 1")
    if n == 1:
        return 1.0
    return mu.weight(n)


def weight_quadrature(n: int, mu: MeasureDensity, tol: float = 1e-12) -> WeightValue:
    """w_h(n) by adaptive Gauss-Kronrod quadrature of the density itself."""
    c = 2.0 * math.log(n)
    f = lambda s: math.exp(-c * s) * mu.density(s)
    end = mu.support_end
    if math.isfinite(end):
        pts = [p for p in getattr(mu, "grid", ())[1:-1]][:50] or None
        val, err = integrate.quad(f, 0.0, end, epsabs=tol * 1e-2, epsrel=tol, limit=400, points=pts)
    else:
        val, err = integrate.quad(f, 0.0, np.inf, epsabs=tol * 1e-2, epsrel=tol, limit=400)
    if err > max(tol * abs(val), 1e-13) * 10:
        raise QuadratureError(f"weight({n}) quadrature", err)
    return WeightValue(val, err, "quadrature")


@dataclass
class WeightTable:
    """w_h(n) for n <= N; built once, then read-only."""

    mu: MeasureDensity
    N: int
    values: np.ndarray = field(init=False, repr=False)
    provenance: str = field(init=False)

    def __post_init__(self):
        logs = np.log(np.arange(1, self.N + 1, dtype=np.float64))
        self.values = np.asarray(self.mu.weight_log(logs), dtype=np.float64)
        self.values[0] = 1.0
        self.values.setflags(write=False)
        self.provenance = "closed-form" if isinstance(self.mu, AlphaFamily) else "piecewise-exact"

    def __getitem__(self, n: int) -> float:
        return float(self.values[n - 1])


def weights_for(indices, mu: Optional[MeasureDensity]) -> np.ndarray:
    """w_h at arbitrary (possibly huge) indices; all ones for H^2 (mu=None)."""
    idx = list(indices)
    if mu is None:
        return np.ones(len(idx))
    logs = np.array([math.log(n) for n in idx], dtype=np.float64)
    w = np.asarray(mu.weight_log(logs), dtype=np.float64)
    w[logs == 0.0] = 1.0
    return w


# ---------------------------------------------------------------------------
# norms

def norm_H2(f: DirichletPolynomial) -> float:
    return math.sqrt(sum(abs(c) ** 2 for _, c in f))


def norm_Amu2(f: DirichletPolynomial, mu: Optional[MeasureDensity]) -> float:
    """(sum |a_n|^2 w_h(n))^{1/2}; mu=None gives the H^2 norm."""
    if not f:
        return 0.0
    idx, _, cs = f.arrays()
    w = weights_for(idx, mu)
    return math.sqrt(float(np.sum(np.abs(cs) ** 2 * w)))


def _power(f: DirichletPolynomial, k: int, cutoff: int, strict: bool) -> DirichletPolynomial:
    if strict and f and f.max_index ** k > cutoff:
        raise OverflowError(f"support up to {f.max_index} raised to the power {k} exceeds cutoff {cutoff}")
    out = DirichletPolynomial.constant(1.0)
    for _ in range(k):
        out = multiply(out, f, cutoff)
    return out


def norm_H2k(f: DirichletPolynomial, k: int, cutoff: int = DEFAULT_CUTOFF) -> float:
    """||f||_{H^{2k}} = ||f^k||_{H^2}^{1/k}."""
    return norm_Amu2k(f, k, None, cutoff)


def norm_Amu2k(f: DirichletPolynomial, k: int, mu: Optional[MeasureDensity],
               cutoff: int = DEFAULT_CUTOFF, strict: bool = True) -> float:
    """||f||_{A_mu^{2k}} = ||f^k||_{A_mu^2}^{1/k}.

    ``strict=False`` accepts truncated powers (coefficients of ``f^k`` above
    ``cutoff`` dropped), which is how norms of truncated compositions are
    compared.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    return norm_Amu2(_power(f, k, cutoff, strict), mu) ** (1.0 / k)


def pairing(f: DirichletPolynomial, g: Mapping, mu: Optional[MeasureDensity]) -> complex:
    """<f, g> = sum f_n conj(g_n) w_h(n), with ``g`` any index -> coefficient map."""
    total = 0j
    for n, c in f:
        gn = g.get(n)
        if gn is None:
            continue
        total += c * np.conj(gn) * (1.0 if mu is None or n == 1 else mu.weight(n))
    return complex(total)


# ---------------------------------------------------------------------------
# kernels

class KernelValue(NamedTuple):
    value: complex
    tail_bound: float
    terms: int
    log_cutoff: float


def kernel_coefficient(n: int, s: complex, mu: Optional[MeasureDensity]) -> complex:
    """Coefficient n^{-conj(s)} / w_h(n) of K_{mu,s}."""
    w = 1.0 if (mu is None or n == 1) else mu.weight(n)
    return complex(np.exp(-np.conj(complex(s)) * math.log(n)) / w)


def kernel_coefficients(s: complex, mu: Optional[MeasureDensity], indices) -> dict:
    return {int(n): kernel_coefficient(int(n), s, mu) for n in indices}


def _inv_weights_from_logs(logs: np.ndarray, mu: Optional[MeasureDensity]) -> np.ndarray:
    if mu is None:
        return np.ones_like(logs)
    w = np.asarray(mu.weight_log(logs), dtype=np.float64)
    return 1.0 / w


def kernel(s: complex, w: complex, mu: Optional[MeasureDensity], cutoff: int = DEFAULT_CUTOFF) -> KernelValue:
    """K_{mu,s}(w) = sum_n n^{-conj(s)-w} / w_h(n), truncated at ``cutoff``, with tail bound."""
    s, w = complex(s), complex(w)
    x = s.real + w.real
    if x <= 1.0:
        raise ValueError(f"full kernel needs Re(s) + Re(w) > 1, got {x}")
    logs = np.log(np.arange(1, cutoff + 1, dtype=np.float64))
    inv = _inv_weights_from_logs(logs, mu)
    z = np.conj(s) + w
    val = complex(np.sum(np.exp(-z * logs) * inv))
    tail = _full_kernel_tail(x, cutoff, mu)
    return KernelValue(val, tail, cutoff, math.log(cutoff))


def _full_kernel_tail(x: float, N: int, mu: Optional[MeasureDensity]) -> float:
    """Bound on sum_{n > N} n^{-x} / w_h(n)."""
    bounds = []
    if mu is None:
        bounds.append(N ** (1.0 - x) / (x - 1.0))
    else:
        if isinstance(mu, AlphaFamily) and x * (1.0 + math.log(N)) >= mu.alpha + 1.0:
            bounds.append(mu.inv_weight_tail_integral(x, math.log(N)))
        for frac in (0.25, 0.5, 0.75):
            eps = frac * (x - 1.0)
            C = mu.inv_weight_bound(eps)
            bounds.append(C * N ** (1.0 - x + eps) / (x - 1.0 - eps))
    return float(min(bounds))


def smooth_logs(l: int, log_cutoff: float, max_terms: int = 5_000_000) -> np.ndarray:
    """log(n) for every p_l-smooth n with log(n) <= log_cutoff, generated prime by prime."""
    ps = first_primes(l)
    logs = np.zeros(1)
    for p in ps:
        lp = math.log(p)
        kmax = int(log_cutoff // lp)
        parts = [logs]
        for k in range(1, kmax + 1):
            nxt = logs + k * lp
            nxt = nxt[nxt <= log_cutoff + 1e-12]
            if nxt.size == 0:
                break
            parts.append(nxt)
        logs = np.concatenate(parts)
        if logs.size > max_terms:
            raise OverflowError(f"more than {max_terms} {p}-smooth indices below e^{log_cutoff:.4g}")
    return np.sort(logs)


def smooth_indices(l: int, cutoff: int) -> list:
    """Every p_l-smooth integer n <= cutoff (exact ints, increasing)."""
    out = [1]
    for p in first_primes(l):
        nxt = []
        for n in out:
            m = n
            while m <= cutoff:
                nxt.append(m)
                m *= p
        out = nxt
    return sorted(out)


def _smooth_tail(l: int, x: float, log_cutoff: float, mu: Optional[MeasureDensity]) -> float:
    """Rankin bound on sum over p_l-smooth n > e^{log_cutoff} of n^{-x} / w_h(n)."""
    ps = first_primes(l)
    best = math.inf
    for fe in (0.0, 0.1, 0.2, 0.3) if mu is not None else (0.0,):
        for fd in (0.1, 0.2, 0.3, 0.45, 0.6, 0.8):
            eps, dlt = fe * x, fd * x
            if eps + dlt >= x:
                continue
            C = 1.0 if mu is None else (mu.inv_weight_bound(eps) if eps > 0 else math.inf)
            if not math.isfinite(C):
                continue
            y = x - eps - dlt
            prod = 1.0
            for p in ps:
                prod /= -math.expm1(-y * math.log(p))
            best = min(best, C * math.exp(-dlt * log_cutoff) * prod)
    return best


def partial_kernel(l: int, s: complex, w: complex, mu: Optional[MeasureDensity],
                   cutoff: Optional[int] = None, tol: float = 1e-12,
                   max_terms: int = 5_000_000) -> KernelValue:
    """K^l_{mu,s}(w): the kernel restricted to p_l-smooth indices.

    Sums over smooth indices enumerated in log space. With ``cutoff=None`` the
    log-cutoff grows until the Rankin-type tail bound drops below
    ``tol * |value|``; the returned ``tail_bound`` is always reported.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    s, w = complex(s), complex(w)
    x = s.real + w.real
    if x <= 0.0:
        raise ValueError(f"partial kernel needs Re(s) + Re(w) > 0, got {x}")
    z = np.conj(s) + w

    def total(L):
        logs = smooth_logs(l, L, max_terms)
        val = complex(np.sum(np.exp(-z * logs) * _inv_weights_from_logs(logs, mu)))
        return val, logs.size

    if cutoff is not None:
        L = math.log(cutoff)
        val, count = total(L)
        return KernelValue(val, _smooth_tail(l, x, L, mu), count, L)
    L = max(8.0, 12.0 / x)
    while True:
        try:
            val, count = total(L)
        except OverflowError:
            L /= 1.5
            val, count = total(L)
            return KernelValue(val, _smooth_tail(l, x, L, mu), count, L)
        tail = _smooth_tail(l, x, L, mu)
        if tail <= tol * max(abs(val), 1e-300):
            return KernelValue(val, tail, count, L)
        L *= 1.5


# ---------------------------------------------------------------------------
# condition (kappa)

@dataclass
class KappaReport:
    eta_grid: list
    sigma_grid: list
    table: list  # table[i][j] = max over grid sigma <= sigma_grid[j] of G(eta_i sigma)/G(sigma)
    limsup: list  # per eta, the value at the smallest sigma_0
    verdict: str
    threshold: float
    eta_target: float
    heuristic: bool = True


def kappa_check(mu: MeasureDensity, eta_grid: Sequence[float], sigma_grid: Sequence[float],
                threshold: float = 0.05, eta_target: float = 0.01) -> KappaReport:
    """Grid estimate of lim_{eta->0} limsup_{sigma->0} G(eta sigma)/G(sigma), G = beta/sigma."""
    etas = sorted((float(e) for e in eta_grid), reverse=True)
    sig = sorted((float(s) for s in sigma_grid), reverse=True)
    s_arr = np.array(sig)
    G = lambda x: np.asarray(mu.beta(x)) / x
    table = []
    for eta in etas:
        ratios = G(eta * s_arr) / G(s_arr)
        # running sup over sigma <= sigma_0, sigma_0 decreasing along the grid
        sup_below = np.maximum.accumulate(ratios[::-1])[::-1]
        table.append([float(v) for v in sup_below])
    limsup = [row[-1] for row in table]
    target_row = min(range(len(etas)), key=lambda i: abs(etas[i] - eta_target))
    decreasing = all(b <= a * (1 + 1e-9) for a, b in zip(limsup, limsup[1:]))
    ok = limsup[target_row] < threshold and decreasing
    verdict = "consistent with (kappa)" if ok else "not consistent with (kappa)"
    return KappaReport(etas, sig, table, limsup, verdict, threshold, etas[target_row])


# ---------------------------------------------------------------------------
# Littlewood-Paley checks

class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    rel_error: float
    quad_error: float


def lp_weight_identity(n: int, mu: MeasureDensity, tol: float = 1e-12) -> IdentityCheck:
    """w_h(n) against 4 int_0^inf beta_h(sigma) n^{-2 sigma} log^2(n) d sigma."""
    if n < 2:
        raise ValueError("the per-index identity needs n >= 2 (log 1 = 0)")
    c = 2.0 * math.log(n)
    lhs = weight(n, mu)
    # beta <= sigma bounds the tail by (c S + 1) e^{-c S}
    S = mu.tail_start(c, rel=1e-17 * lhs)
    f = lambda s: c * c * mu.beta(s) * math.exp(-c * s)
    pts = None
    end = S
    if math.isfinite(mu.support_end) and mu.support_end < S:
        pts = [p for p in getattr(mu, "grid", ())[1:] if p < S][:50] or None
    rhs, err = integrate.quad(f, 0.0, end, epsabs=0.0, epsrel=tol, limit=500, points=pts)
    if err > 1e-9 * abs(rhs):
        raise QuadratureError(f"Littlewood-Paley identity at n={n}", err)
    return IdentityCheck(lhs, rhs, abs(rhs - lhs) / lhs, err)


class MCResult(NamedTuple):
    estimate: float
    closed_form: float
    stderr: float
    z_score: float
    samples: int


def _character_setup(f: DirichletPolynomial):
    f1 = f.without_constant()
    idx, logs, cs = f1.arrays()
    k = max(required_horizon(f1), 1)
    ps = first_primes(k)
    exps = np.zeros((len(idx), k))
    for i, n in enumerate(idx):
        for p, a in factorize(n).exponents:
            exps[i, ps.index(p)] = a
    return idx, logs, cs, exps, k


def _z(est, closed, se):
    scale = max(1.0, abs(closed))
    if se <= 1e-12 * scale:  # zero variance up to rounding
        return 0.0 if abs(est - closed) <= 1e-10 * scale else math.inf
    return (est - closed) / se


def _vertical_samples(rng, samples, eta):
    if eta == "uniform":
        return rng.uniform(0.0, 1.0, size=samples)
    if eta == "point":
        return np.zeros(samples)
    raise ValueError("eta must be 'uniform' or 'point'")


def mc_derivative_energy(f: DirichletPolynomial, sigma: float, samples: int = 100_000,
                         seed: int = 0, eta: str = "uniform") -> MCResult:
    """Monte Carlo of int int |f'_chi(sigma+it)|^2 d eta(t) dm(chi).

    Closed form: sum_{n>=2} |a_n|^2 n^{-2 sigma} log^2 n. Characters are Haar
    random on the primes dividing the support.
    """
    idx, logs, cs, exps, k = _character_setup(f)
    closed = float(np.sum(np.abs(cs) ** 2 * np.exp(-2 * sigma * logs) * logs ** 2)) if idx else 0.0
    if not idx:
        return MCResult(0.0, 0.0, 0.0, 0.0, samples)
    ss = np.random.SeedSequence(seed)
    chi_seed, t_seed = ss.spawn(2)
    angles = np.random.default_rng(chi_seed).uniform(0.0, 2 * math.pi, size=(samples, k))
    t = _vertical_samples(np.random.default_rng(t_seed), samples, eta)
    vals = _accel.character_derivative_sq(cs * logs, logs, exps, angles, np.full(samples, float(sigma)), t)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return MCResult(est, closed, se, _z(est, closed, se), samples)


def mc_lp_check(f: DirichletPolynomial, mu: MeasureDensity, samples: int = 100_000, seed: int = 0,
                eta: str = "uniform", rate: float = 1.0) -> MCResult:
    """Monte Carlo of the full Littlewood-Paley right-hand side against ||f||^2_{A_mu^2}.

    sigma is drawn from Exp(rate) and reweighted by 4 beta_h(sigma) / density.
    """
    idx, logs, cs, exps, k = _character_setup(f)
    a1 = abs(f.constant_term) ** 2
    closed = norm_Amu2(f, mu) ** 2
    if not idx:
        return MCResult(a1, closed, 0.0, _z(a1, closed, 0.0), samples)
    ss = np.random.SeedSequence(seed)
    chi_seed, t_seed, s_seed = ss.spawn(3)
    angles = np.random.default_rng(chi_seed).uniform(0.0, 2 * math.pi, size=(samples, k))
    t = _vertical_samples(np.random.default_rng(t_seed), samples, eta)
    sig = np.random.default_rng(s_seed).exponential(1.0 / rate, size=samples)
    vals = _accel.character_derivative_sq(cs * logs, logs, exps, angles, sig, t)
    vals = vals * 4.0 * np.asarray(mu.beta(sig)) * np.exp(rate * sig) / rate
    est = a1 + float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return MCResult(est, closed, se, _z(est, closed, se), samples)
