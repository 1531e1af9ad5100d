"""Pullback measures of Carleson windows under c0-symbols."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from .counting import N_beta, N_phi
from .dirichlet_core import Symbol
from .operators import trend
from .spaces import MeasureDensity


@dataclass(frozen=True)
class Window:
    """H(t, h) = {s : Re s > 0, |s - i t| < h}."""

    t: float
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"window radius must be positive, got {self.h}")


@dataclass
class MeasureEstimate:
    value: float
    method: str  # "interval-scan", "2D-quadrature" or "monte-carlo"
    error: float
    meta: dict = field(default_factory=dict)


class ScanError(RuntimeError):
    pass


def boundary_value(Phi: Symbol, t):
    """Phi*(it) = i c0 t + phi(it)."""
    return Phi.boundary(t)


def _shift_bound(Phi: Symbol) -> float:
    A = Phi.im_bound if Phi.im_bound is not None else Phi.coefficient_im_bound()
    return A + abs(Phi.c1.imag)


def t_interval(Phi: Symbol, W: Window) -> tuple:
    """A-priori t-range outside which Phi(sigma + it) cannot meet H(W.t, W.h)."""
    Ap = _shift_bound(Phi)
    c0 = Phi.c0
    return (W.t - W.h - Ap) / c0, (W.t + W.h + Ap) / c0


def _lipschitz_t(Phi: Symbol, sigma: float) -> float:
    """Bound on |d/dt Phi(sigma + it)| for sigma >= 0."""
    return Phi.c0 + sum(abs(c) * math.log(n) * n ** (-sigma) for n, c in Phi.phi if n > 1)


def _scan(Phi: Symbol, sigma: float, W: Window, lo: float, hi: float, resolution: int,
          floor_rel: float = 1e-9, max_points: int = 4_000_000):
    """Length of {t in [lo, hi] : |Phi(sigma + it) - i W.t| < W.h} and an error bound.

    Segments are classified with the Lipschitz bound on G(t) = |Phi - iT|:
    inside a segment of length d, G lies within [(G0 + G1 - L d)/2, (G0 + G1 + L d)/2].
    Undecided segments are halved down to ``floor_rel`` times the interval
    length; survivors contribute by linear interpolation of G - h, and their
    full length enters the error.
    """
    if hi <= lo:
        return 0.0, 0.0
    L = _lipschitz_t(Phi, sigma)
    T, h = W.t, W.h
    G = lambda t: np.abs(Phi(sigma + 1j * t) - 1j * T)
    ts = np.linspace(lo, hi, resolution + 1)
    left, right = ts[:-1], ts[1:]
    gl, gr = G(left), G(right)
    floor = floor_rel * (hi - lo)
    inside = 0.0
    error = 0.0
    while left.size:
        d = right - left
        lo_b = 0.5 * (gl + gr - L * d)
        up_b = 0.5 * (gl + gr + L * d)
        full_in = up_b < h
        full_out = lo_b >= h
        inside += float(d[full_in].sum())
        und = ~(full_in | full_out)
        if not und.any():
            break
        left, right, gl, gr, d = left[und], right[und], gl[und], gr[und], d[und]
        small = d <= floor
        if small.any():
            a, b = gl[small] - h, gr[small] - h
            dd = d[small]
            frac = np.where(
                (a < 0) & (b < 0), 1.0,
                np.where((a >= 0) & (b >= 0), 0.0,
                         np.where(a < 0, a / (a - b), b / (b - a))))
            inside += float((frac * dd).sum())
            error += float(dd[(a < 0) == (b < 0)].sum()) + float(dd[(a < 0) != (b < 0)].sum()) * 0.5
            keep = ~small
            left, right, gl, gr = left[keep], right[keep], gl[keep], gr[keep]
        if left.size * 2 > max_points:
            raise ScanError(f"interval scan stalled with {left.size} undecided segments")
        mid = 0.5 * (left + right)
        gm = G(mid)
        left, right = np.concatenate([left, mid]), np.concatenate([mid, right])
        gl, gr = np.concatenate([gl, gm]), np.concatenate([gm, gr])
    return inside, error


def lambda_phi(Phi: Symbol, W: Window, resolution: int = 512) -> MeasureEstimate:
    """Lebesgue measure of {t : |Phi*(it) - i W.t| < W.h}."""
    if Phi.c0 < 1:
        raise ValueError("lambda_phi needs c0 >= 1")
    lo, hi = t_interval(Phi, W)
    val, err = _scan(Phi, 0.0, W, lo, hi, resolution)
    return MeasureEstimate(val, "interval-scan", err, {"t_range": (lo, hi), "resolution": resolution})


def lambda_mu_phi(Phi: Symbol, mu: MeasureDensity, W: Window, resolution: int = 64,
                  rel_tol: float = 1e-6, floor_rel: float = 1e-6) -> MeasureEstimate:
    """(dt x h(sigma) d sigma)-measure of {sigma + it : |Phi(sigma + it) - i W.t| < W.h}.

    Membership forces c0 sigma <= Re Phi < W.h, so sigma ranges over
    (0, W.h / c0). The inner t-measure at fixed sigma is an interval scan;
    the outer integral is adaptive Gauss-Kronrod.
    """
    if Phi.c0 < 1:
        raise ValueError("lambda_mu_phi needs c0 >= 1")
    lo, hi = t_interval(Phi, W)
    s_max = W.h / Phi.c0
    scan_err = [0.0]

    def inner(sig):
        v, e = _scan(Phi, sig, W, lo, hi, resolution, floor_rel)
        scan_err[0] = max(scan_err[0], e)
        return v * float(mu.density(sig))

    val, qerr = integrate.quad(inner, 0.0, s_max, epsabs=1e-15, epsrel=rel_tol, limit=200)
    err = qerr + scan_err[0] * float(mu.cdf(s_max))
    return MeasureEstimate(max(val, 0.0), "2D-quadrature", err,
                           {"t_range": (lo, hi), "sigma_range": (0.0, s_max), "resolution": resolution})


class RhoValue(NamedTuple):
    value: float
    t_argmax: float
    error: float


def _window_measure(Phi, mu, W, resolution=None):
    if mu is None:
        return lambda_phi(Phi, W, resolution or 512)
    return lambda_mu_phi(Phi, mu, W, resolution or 64)


def rho(Phi: Symbol, mu: Optional[MeasureDensity], h: float, t_grid: Sequence[float]) -> RhoValue:
    """max over the grid of lambda_Phi(H(t, h)) (mu=None) or lambda_{mu,Phi}(H(t, h))."""
    best, arg, err = -1.0, None, 0.0
    for t in t_grid:
        m = _window_measure(Phi, mu, Window(float(t), h))
        if m.value > best:
            best, arg, err = m.value, float(t), m.error
    return RhoValue(best, arg, err)


def rho_stability(Phi: Symbol, mu: Optional[MeasureDensity], h: float, t_grid: Sequence[float]) -> float:
    """Relative change of rho when the grid density doubles (midpoints added)."""
    g = np.sort(np.asarray(t_grid, dtype=np.float64))
    fine = np.sort(np.concatenate([g, 0.5 * (g[1:] + g[:-1])]))
    a = rho(Phi, mu, h, g).value
    b = rho(Phi, mu, h, fine).value
    return abs(b - a) / max(abs(b), 1e-300)


def default_t_grid(Phi: Symbol, points: int = 8, period: Optional[float] = None) -> list:
    """Window centres over one heuristic quasi-period 2 pi / log 2 of phi."""
    period = period if period is not None else 2 * math.pi / math.log(2)
    return [float(t) for t in np.linspace(0.0, period * Phi.c0, points, endpoint=False)]


def window_samples(t: float, r: float, radii=(0.25, 0.5, 0.75, 1.0 - 1e-8), angles: int = 9) -> list:
    """Points of H(t, r): rays from it at several angles, radii as fractions of r."""
    th = np.linspace(-math.pi / 2, math.pi / 2, angles + 2)[1:-1]
    return [complex(0.0, t) + f * r * complex(math.cos(a), math.sin(a)) for f in radii for a in th]


@dataclass
class WindowCountReport:
    rows: list  # (h, sup_N, lambda, ratio_i, sup_Nbeta, lambda_mu, ratio_ii, status)
    max_ratio_i: float
    max_ratio_ii: float
    K: float
    status: str  # "pass", "fail" or "vacuous"


def theorem8_check(Phi: Symbol, mu: Optional[MeasureDensity], h_grid: Sequence[float], t: float = 0.0,
                   K: float = 10.0, delta: float = 1e-6, zero_tol: float = 1e-12) -> WindowCountReport:
    """Counting sups on H(t, h/2) against pulled-back measures of H(t, 2 c0 h)."""
    rows = []
    failed = False
    mi, mii = 0.0, 0.0
    any_live = False
    for h in h_grid:
        pts = window_samples(t, h / 2.0)
        sup_n = max(N_phi(Phi, s, delta).value for s in pts)
        lam = lambda_phi(Phi, Window(t, 2 * Phi.c0 * h)).value
        sup_b = lam_mu = None
        if mu is not None:
            sup_b = max(N_beta(Phi, s, mu, delta).value for s in pts)
            lam_mu = lambda_mu_phi(Phi, mu, Window(t, 2 * Phi.c0 * h)).value
        status = "ok"
        ri = rii = None
        if sup_n <= zero_tol and lam <= zero_tol:
            status = "vacuous"
        elif lam <= zero_tol:
            status, failed = "fail", True
        else:
            ri = sup_n / lam
            mi = max(mi, ri)
        if mu is not None and status != "fail":
            if sup_b <= zero_tol**2 and lam_mu <= zero_tol**2:
                pass
            elif lam_mu <= zero_tol**2:
                status, failed = "fail", True
            else:
                rii = sup_b / lam_mu
                mii = max(mii, rii)
        if status != "vacuous":
            any_live = True
        rows.append((h, sup_n, lam, ri, sup_b, lam_mu, rii, status))
    if failed or mi > K or mii > K:
        verdict = "fail"
    elif not any_live:
        verdict = "vacuous"
    else:
        verdict = "pass"
    return WindowCountReport(rows, mi, mii, K, verdict)


@dataclass
class WindowRatioEstimate:
    value: float
    rows: list  # (h, rho, ratio)
    trend: str


def corollary4_estimate(Phi: Symbol, mu: Optional[MeasureDensity], h_grid: Sequence[float],
                        t_grid: Optional[Sequence[float]] = None) -> WindowRatioEstimate:
    """Grid maximum of rho_Phi(h)/h (mu=None) or rho_{mu,Phi}(h)/beta_h(h), h decreasing."""
    hs = sorted((float(h) for h in h_grid), reverse=True)
    ts = list(t_grid) if t_grid is not None else default_t_grid(Phi)
    rows, ratios = [], []
    for h in hs:
        r = rho(Phi, mu, h, ts).value
        denom = h if mu is None else float(mu.beta(h))
        rows.append((h, r, r / denom))
        ratios.append(r / denom)
    return WindowRatioEstimate(max(ratios), rows, trend(ratios))
