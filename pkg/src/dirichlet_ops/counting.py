"""Preimages of c0-symbols and the counting functions N_Phi, N_{beta,Phi}.

Roots of ``Phi(a) = s`` are isolated by the argument principle on
rectangles. Winding numbers come from summing argument increments of
``Phi - s`` along box edges; a segment of length ``d`` is accepted only when
``L * d < max(|w_i|, |w_{i+1}|)`` with ``L`` a bound on ``|Phi'|``, which keeps
the image of the segment inside a disc that avoids 0. Counts are therefore
exact integers, not rounded quadrature values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .dirichlet_core import Symbol
from .spaces import MeasureDensity

SNAP_TOL = 0.05


class CountingError(RuntimeError):
    pass


class _EdgeHitsRoot(Exception):
    pass


class Root(NamedTuple):
    a: complex
    multiplicity: int
    residual: float


class Box(NamedTuple):
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def size(self) -> float:
        return max(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.x0 - pad <= z.real <= self.x1 + pad) and (self.y0 - pad <= z.imag <= self.y1 + pad)


@dataclass
class PreimageSet:
    target: complex
    roots: List[Root]
    box: Box
    total_count: int  # winding number of the whole search box
    certification: List[Tuple[Box, int]] = field(repr=False, default_factory=list)
    delta: float = 1e-6
    strip_count: int = 0  # winding count of the strip -delta/2 < Re a < delta (upper bound)

    @property
    def count(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def n_phi(self) -> float:
        return float(sum(r.multiplicity * r.a.real for r in self.roots))

    def n_beta(self, mu: MeasureDensity) -> float:
        if not self.roots:
            return 0.0
        xs = np.array([r.a.real for r in self.roots])
        ms = np.array([r.multiplicity for r in self.roots])
        return float(np.sum(ms * np.asarray(mu.beta(xs))))


class _Solver:
    """Argument-principle machinery for one (Phi, s) pair."""

    def __init__(self, Phi: Symbol, s: complex, x_min: float, tol: float):
        self.Phi = Phi
        self.s = complex(s)
        self.L = Phi.derivative_bound(x_min)
        # sup |Phi''| on Re z >= x_min, for local derivative bounds along edges
        self.M2 = sum(abs(c) * math.log(n) ** 2 * n ** (-x_min) for n, c in Phi.phi if n > 1)
        self.tol = tol
        self._edges: dict = {}

    def f(self, z):
        return self.Phi(z) - self.s

    def edge_winding(self, z0: complex, z1: complex) -> float:
        key = (z0, z1)
        if key in self._edges:
            return self._edges[key]
        if (z1, z0) in self._edges:
            return -self._edges[(z1, z0)]
        val = self._compute_edge(z0, z1)
        self._edges[key] = val
        return val

    def _fd(self, z):
        v, d = self.Phi.eval_with_derivative(z)
        return v - self.s, np.abs(d)

    def _compute_edge(self, z0: complex, z1: complex) -> float:
        """Winding increment of Phi - s along [z0, z1].

        A segment of length d is accepted when a bound on |Phi'| over it,
        times d, stays below the larger endpoint modulus: f then cannot
        turn around the origin inside the segment. The bound is the larger
        endpoint |Phi'| plus sup|Phi''| d / 2, capped by the global bound.
        """
        length = abs(z1 - z0)
        floor = max(length, 1.0) * 1e-13
        n0 = 16
        ts = np.linspace(0.0, 1.0, n0 + 1)
        w, dw = self._fd(z0 + (z1 - z0) * ts)
        for _ in range(200):
            d = np.diff(ts) * length
            big = np.maximum(np.abs(w[:-1]), np.abs(w[1:]))
            lip = np.minimum(np.maximum(dw[:-1], dw[1:]) + 0.5 * self.M2 * d, self.L)
            bad = lip * d >= big
            if not bad.any():
                incr = np.angle(w[1:] / w[:-1])
                return float(incr.sum())
            if np.any(d[bad] < floor) or np.any(big[bad] == 0.0):
                raise _EdgeHitsRoot
            mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
            wm, dwm = self._fd(z0 + (z1 - z0) * mids)
            ts = np.concatenate([ts, mids])
            w = np.concatenate([w, wm])
            dw = np.concatenate([dw, dwm])
            order = np.argsort(ts, kind="stable")
            ts, w, dw = ts[order], w[order], dw[order]
            if ts.size > 2_000_000:
                raise _EdgeHitsRoot
        raise _EdgeHitsRoot

    def count(self, box: Box) -> int:
        c = [complex(box.x0, box.y0), complex(box.x1, box.y0), complex(box.x1, box.y1), complex(box.x0, box.y1)]
        total = sum(self.edge_winding(c[i], c[(i + 1) % 4]) for i in range(4))
        k = total / (2 * math.pi)
        n = round(k)
        if abs(k - n) > SNAP_TOL:
            raise _EdgeHitsRoot
        if n < 0:
            raise CountingError(f"negative winding number {n} on {box}")
        return int(n)

    def newton(self, z: complex, box: Box) -> Optional[complex]:
        pad = 0.05 * box.size
        for _ in range(60):
            v, d = self.Phi.eval_with_derivative(np.array([z]))
            v = complex(v[0]) - self.s
            d = complex(d[0])
            if d == 0:
                return None
            step = v / d
            z = z - step
            if not box.contains(z, pad):
                return None
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                break
        if abs(self.f(z)) > self.tol or not box.contains(z, 1e-12):
            return None
        return z


def _split(box: Box, frac: float) -> Tuple[Box, Box]:
    if box.x1 - box.x0 >= box.y1 - box.y0:
        xm = box.x0 + frac * (box.x1 - box.x0)
        return Box(box.x0, xm, box.y0, box.y1), Box(xm, box.x1, box.y0, box.y1)
    ym = box.y0 + frac * (box.y1 - box.y0)
    return Box(box.x0, box.x1, box.y0, ym), Box(box.x0, box.x1, ym, box.y1)


_SPLIT_FRACS = (0.5, 0.5123, 0.4871, 0.5317, 0.4623, 0.5529, 0.4411)


def _count_perturbed(solver: _Solver, box: Box, move: str, step: float, tries: int = 8) -> Tuple[Box, int]:
    """Count roots in ``box``, nudging the named edge when it passes through a root."""
    for k in range(tries):
        try:
            return box, solver.count(box)
        except _EdgeHitsRoot:
            shift = step * (k + 1) * (1 + 0.37 * k)
            if move == "x0":
                box = box._replace(x0=box.x0 + shift)
            elif move == "x0-":
                box = box._replace(x0=box.x0 - shift)
            else:
                box = Box(box.x0 - shift, box.x1 + shift, box.y0 - shift, box.y1 + shift)
    raise CountingError(f"argument principle failed on perturbed boxes near {box}")


def search_box(Phi: Symbol, s: complex, delta: float, margin: float = 0.25) -> Box:
    """Rectangle containing every preimage of ``s`` with real part >= delta."""
    A = Phi.im_bound if Phi.im_bound is not None else Phi.coefficient_im_bound()
    Ap = A + abs(Phi.c1.imag) + margin
    c0 = Phi.c0
    return Box(delta, s.real / c0 + margin, (s.imag - Ap) / c0, (s.imag + Ap) / c0)


def preimages(Phi: Symbol, s: complex, delta: float = 1e-6, tol: float = 1e-10,
              min_box: float = 1e-7) -> PreimageSet:
    """All solutions of ``Phi(a) = s`` with ``Re a >= delta``, with multiplicity.

    Boxes with winding count 1 are polished by Newton; boxes that still hold
    two or more roots below ``min_box`` are reported as one clustered root
    whose multiplicity is the winding count.
    """
    if Phi.c0 < 1:
        raise ValueError("preimage solving needs c0 >= 1")
    if Phi.validity is not None and not Phi.validity.valid:
        raise ValueError("symbol failed validation")
    s = complex(s)
    if s.real <= 0:
        raise ValueError("target must lie in the right half-plane")
    box0 = search_box(Phi, s, delta)
    solver = _Solver(Phi, s, x_min=-delta, tol=tol)
    box0, total = _count_perturbed(solver, box0, "x0", delta * 0.01)
    delta_used = box0.x0

    # strip next to the imaginary axis; its count bounds the excluded contribution
    strip = Box(-0.5 * delta_used, delta_used, box0.y0, box0.y1)
    strip, strip_count = _count_perturbed(solver, strip, "x0-", delta_used * 0.01)

    roots: List[Root] = []
    certification: List[Tuple[Box, int]] = [(box0, total)]
    stack = [(box0, total)]
    while stack:
        box, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            z = solver.newton(box.center, box)
            if z is not None:
                roots.append(Root(z, 1, abs(solver.f(z))))
                continue
        if box.size < min_box:
            z = box.center
            roots.append(Root(z, n, abs(solver.f(z))))
            continue
        for frac in _SPLIT_FRACS:
            b1, b2 = _split(box, frac)
            try:
                n1 = solver.count(b1)
            except _EdgeHitsRoot:
                continue
            n2 = n - n1
            if n2 < 0:
                continue
            certification.extend([(b1, n1), (b2, n2)])
            stack.extend([(b2, n2), (b1, n1)])
            break
        else:
            if box.size < 1e3 * min_box:
                # the count is certified; only the location inside the box is not
                z = box.center
                roots.append(Root(z, n, abs(solver.f(z))))
                continue
            raise CountingError(f"could not subdivide {box} without hitting a root")
    roots.sort(key=lambda r: (r.a.real, r.a.imag))
    return PreimageSet(s, roots, box0, total, certification, delta_used, strip_count)


class CountValue(NamedTuple):
    value: float
    strip_bound: float  # bound on the excluded contribution of roots with Re a < delta
    count: int


def N_phi(Phi: Symbol, s: complex, delta: float = 1e-6, tol: float = 1e-10) -> CountValue:
    """N_Phi(s) = sum over preimages of Re(a), with multiplicity."""
    ps = preimages(Phi, s, delta, tol)
    return CountValue(ps.n_phi(), ps.strip_count * ps.delta, ps.count)


def N_beta(Phi: Symbol, s: complex, mu: MeasureDensity, delta: float = 1e-6, tol: float = 1e-10) -> CountValue:
    """N_{beta,Phi}(s) = sum over preimages of beta_h(Re a), with multiplicity."""
    ps = preimages(Phi, s, delta, tol)
    return CountValue(ps.n_beta(mu), ps.strip_count * float(mu.beta(ps.delta)), ps.count)


class TranslateIntegralValue(NamedTuple):
    value: float
    solves: int
    breakpoints: tuple


def N_beta_via_lemma1(Phi: Symbol, s: complex, mu: MeasureDensity, delta: float = 1e-6,
                      tol: float = 1e-10, lin_tol: float = 1e-12, max_solves: int = 400) -> TranslateIntegralValue:
    """int_0^{Re s} N_{Phi_u}(s) h(u) du from independent solves for each Phi_u.

    ``u -> N_{Phi_u}(s)`` is convex and piecewise linear with slope minus the
    number of preimages, so every solve also yields a supporting line. An
    interval is closed once the value at a split point lies on a supporting
    line from one end (convexity then forces linearity there); each linear
    piece is integrated exactly through the distribution function and first
    moment of the density.
    """
    s = complex(s)
    X = s.real
    cache: dict = {}

    def sample(u: float):
        if u not in cache:
            ps = preimages(Phi.translated(u), s, delta, tol)
            cache[u] = (ps.n_phi(), -ps.count)
        return cache[u]

    def piece(l, r, fl, fr):
        if r <= l:
            return 0.0
        mass = mu.cdf(r) - mu.cdf(l)
        # int (u - l) h(u) du, clipped to its a-priori range [0, (r - l) mass]
        lever = min(max(mu.first_moment(r) - mu.first_moment(l) - l * mass, 0.0), (r - l) * mass)
        return fl * mass + (fr - fl) / (r - l) * lever

    total = 0.0
    stack = [(0.0, X)]
    breaks = []
    while stack:
        l, r = stack.pop()
        fl, kl = sample(l)
        fr, kr = sample(r)
        scale = lin_tol * max(1.0, abs(fl), abs(fr))
        if kl == kr and abs(fl + kl * (r - l) - fr) <= scale:
            total += piece(l, r, fl, fr)
            continue
        if r - l <= 1e-12 * max(1.0, X) or len(cache) >= max_solves:
            total += piece(l, r, fl, fr)
            breaks.append(l)
            continue
        # intersection of the supporting lines from both ends
        if kl != kr:
            m = (fr - fl - kr * r + kl * l) / (kl - kr)
        else:
            m = 0.5 * (l + r)
        if not (l + 1e-3 * (r - l) < m < r - 1e-3 * (r - l)):
            m = 0.5 * (l + r)
        fm, km = sample(m)
        sm = lin_tol * max(1.0, abs(fm))
        left_lin = abs(fl + kl * (m - l) - fm) <= sm
        right_lin = abs(fr - kr * (r - m) - fm) <= sm
        if left_lin:
            total += piece(l, m, fl, fm)
        else:
            stack.append((l, m))
        if right_lin:
            total += piece(m, r, fm, fr)
        else:
            stack.append((m, r))
        if left_lin and right_lin:
            breaks.append(m)
    return TranslateIntegralValue(float(total), len(cache), tuple(sorted(breaks)))


@dataclass
class LittlewoodReport:
    rows: list  # (s, N_beta, bound, margin, root_count)
    violations: list
    min_margin: float
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations


def littlewood_check(Phi: Symbol, s_grid: Sequence[complex], mu: MeasureDensity, delta: float = 1e-6,
                     tol: float = 1e-9) -> LittlewoodReport:
    """Margins beta_h(Re s)/c0 - N_{beta,Phi}(s) over a grid; violations beyond ``tol`` are failures."""
    rows, bad = [], []
    for s in s_grid:
        s = complex(s)
        nb = N_beta(Phi, s, mu, delta)
        bound = float(mu.beta(s.real)) / Phi.c0
        margin = bound - nb.value
        rows.append((s, nb.value, bound, margin, nb.count))
        if margin < -tol:
            bad.append((s, margin))
    return LittlewoodReport(rows, bad, min(r[3] for r in rows) if rows else math.inf, tol)


def valence_estimate(Phi: Symbol, s_grid: Sequence[complex], delta: float = 1e-6) -> int:
    """Largest preimage count (with multiplicity) seen on the grid."""
    return max((preimages(Phi, complex(s), delta).count for s in s_grid), default=0)
