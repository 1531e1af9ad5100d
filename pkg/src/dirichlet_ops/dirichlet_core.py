"""Sparse exact algebra of Dirichlet polynomials.

A Dirichlet polynomial ``f = sum a_n n^{-s}`` is stored as a map from positive
integer index ``n`` to a complex coefficient. Indices are Python ints (no
overflow when composition inflates them); scalars are double precision.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple, Optional, Union

import numpy as np

from . import _accel

DEFAULT_CUTOFF = 10_000

Number = Union[int, float, complex]


# ---------------------------------------------------------------------------
# primes and factorisation

@lru_cache(maxsize=32)
def _sieve(limit: int) -> tuple:
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, int(limit ** 0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return tuple(int(p) for p in np.flatnonzero(flags))


def primes_up_to(limit: int) -> tuple:
    """All primes ``<= limit`` in increasing order."""
    if limit < 2:
        return ()
    return _sieve(int(limit))


def first_primes(k: int) -> tuple:
    """The first ``k`` primes ``p_1 = 2, p_2 = 3, ...``."""
    if k <= 0:
        return ()
    limit = max(16, int(k * (math.log(k + 1) + math.log(math.log(k + 3)) + 2)))
    ps = primes_up_to(limit)
    while len(ps) < k:
        limit *= 2
        ps = primes_up_to(limit)
    return ps[:k]


class IndexFactorization(NamedTuple):
    n: int
    exponents: tuple  # ((p_1, a_1), (p_2, a_2), ...) with p_1 < p_2 < ...

    @property
    def primes(self) -> tuple:
        return tuple(p for p, _ in self.exponents)

    def greatest_prime(self) -> int:
        """p^+(n); 1 for n = 1."""
        return self.exponents[-1][0] if self.exponents else 1


@lru_cache(maxsize=65536)
def factorize(n: int) -> IndexFactorization:
    """Prime factorisation of ``n >= 1`` by trial division."""
    if isinstance(n, bool) or int(n) != n:
        raise TypeError(f"index must be an integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise ValueError(f"cannot factorize {n}: indices start at 1")
    out = []
    m = n
    for p in (2, 3):
        if m % p == 0:
            a = 0
            while m % p == 0:
                m //= p
                a += 1
            out.append((p, a))
    d = 5
    step = 2
    while d * d <= m:
        if m % d == 0:
            a = 0
            while m % d == 0:
                m //= d
                a += 1
            out.append((d, a))
        d += step
        step = 6 - step
    if m > 1:
        out.append((m, 1))
    return IndexFactorization(n, tuple(out))


def greatest_prime_factor(n: int) -> int:
    return factorize(n).greatest_prime()


def is_smooth(n: int, bound: int) -> bool:
    """True when every prime factor of ``n`` is ``<= bound``."""
    m = int(n)
    for p in primes_up_to(bound):
        while m % p == 0:
            m //= p
        if m == 1:
            return True
    return m == 1


# ---------------------------------------------------------------------------
# Dirichlet polynomials

def _as_index(n) -> int:
    if isinstance(n, bool):
        raise TypeError("boolean is not an index")
    if isinstance(n, (int, np.integer)):
        n = int(n)
    elif isinstance(n, float) and n.is_integer():
        n = int(n)
    else:
        raise TypeError(f"index must be a positive integer, got {n!r}")
    if n < 1:
        raise ValueError(f"index must be >= 1, got {n}")
    return n


class DirichletPolynomial:
    """Finite Dirichlet series ``sum_n a_n n^{-s}``; immutable.

    Zero coefficients are never stored, so two polynomials are equal exactly
    when their coefficient maps are equal.
    """

    __slots__ = ("_coeffs", "_cache")

    def __init__(self, coeffs: Union[Mapping, Iterable] = ()):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict = {}
        for n, c in items:
            n = _as_index(n)
            acc[n] = acc.get(n, 0j) + complex(c)
        self._coeffs = {n: acc[n] for n in sorted(acc) if acc[n] != 0}
        self._cache = {}

    # -- constructors -------------------------------------------------------
    @classmethod
    def monomial(cls, n: int, c: Number = 1.0) -> "DirichletPolynomial":
        """``c * e_n``."""
        return cls({n: c})

    @classmethod
    def constant(cls, c: Number) -> "DirichletPolynomial":
        return cls({1: c})

    @classmethod
    def zero(cls) -> "DirichletPolynomial":
        return cls()

    # -- mapping behaviour --------------------------------------------------
    @property
    def coeffs(self) -> Mapping[int, complex]:
        return MappingProxyType(self._coeffs)

    @property
    def support(self) -> tuple:
        return tuple(self._coeffs)

    def __getitem__(self, n: int) -> complex:
        return self._coeffs.get(int(n), 0j)

    def __len__(self) -> int:
        return len(self._coeffs)

    def __iter__(self) -> Iterator:
        return iter(self._coeffs.items())

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirichletPolynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash(tuple(self._coeffs.items()))

    def __repr__(self) -> str:
        if not self._coeffs:
            return "DirichletPolynomial(0)"
        terms = " + ".join(f"({c:.6g})e{n}" for n, c in self._coeffs.items())
        return f"DirichletPolynomial({terms})"

    @property
    def max_index(self) -> int:
        return max(self._coeffs) if self._coeffs else 0

    @property
    def constant_term(self) -> complex:
        """a_1, the value at +infinity."""
        return self._coeffs.get(1, 0j)

    def without_constant(self) -> "DirichletPolynomial":
        return DirichletPolynomial((n, c) for n, c in self._coeffs.items() if n != 1)

    def l1_norm(self) -> float:
        return float(sum(abs(c) for c in self._coeffs.values()))

    def abs(self) -> "DirichletPolynomial":
        """Polynomial of absolute coefficients ``sum |a_n| e_n``."""
        return DirichletPolynomial((n, abs(c)) for n, c in self._coeffs.items())

    def allclose(self, other: "DirichletPolynomial", atol: float = 1e-12) -> bool:
        keys = set(self._coeffs) | set(other._coeffs)
        return all(abs(self[k] - other[k]) <= atol for k in keys)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = DirichletPolynomial.constant(other)
        if not isinstance(other, DirichletPolynomial):
            return NotImplemented
        return DirichletPolynomial(list(self._coeffs.items()) + list(other._coeffs.items()))

    __radd__ = __add__

    def __neg__(self):
        return DirichletPolynomial((n, -c) for n, c in self._coeffs.items())

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = DirichletPolynomial.constant(other)
        if not isinstance(other, DirichletPolynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, DirichletPolynomial):
            return multiply(self, other, cutoff=None)
        if isinstance(other, (int, float, complex, np.number)):
            c = complex(other)
            return DirichletPolynomial((n, a * c) for n, a in self._coeffs.items())
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * (1.0 / complex(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = DirichletPolynomial.constant(1.0)
        for _ in range(k):
            out = multiply(out, self, cutoff=None)
        return out

    # -- evaluation ---------------------------------------------------------
    def arrays(self) -> tuple:
        """(indices, log indices, coefficients) as numpy arrays, cached."""
        arr = self._cache.get("arrays")
        if arr is None:
            idx = list(self._coeffs)
            logs = np.array([math.log(n) for n in idx], dtype=np.float64)
            cs = np.array([self._coeffs[n] for n in idx], dtype=np.complex128)
            arr = (idx, logs, cs)
            self._cache["arrays"] = arr
        return arr

    def __call__(self, s):
        return evaluate(self, s)

    def eval_array(self, z) -> np.ndarray:
        _, logs, cs = self.arrays()
        return _accel.dirichlet_eval(logs, cs, z)

    def eval_with_derivative(self, z) -> tuple:
        _, logs, cs = self.arrays()
        return _accel.dirichlet_eval_deriv(logs, cs, z)

    # -- serialisation ------------------------------------------------------
    def to_json(self) -> dict:
        return {"coeffs": [[n, c.real, c.imag] for n, c in self._coeffs.items()]}

    @classmethod
    def from_json(cls, data: Mapping) -> "DirichletPolynomial":
        rows = data["coeffs"]
        out = []
        for row in rows:
            if len(row) == 2:
                n, re = row
                im = 0.0
            else:
                n, re, im = row
            out.append((int(n), complex(float(re), float(im))))
        return cls(out)


e = DirichletPolynomial.monomial


def multiply(f: DirichletPolynomial, g: DirichletPolynomial, cutoff: Optional[int] = DEFAULT_CUTOFF,
             return_dropped: bool = False):
    """Dirichlet convolution ``f * g`` keeping indices ``<= cutoff``.

    With ``cutoff=None`` the (finite) product is exact. With
    ``return_dropped=True`` also return the l1 mass ``sum |f_j g_k|`` over the
    discarded pairs ``jk > cutoff``.
    """
    if cutoff is not None and cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    acc: dict = {}
    kept_mass = 0.0
    gi = list(g.coeffs.items())
    for j, a in f.coeffs.items():
        if cutoff is not None and j > cutoff:
            break
        for k, b in gi:
            m = j * k
            if cutoff is not None and m > cutoff:
                break
            acc[m] = acc.get(m, 0j) + a * b
            kept_mass += abs(a) * abs(b)
    out = DirichletPolynomial(acc)
    if return_dropped:
        dropped = max(f.l1_norm() * g.l1_norm() - kept_mass, 0.0)
        return out, dropped
    return out


def translate(f: DirichletPolynomial, sigma: float) -> DirichletPolynomial:
    """``f_sigma(s) = f(sigma + s)``: coefficients ``a_n n^{-sigma}``."""
    sigma = complex(sigma)
    return DirichletPolynomial((n, c * cmath.exp(-sigma * math.log(n))) for n, c in f)


def evaluate(f: DirichletPolynomial, s) -> complex:
    """``sum a_n n^{-s}`` at a single point (use ``eval_array`` for arrays)."""
    s = complex(s)
    return complex(sum(c * cmath.exp(-s * math.log(n)) for n, c in f))


def derivative_evaluate(f: DirichletPolynomial, s) -> complex:
    """``f'(s) = -sum a_n log(n) n^{-s}``."""
    s = complex(s)
    return complex(-sum(c * math.log(n) * cmath.exp(-s * math.log(n)) for n, c in f if n > 1))


def exp_series(g: DirichletPolynomial, cutoff: int = DEFAULT_CUTOFF) -> DirichletPolynomial:
    """``exp(g)`` for constant-free ``g``, exact for all indices ``<= cutoff``.

    The m-th power of ``g`` lives on indices ``>= 2^m`` so the series stops
    at ``m = floor(log2(cutoff))``.
    """
    if g.constant_term != 0:
        raise ValueError("exp_series requires a zero coefficient at index 1")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    result = DirichletPolynomial.constant(1.0)
    term = result
    m = 1
    while (1 << m) <= cutoff and term:
        term = multiply(term, g, cutoff) / m
        result = result + term
        m += 1
    return result


# ---------------------------------------------------------------------------
# characters

@dataclass(frozen=True)
class Character:
    """A point of the polytorus, given by its angles on the first k primes."""

    angles: tuple

    def __post_init__(self):
        two_pi = 2.0 * math.pi
        object.__setattr__(self, "angles", tuple(float(a) % two_pi for a in self.angles))

    @property
    def horizon(self) -> int:
        return len(self.angles)

    @property
    def primes(self) -> tuple:
        return first_primes(self.horizon)

    @classmethod
    def trivial(cls, k: int) -> "Character":
        return cls((0.0,) * k)

    @classmethod
    def vertical(cls, t0: float, k: int) -> "Character":
        """chi(n) = n^{-i t0}, the character realising a vertical translate."""
        return cls(tuple(-t0 * math.log(p) for p in first_primes(k)))

    @classmethod
    def random(cls, k: int, rng: np.random.Generator) -> "Character":
        return cls(tuple(rng.uniform(0.0, 2.0 * math.pi, size=k)))

    def angle(self, n: int) -> float:
        """sum_j alpha_j theta_j for n = prod p_j^{alpha_j}."""
        ps = self.primes
        pos = {p: j for j, p in enumerate(ps)}
        total = 0.0
        for p, a in factorize(n).exponents:
            j = pos.get(p)
            if j is None:
                raise ValueError(f"prime {p} (dividing {n}) is beyond the character horizon p_{self.horizon}")
            total += a * self.angles[j]
        return total

    def __call__(self, n: int) -> complex:
        return cmath.exp(1j * self.angle(n))


def twist(f: DirichletPolynomial, chi: Character) -> DirichletPolynomial:
    """Vertical limit ``f_chi = sum a_n chi(n) e_n``."""
    return DirichletPolynomial((n, c * chi(n)) for n, c in f)


def required_horizon(f: DirichletPolynomial) -> int:
    """Number of leading primes needed to cover every index of ``f``."""
    pmax = max((greatest_prime_factor(n) for n in f.support), default=1)
    if pmax < 2:
        return 0
    return len(primes_up_to(pmax))


# ---------------------------------------------------------------------------
# symbols

@dataclass(frozen=True)
class Certificate:
    """Outcome of a mapping-condition check on a symbol."""

    mode: str  # "c0_pos" or "c0_zero"
    kind: str  # "sufficient", "empirical" or "invalid"
    margin: float  # certified / sampled lower bound of Re(phi) minus the target
    eta: float = 0.0
    witness_t: Optional[float] = None
    samples: int = 0

    @property
    def valid(self) -> bool:
        return self.kind in ("sufficient", "empirical")

    @property
    def rigorous(self) -> bool:
        return self.kind == "sufficient"


@dataclass(frozen=True)
class Symbol:
    """``Phi(s) = c0 * s + phi(s)`` with ``phi`` a Dirichlet polynomial."""

    c0: int
    phi: DirichletPolynomial
    im_bound: Optional[float] = None
    validity: Optional[Certificate] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.c0) != self.c0 or self.c0 < 0:
            raise ValueError(f"c0 must be a nonnegative integer, got {self.c0!r}")
        object.__setattr__(self, "c0", int(self.c0))

    @classmethod
    def from_terms(cls, c0: int, terms: Mapping) -> "Symbol":
        return cls(c0, DirichletPolynomial(terms))

    @property
    def c1(self) -> complex:
        return self.phi.constant_term

    def __call__(self, s):
        if np.ndim(s) == 0:
            s = complex(s)
            return self.c0 * s + evaluate(self.phi, s)
        z = np.asarray(s, dtype=np.complex128)
        return self.c0 * z + self.phi.eval_array(z)

    def derivative(self, s) -> complex:
        return self.c0 + derivative_evaluate(self.phi, s)

    def eval_with_derivative(self, z) -> tuple:
        z = np.asarray(z, dtype=np.complex128)
        v, d = self.phi.eval_with_derivative(z)
        return self.c0 * z + v, self.c0 + d

    def boundary(self, t):
        """Phi(it); exact for polynomial symbols."""
        return self(1j * np.asarray(t, dtype=np.float64)) if np.ndim(t) else self(1j * float(t))

    def derivative_bound(self, x_min: float = 0.0) -> float:
        """Upper bound of |Phi'| on the half-plane Re(s) >= x_min >= 0."""
        return self.c0 + sum(abs(c) * math.log(n) * n ** (-x_min) for n, c in self.phi if n > 1)

    def coefficient_im_bound(self) -> float:
        """|Im c_1| + sum_{n>=2} |c_n|, a bound on |Im phi| over the closed half-plane."""
        return abs(self.c1.imag) + sum(abs(c) for n, c in self.phi if n > 1)

    def translated(self, u: float) -> "Symbol":
        """``Phi_u(s) = Phi(s + u)`` as a symbol: phi translated, plus c0*u."""
        phi_u = translate(self.phi, u) + DirichletPolynomial.constant(self.c0 * u)
        return Symbol(self.c0, phi_u, im_bound=self.im_bound, validity=self.validity)

    def vertically_shifted(self, tau: float) -> "Symbol":
        """``Phi_tau(s) = c0 s + phi(s + i tau)`` via the matching character twist."""
        k = max(required_horizon(self.phi), 1)
        return Symbol(self.c0, twist(self.phi, Character.vertical(tau, k)),
                      im_bound=self.im_bound, validity=self.validity)

    def with_certificate(self, cert: Certificate, im_bound: Optional[float] = None) -> "Symbol":
        return replace(self, validity=cert, im_bound=self.im_bound if im_bound is None else im_bound)

    def to_json(self) -> dict:
        return {"c0": self.c0, "phi": self.phi.to_json()}

    @classmethod
    def from_json(cls, data: Mapping) -> "Symbol":
        return cls(int(data["c0"]), DirichletPolynomial.from_json(data["phi"]))

    def __repr__(self) -> str:
        return f"Symbol(c0={self.c0}, phi={self.phi!r})"


class Composition(NamedTuple):
    poly: DirichletPolynomial
    tail_l1: float  # bound on sum |coefficients| at indices > cutoff
    cutoff: int


def _monomial_composition(n: int, Phi: Symbol, cutoff: int, phi0: DirichletPolynomial,
                          phi0_abs: DirichletPolynomial, want_tail: bool):
    """Coefficients of ``n^{-Phi(s)}`` up to ``cutoff`` and an l1 tail bound."""
    logn = math.log(n)
    scale = cmath.exp(-Phi.c1 * logn)
    base = n ** Phi.c0
    full_mass = abs(scale) * math.exp(logn * phi0_abs.l1_norm()) if want_tail else 0.0
    if base > cutoff:
        return DirichletPolynomial(), full_mass
    inner_cut = cutoff // base
    ex = exp_series(phi0 * (-logn), inner_cut) if phi0 else DirichletPolynomial.constant(1.0)
    poly = DirichletPolynomial((k * base, c * scale) for k, c in ex)
    tail = 0.0
    if want_tail:
        kept = exp_series(phi0_abs * logn, inner_cut).l1_norm() if phi0 else 1.0
        tail = max(full_mass - abs(scale) * kept, 0.0)
    return poly, tail


def compose(P: DirichletPolynomial, Phi: Symbol, cutoff: int = DEFAULT_CUTOFF,
            return_tail: bool = False):
    """Dirichlet coefficients of ``P o Phi`` at indices ``<= cutoff``.

    Works monomial by monomial: ``n^{-Phi(s)} = n^{-c1} e_{n^c0} exp(-log(n) phi0)``
    with ``phi = c1 + phi0``. Coefficients up to ``cutoff`` are exact (up to
    rounding). ``return_tail=True`` returns a ``Composition`` that also carries
    a rigorous bound on the l1 mass beyond ``cutoff``; that mass is what the
    truncation loses, and it is nonzero for every non-constant result.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    phi0 = Phi.phi.without_constant()
    phi0_abs = phi0.abs()
    acc: dict = {}
    tail = 0.0
    for n, p in P:
        poly, t = _monomial_composition(n, Phi, cutoff, phi0, phi0_abs, return_tail)
        for k, c in poly:
            acc[k] = acc.get(k, 0j) + p * c
        tail += abs(p) * t
    out = DirichletPolynomial(acc)
    if return_tail:
        return Composition(out, tail, cutoff)
    return out
