"""Particle operators as polynomials in a^dagger, a, and their P, Q and Weyl symbols.

Symbols are polynomials in (zbar, z) stored as sparse ``{(m, n): c}`` maps for
``c * zbar**m * z**n``. The three representations sit on a smoothing chain

    P  --exp(+hbar/2 d2/dzbar dz)-->  W  --exp(+hbar/2 d2/dzbar dz)-->  Q

and every conversion applies the full exponential, which terminates on
polynomials, so round trips are exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError


class Rep(str, enum.Enum):
    P = "P"
    Q = "Q"
    W = "W"


# position along the smoothing chain P -> W -> Q
_LEVEL = {Rep.P: 0, Rep.W: 1, Rep.Q: 2}


def _canonical(terms) -> Mapping[tuple[int, int], complex]:
    out: dict[tuple[int, int], complex] = {}
    for key, c in dict(terms).items():
        m, n = (int(k) for k in key)
        if m < 0 or n < 0:
            raise ValueError(f"negative power in term {key}")
        out[(m, n)] = out.get((m, n), 0j) + complex(c)
    return MappingProxyType({k: out[k] for k in sorted(out) if out[k] != 0})


def _falling(n: int, k: int) -> int:
    """n! / (n-k)!"""
    return math.perm(n, k)


@dataclass(frozen=True)
class PhasePoint:
    """A point (zbar, z) of complexified phase space; zbar need not equal conj(z)."""

    zbar: complex
    z: complex

    def __post_init__(self):
        zb, z = complex(self.zbar), complex(self.z)
        if not (np.isfinite(zb) and np.isfinite(z)):
            raise ValueError("phase point coordinates must be finite")
        object.__setattr__(self, "zbar", zb)
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class NormalOrderedOperator:
    """sum c_mn a^dagger^m a^n, stored normal ordered."""

    terms: Mapping[tuple[int, int], complex]

    def __post_init__(self):
        object.__setattr__(self, "terms", _canonical(self.terms))

    @classmethod
    def identity(cls) -> "NormalOrderedOperator":
        return cls({(0, 0): 1.0})

    @classmethod
    def number(cls) -> "NormalOrderedOperator":
        return cls({(1, 1): 1.0})

    @classmethod
    def annihilation(cls) -> "NormalOrderedOperator":
        return cls({(0, 1): 1.0})

    @classmethod
    def creation(cls) -> "NormalOrderedOperator":
        return cls({(1, 0): 1.0})

    @property
    def max_degree(self) -> int:
        return max((m + n for m, n in self.terms), default=0)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        keys = set(self.terms) | {(n, m) for m, n in self.terms}
        return all(
            abs(self.terms.get((m, n), 0j) - np.conj(self.terms.get((n, m), 0j))) <= tol
            for m, n in keys
        )

    def dagger(self) -> "NormalOrderedOperator":
        return NormalOrderedOperator({(n, m): np.conj(c) for (m, n), c in self.terms.items()})

    def __add__(self, other):
        if not isinstance(other, NormalOrderedOperator):
            other = complex(other) * NormalOrderedOperator.identity()
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0j) + c
        return NormalOrderedOperator(out)

    __radd__ = __add__

    def __neg__(self):
        return NormalOrderedOperator({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, NormalOrderedOperator):
            s = complex(other)
            return NormalOrderedOperator({k: s * c for k, c in self.terms.items()})
        # a^n a^dagger^p = sum_k k! C(n,k) C(p,k) a^dagger^(p-k) a^(n-k)
        out: dict[tuple[int, int], complex] = {}
        for (m, n), c1 in self.terms.items():
            for (p, q), c2 in other.terms.items():
                for k in range(min(n, p) + 1):
                    w = math.factorial(k) * math.comb(n, k) * math.comb(p, k)
                    key = (m + p - k, n + q - k)
                    out[key] = out.get(key, 0j) + w * c1 * c2
        return NormalOrderedOperator(out)

    def __rmul__(self, other):
        return self * other

    def __pow__(self, k: int):
        out = NormalOrderedOperator.identity()
        for _ in range(int(k)):
            out = out * self
        return out


def kerr_operator(omega: float, chi: float) -> NormalOrderedOperator:
    """omega a^dagger a + chi a^dagger^2 a^2, whose Q symbol is omega zbar z + chi zbar^2 z^2."""
    return NormalOrderedOperator({(1, 1): omega, (2, 2): chi})


@dataclass(frozen=True)
class SymbolPolynomial:
    """c-number symbol sum c_mn zbar^m z^n in representation ``rep``."""

    terms: Mapping[tuple[int, int], complex]
    rep: Rep
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "terms", _canonical(self.terms))
        object.__setattr__(self, "rep", Rep(self.rep))
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def max_degree(self) -> int:
        return max((m + n for m, n in self.terms), default=0)

    def _same_space(self, other: "SymbolPolynomial"):
        if self.rep != other.rep or self.hbar != other.hbar:
            raise ValueError("symbols live in different representations")

    def __add__(self, other):
        if not isinstance(other, SymbolPolynomial):
            other = SymbolPolynomial({(0, 0): other}, self.rep, self.hbar)
        self._same_space(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0j) + c
        return SymbolPolynomial(out, self.rep, self.hbar)

    __radd__ = __add__

    def __neg__(self):
        return SymbolPolynomial({k: -c for k, c in self.terms.items()}, self.rep, self.hbar)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        """Scalar or pointwise (commutative) product."""
        if not isinstance(other, SymbolPolynomial):
            s = complex(other)
            return SymbolPolynomial({k: s * c for k, c in self.terms.items()}, self.rep, self.hbar)
        self._same_space(other)
        out: dict[tuple[int, int], complex] = {}
        for (m, n), c1 in self.terms.items():
            for (p, q), c2 in other.terms.items():
                out[(m + p, n + q)] = out.get((m + p, n + q), 0j) + c1 * c2
        return SymbolPolynomial(out, self.rep, self.hbar)

    __rmul__ = __mul__

    def derivative(self, a: int = 0, b: int = 0) -> "SymbolPolynomial":
        """d^a/dzbar^a d^b/dz^b."""
        out = {
            (m - a, n - b): _falling(m, a) * _falling(n, b) * c
            for (m, n), c in self.terms.items()
            if m >= a and n >= b
        }
        return SymbolPolynomial(out, self.rep, self.hbar)

    def __call__(self, zbar, z):
        if np.isscalar(zbar) and np.isscalar(z):
            zb, zz = complex(zbar), complex(z)
            return sum((c * zb**m * zz**n for (m, n), c in self.terms.items()), 0j)
        zb = np.asarray(zbar, dtype=complex)
        zz = np.asarray(z, dtype=complex)
        out = np.zeros(np.broadcast(zb, zz).shape, dtype=complex)
        for (m, n), c in self.terms.items():
            out = out + c * zb**m * zz**n
        return out

    @cached_property
    def _second_order(self):
        return tuple(self.derivative(a, b) for a, b in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)))

    @cached_property
    def _term_lists(self):
        return tuple(
            tuple((m, n, c) for (m, n), c in p.terms.items()) for p in (self,) + self._second_order
        )

    def derivs2(self, zbar, z):
        """(H, H_zbar, H_z, H_zbar_zbar, H_zbar_z, H_z_z) at the given point(s)."""
        if not (np.isscalar(zbar) and np.isscalar(z)):
            return (self(zbar, z),) + tuple(d(zbar, z) for d in self._second_order)
        deg = self.max_degree
        pb, pz = [1.0 + 0j], [1.0 + 0j]
        for _ in range(deg):
            pb.append(pb[-1] * zbar)
            pz.append(pz[-1] * z)
        return tuple(sum((c * pb[m] * pz[n] for m, n, c in t), 0j) for t in self._term_lists)

    def allclose(self, other: "SymbolPolynomial", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) <= atol for k in keys)


def q_symbol_of_operator(op: NormalOrderedOperator) -> SymbolPolynomial:
    """<zbar|a^dag^m a^n|z>/<zbar|z> = zbar^m z^n, so coefficients carry over unchanged."""
    return SymbolPolynomial(dict(op.terms), Rep.Q)


def _smooth(terms, s: float) -> dict:
    """exp(s d2/dzbar dz) applied term by term; terminates on polynomials."""
    out: dict[tuple[int, int], complex] = {}
    for (m, n), c in terms.items():
        for k in range(min(m, n) + 1):
            w = s**k / math.factorial(k) * _falling(m, k) * _falling(n, k)
            key = (m - k, n - k)
            out[key] = out.get(key, 0j) + w * c
    return out


def convert_symbol(sym: SymbolPolynomial, target) -> SymbolPolynomial:
    target = Rep(target)
    steps = _LEVEL[target] - _LEVEL[sym.rep]
    if steps == 0:
        return sym
    return SymbolPolynomial(_smooth(sym.terms, steps * sym.hbar / 2.0), target, sym.hbar)


def symbol_of_operator(op: NormalOrderedOperator, rep) -> SymbolPolynomial:
    return convert_symbol(q_symbol_of_operator(op), rep)


def operator_from_p_symbol(sym: SymbolPolynomial) -> NormalOrderedOperator:
    """Read sum c_mn zbar^m z^n as the anti-normal operator sum c_mn a^n a^dag^m, then normal order."""
    if sym.rep != Rep.P:
        raise ValueError("expected a P symbol")
    if sym.hbar != 1.0:
        raise ValueError("operator reconstruction requires hbar = 1")
    out: dict[tuple[int, int], complex] = {}
    for (m, n), c in sym.terms.items():
        # a^n a^dag^m = sum_k k! C(n,k) C(m,k) a^dag^(m-k) a^(n-k)
        for k in range(min(m, n) + 1):
            w = math.factorial(k) * math.comb(n, k) * math.comb(m, k)
            out[(m - k, n - k)] = out.get((m - k, n - k), 0j) + w * c
    return NormalOrderedOperator(out)


def operator_from_symbol(sym: SymbolPolynomial) -> NormalOrderedOperator:
    return operator_from_p_symbol(convert_symbol(sym, Rep.P))


def eval_symbol(sym: SymbolPolynomial, pt: PhasePoint) -> complex:
    return complex(sym(pt.zbar, pt.z))


def eval_symbol_derivs(sym: SymbolPolynomial, pt: PhasePoint, orders: tuple[int, int]) -> complex:
    """d^a/dzbar^a d^b/dz^b of the symbol at pt, for a + b <= 4."""
    a, b = orders
    if a < 0 or b < 0 or a + b > 4:
        raise ValueError("derivative orders must be non-negative with total <= 4")
    return complex(sym.derivative(a, b)(pt.zbar, pt.z))


def weyl_symbol_of_square(op: NormalOrderedOperator) -> SymbolPolynomial:
    """Exact Weyl symbol of op^2."""
    return symbol_of_operator(op * op, Rep.W)


def moyal_square_leading(hw: SymbolPolynomial) -> SymbolPolynomial:
    """(H^W)^2 + (hbar^2/4)[H_zz H_zbarzbar - (H_zbarz)^2]: the two leading Moyal terms."""
    if hw.rep != Rep.W:
        raise ValueError("expected a Weyl symbol")
    corr = hw.derivative(0, 2) * hw.derivative(2, 0) - hw.derivative(1, 1) * hw.derivative(1, 1)
    return hw * hw + corr * (hw.hbar**2 / 4.0)


# --- kernel-trace oracle -------------------------------------------------------
#
# Tr(H W(zbar, z)) with the Weyl kernel expanded in the number basis. Two
# numerical facts shape the evaluation:
#   * the kernel is displacement covariant, Tr(H W(zbar, z)) = Tr(H' W(0, 0)) with
#     H' = H(a^dag + zbar, a + z); evaluating at the origin avoids the e^{|z|^2}
#     cancellation of a direct expansion at complex (zbar, z);
#   * at s = 0 the Fock trace of an unbounded operator against the kernel (twice
#     the parity) is only Abel summable, so the trace is taken for the damped kernels
#         <zbar2|W_s(zbar, z)|z1> = c exp(-c (zbar2 - zbar)(z1 - z) + zbar2 z1),  c = 2/(1-s),
#     on s in [-0.95, -0.3], where the truncated sum converges geometrically, and
#     the result (a polynomial in s) is extrapolated to s = 0, where the generating
#     function is 2 exp(-2 (zbar2 - zbar)(z1 - z) + zbar2 z1).


def fock_matrix(op: NormalOrderedOperator, nmax: int) -> np.ndarray:
    """Number-basis matrix of ``op`` truncated to |0> ... |nmax>."""
    dim = nmax + 1
    out = np.zeros((dim, dim), dtype=complex)
    lf = gammaln(np.arange(dim) + 1.0)
    for (m, n), c in op.terms.items():
        # <r+m| a^dag^m a^n |r+n> = sqrt((r+m)! (r+n)!) / r!
        r = np.arange(max(dim - max(m, n), 0))
        out[r + m, r + n] += c * np.exp(0.5 * (lf[r + m] + lf[r + n]) - lf[r])
    return out


def kernel_matrix(zbar: complex, z: complex, c: float, nmax: int) -> np.ndarray:
    """<m|W_s(zbar, z)|n> from the power expansion of the generating function, c = 2/(1-s)."""
    # c e^{-c zbar z} sqrt(m! n!) sum_k (1-c)^k/k! (cz)^(m-k)/(m-k)! (c zbar)^(n-k)/(n-k)!
    dim = nmax + 1
    idx = np.arange(dim)
    lf = gammaln(idx + 1.0)
    out = np.zeros((dim, dim), dtype=complex)
    base = np.log(c) - c * zbar * z

    def log_side(w, k):
        j = idx[k:] - k
        if w != 0:
            lp = j * np.log(complex(c * w))
        else:
            lp = np.where(j == 0, 0.0, -np.inf).astype(complex)
        return 0.5 * lf[idx[k:]] - lf[j] + lp

    for k in range(dim):
        lk = base + k * np.log(complex(1.0 - c)) - lf[k]
        a = log_side(z, k)
        b = log_side(zbar, k)
        out[k:, k:] += np.exp(lk + a[:, None] + b[None, :])
    return out


def _displaced(op: NormalOrderedOperator, pt: PhasePoint) -> NormalOrderedOperator:
    """op(a^dag + zbar, a + z), already normal ordered."""
    out: dict[tuple[int, int], complex] = {}
    for (m, n), c in op.terms.items():
        for p in range(m + 1):
            for q in range(n + 1):
                w = math.comb(m, p) * math.comb(n, q) * pt.zbar ** (m - p) * pt.z ** (n - q)
                out[(p, q)] = out.get((p, q), 0j) + w * c
    return NormalOrderedOperator(out)


def weyl_kernel_trace_oracle(
    op: NormalOrderedOperator,
    pt: PhasePoint,
    nmax: int | None = None,
    tol: float = 1e-10,
    max_nmax: int = 1024,
) -> complex:
    """Weyl symbol of ``op`` at ``pt`` from a truncated number-basis kernel trace.

    Shares no code with :func:`convert_symbol`. ``nmax`` is doubled until the
    value changes by less than ``tol`` (relative to max(1, |value|)).
    """
    shifted = _displaced(op, pt)
    deg_s = max((min(m, n) for m, n in shifted.terms), default=0)
    npts = deg_s + 4
    x = np.cos(np.pi * (np.arange(npts) + 0.5) / npts)
    s_nodes = -0.625 + 0.325 * x
    if nmax is None:
        nmax = max(32, 4 * op.max_degree)

    def evaluate(nm):
        hmat = fock_matrix(shifted, nm)
        vals = []
        for s in s_nodes:
            wmat = kernel_matrix(0j, 0j, 2.0 / (1.0 - s), nm)
            vals.append(np.einsum("pq,qp->", hmat, wmat))
        coef = np.polynomial.polynomial.polyfit(s_nodes, np.array(vals), deg_s)
        return complex(coef[0])

    prev = evaluate(nmax)
    while 2 * nmax <= max_nmax:
        nmax *= 2
        cur = evaluate(nmax)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError(
        "kernel trace did not converge in nmax",
        tag="symbol_calculus.nonconvergence",
        nmax=nmax,
        last=prev,
    )
