"""Spin-j operators, unnormalized spin coherent states and their Q, W, P symbols.

Coherent states are |z> = exp(z J-)|j,j>, so that <zbar|z'> = (1 + zbar z')^{2j}.
A symbol is stored as N(zbar, z) / (1 + zbar z)^L with N a dense coefficient
matrix, ``N[m, n]`` multiplying zbar^m z^n, of degree at most L in each variable.

Such a symbol is exactly the Q symbol of the operator on spin L/2 with matrix
elements N[k, l] / sqrt(C(L, k) C(L, l)). Multipole (L^2 eigen-) decompositions
are therefore done algebraically through the adjoint Casimir on that operator,
which is block tridiagonal along each diagonal l - k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.special import comb

from .errors import AsymptoticRangeError
from .symbols import Rep


@dataclass(frozen=True)
class SpinQuantum:
    """Spin magnitude j = two_j / 2."""

    two_j: int

    def __post_init__(self):
        if int(self.two_j) != self.two_j or self.two_j < 1:
            raise ValueError("two_j must be a positive integer")
        object.__setattr__(self, "two_j", int(self.two_j))

    @property
    def j(self) -> float:
        return self.two_j / 2.0

    @property
    def jtilde(self) -> float:
        return self.j + 0.5

    @property
    def dim(self) -> int:
        return self.two_j + 1


@dataclass(frozen=True, eq=False)
class SpinOperator:
    """Matrix in the |j, m> basis ordered m = j, j-1, ..., -j."""

    j: SpinQuantum
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (self.j.dim, self.j.dim):
            raise ValueError(f"expected a {self.j.dim}x{self.j.dim} matrix, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol, rtol=0))

    def __add__(self, other):
        if isinstance(other, SpinOperator):
            return SpinOperator(self.j, self.matrix + other.matrix)
        return SpinOperator(self.j, self.matrix + complex(other) * np.eye(self.j.dim))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, SpinOperator):
            return SpinOperator(self.j, self.matrix @ other.matrix)
        return SpinOperator(self.j, complex(other) * self.matrix)

    def __rmul__(self, other):
        return SpinOperator(self.j, complex(other) * self.matrix)


def _ladder(dim: int) -> np.ndarray:
    """<k|J+|k+1> for k = j - m, i.e. sqrt((k+1)(2j-k))."""
    k = np.arange(dim - 1)
    return np.sqrt((k + 1.0) * (dim - 1 - k))


def spin_matrices(j: SpinQuantum):
    """(Jx, Jy, Jz, J+, J-) as SpinOperators."""
    dim = j.dim
    jz = np.diag(j.j - np.arange(dim)).astype(complex)
    jp = np.diag(_ladder(dim), 1).astype(complex)
    jm = jp.T.copy()
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return tuple(SpinOperator(j, m) for m in (jx, jy, jz, jp, jm))


def spin_operator_from_terms(j: SpinQuantum, terms: Mapping[tuple[int, int, int], complex]) -> SpinOperator:
    """sum c J+^p Jz^q J-^r; the ordering is taken literally."""
    _, _, jz, jp, jm = spin_matrices(j)
    mat = np.zeros((j.dim, j.dim), dtype=complex)
    for (p, q, r), c in terms.items():
        mat += c * (
            np.linalg.matrix_power(jp.matrix, p)
            @ np.linalg.matrix_power(jz.matrix, q)
            @ np.linalg.matrix_power(jm.matrix, r)
        )
    return SpinOperator(j, mat)


def coherent_state_vector(z: complex, j: SpinQuantum) -> np.ndarray:
    """Components sqrt(C(2j, k)) z^k on |j, j-k>."""
    k = np.arange(j.dim)
    return np.sqrt(comb(j.two_j, k)) * complex(z) ** k


# --- symbols -------------------------------------------------------------------


def _binom_sqrt(L: int) -> np.ndarray:
    return np.sqrt(comb(L, np.arange(L + 1)))


@dataclass(frozen=True, eq=False)
class SpinSymbol:
    """N(zbar, z) / (1 + zbar z)^L for spin ``j`` in representation ``rep``."""

    j: SpinQuantum
    rep: Rep
    numerator: np.ndarray
    L: int = field(default=-1)

    def __post_init__(self):
        num = np.array(self.numerator, dtype=complex)
        if num.ndim != 2 or num.shape[0] != num.shape[1]:
            raise ValueError("numerator must be a square coefficient matrix")
        L = num.shape[0] - 1 if self.L < 0 else int(self.L)
        if num.shape[0] > L + 1:
            if np.any(num[L + 1 :, :]) or np.any(num[:, L + 1 :]):
                raise ValueError("numerator degree exceeds the denominator power")
            num = num[: L + 1, : L + 1]
        elif num.shape[0] < L + 1:
            pad = L + 1 - num.shape[0]
            num = np.pad(num, ((0, pad), (0, pad)))
        num.setflags(write=False)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "rep", Rep(self.rep))

    # construction helpers
    @classmethod
    def constant(cls, j: SpinQuantum, rep, value: complex = 1.0) -> "SpinSymbol":
        return cls(j, rep, np.array([[value]]), 0)

    def _like(self, num, L) -> "SpinSymbol":
        return SpinSymbol(self.j, self.rep, num, L)

    def raised(self, L: int) -> "SpinSymbol":
        """Same function written over (1 + zbar z)^L, L >= self.L."""
        if L < self.L:
            raise ValueError("cannot lower the denominator power this way")
        num = self.numerator
        for _ in range(L - self.L):
            out = np.zeros((num.shape[0] + 1,) * 2, dtype=complex)
            out[:-1, :-1] += num
            out[1:, 1:] += num
            num = out
        return self._like(num, L)

    def _check(self, other):
        if not isinstance(other, SpinSymbol):
            raise TypeError("expected a SpinSymbol")
        if other.j != self.j or other.rep != self.rep:
            raise ValueError("symbols belong to different spins or representations")

    def __add__(self, other):
        if not isinstance(other, SpinSymbol):
            other = SpinSymbol.constant(self.j, self.rep, complex(other))
        self._check(other)
        L = max(self.L, other.L)
        return self._like(self.raised(L).numerator + other.raised(L).numerator, L)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.numerator, self.L)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, SpinSymbol):
            return self._like(complex(other) * self.numerator, self.L)
        self._check(other)
        a, b = self.numerator, other.numerator
        out = np.zeros((a.shape[0] + b.shape[0] - 1,) * 2, dtype=complex)
        for m, n in zip(*np.nonzero(a)):
            out[m : m + b.shape[0], n : n + b.shape[1]] += a[m, n] * b
        return self._like(out, self.L + other.L)

    __rmul__ = __mul__

    def derivative(self, a: int = 0, b: int = 0) -> "SpinSymbol":
        """d^a/dzbar^a d^b/dz^b, with the denominator power raised by a + b."""
        out = self
        for _ in range(a):
            out = out._d_zbar()
        for _ in range(b):
            out = out._d_z()
        return out

    def _d_zbar(self):
        # (N_zbar w - L z N) / w^(L+1)
        N, L = self.numerator, self.L
        out = np.zeros((L + 2, L + 2), dtype=complex)
        m = np.arange(1, L + 1)
        dN = m[:, None] * N[1:, :]  # coefficient of zbar^(m-1) z^n
        out[: L, : L + 1] += dN
        out[1 : L + 1, 1 : L + 2] += dN
        out[: L + 1, 1 : L + 2] -= L * N
        return self._like(out, L + 1)

    def _d_z(self):
        return self._transposed()._d_zbar()._transposed()

    def _transposed(self):
        return self._like(self.numerator.T, self.L)

    def __call__(self, zbar, z):
        zb = np.asarray(zbar, dtype=complex)
        zz = np.asarray(z, dtype=complex)
        k = np.arange(self.L + 1)
        pb = zb[..., None] ** k
        pz = zz[..., None] ** k
        num = np.einsum("...m,mn,...n->...", pb, self.numerator, pz)
        out = num / (1.0 + zb * zz) ** self.L
        return complex(out) if out.ndim == 0 else out

    @cached_property
    def _num_derivs(self):
        N = self.numerator
        k = np.arange(self.L + 1)
        Nb = k[:, None] * N
        Nz = N * k[None, :]
        return N, Nb, Nz, (k * (k - 1))[:, None] * N, k[:, None] * N * k[None, :], N * (k * (k - 1))[None, :]

    def derivs2(self, zbar, z):
        """(H, H_zbar, H_z, H_zbar_zbar, H_zbar_z, H_z_z) at a single point."""
        zb, zz = complex(zbar), complex(z)
        L = self.L
        k = np.arange(L + 1)
        pb = zb**k
        pz = zz**k
        # derivative coefficient matrices are pre-multiplied by the exponent;
        # dividing the power vectors by zbar or z then lowers the degree
        N, Nb, Nz, Nbb, Nbz, Nzz = self._num_derivs
        lb = np.concatenate(([0j], pb[:-1]))          # zbar^(m-1)
        lz = np.concatenate(([0j], pz[:-1]))
        lbb = np.concatenate(([0j, 0j], pb[:-2]))[: L + 1]
        lzz = np.concatenate(([0j, 0j], pz[:-2]))[: L + 1]
        n0 = pb @ N @ pz
        nb = lb @ Nb @ pz
        nz = pb @ Nz @ lz
        nbb = lbb @ Nbb @ pz
        nbz = lb @ Nbz @ lz
        nzz = pb @ Nzz @ lzz
        w = 1.0 + zb * zz
        h = w ** (-L)
        h1 = -L * w ** (-L - 1)
        h2 = L * (L + 1) * w ** (-L - 2)
        hb, hz = h1 * zz, h1 * zb
        hbb, hzz = h2 * zz * zz, h2 * zb * zb
        hbz = h1 + h2 * zb * zz
        return (
            n0 * h,
            nb * h + n0 * hb,
            nz * h + n0 * hz,
            nbb * h + 2 * nb * hb + n0 * hbb,
            nbz * h + nb * hz + nz * hb + n0 * hbz,
            nzz * h + 2 * nz * hz + n0 * hzz,
        )

    # algebraic identification with an operator on spin L/2
    def as_operator(self) -> np.ndarray:
        s = _binom_sqrt(self.L)
        return self.numerator / np.outer(s, s)

    @classmethod
    def from_operator(cls, j: SpinQuantum, rep, mat: np.ndarray) -> "SpinSymbol":
        L = mat.shape[0] - 1
        s = _binom_sqrt(L)
        return cls(j, rep, mat * np.outer(s, s), L)

    def multipoles(self) -> dict[int, "SpinSymbol"]:
        """L^2 eigencomponents keyed by ell; they sum to the symbol."""
        return {ell: self._like(SpinSymbol.from_operator(self.j, self.rep, m).numerator, self.L)
                for ell, m in _casimir_split(self.as_operator()).items()}

    def max_multipole(self, tol: float = 1e-12) -> int:
        parts = _casimir_split(self.as_operator())
        scale = max((np.abs(m).max() for m in parts.values()), default=0.0)
        live = [ell for ell, m in parts.items() if np.abs(m).max() > tol * max(scale, 1e-300)]
        return max(live, default=0)

    def reduced(self, tol: float = 1e-10) -> "SpinSymbol":
        """Rewrite over the smallest denominator power the multipole content allows."""
        target = self.max_multipole()
        if target >= self.L:
            return self
        out = _divide_by_w(self.numerator, self.L - target, target)
        cand = self._like(out, target)
        back = cand.raised(self.L).numerator
        if np.abs(back - self.numerator).max() > tol * max(np.abs(self.numerator).max(), 1.0):
            return self
        return cand

    def allclose(self, other: "SpinSymbol", atol: float = 1e-12) -> bool:
        L = max(self.L, other.L)
        return bool(np.allclose(self.raised(L).numerator, other.raised(L).numerator, atol=atol, rtol=0))


def _divide_by_w(num: np.ndarray, p: int, target: int) -> np.ndarray:
    """Quotient of num by (1 + zbar z)^p, truncated to degree ``target``, diagonal by diagonal."""
    out = np.zeros((target + 1, target + 1), dtype=complex)
    r = np.arange(target + 1)
    # series coefficients of (1 + x)^(-p)
    inv = (-1.0) ** r * comb(p + r - 1, r) if p > 0 else (r == 0).astype(float)
    for d in range(-target, target + 1):
        rows = np.arange(max(0, -d), num.shape[0] - max(0, d))
        c = num[rows, rows + d]
        nq = target - abs(d) + 1
        q = np.convolve(c[:nq], inv[:nq])[:nq]
        qr = np.arange(max(0, -d), max(0, -d) + nq)
        out[qr, qr + d] = q
    return out


def _casimir_split(op: np.ndarray) -> dict[int, np.ndarray]:
    """Split an operator on spin L/2 into tensor-rank components via the adjoint Casimir."""
    dim = op.shape[0]
    L = dim - 1
    jj = L / 2.0
    mvals = jj - np.arange(dim)
    a = _ladder(dim)
    parts: dict[int, np.ndarray] = {}
    for d in range(-L, L + 1):
        k = np.arange(max(0, -d), dim - max(0, d))
        if k.size == 0:
            continue
        # C(X) = 2 j(j+1) X - 2 Jz X Jz - J+ X J- - J- X J+, restricted to X[k, k+d]
        diag = 2 * jj * (jj + 1) - 2 * mvals[k] * mvals[k + d]
        off = -a[k[:-1]] * a[k[:-1] + d]
        cmat = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        evals, evecs = np.linalg.eigh(cmat)
        x = op[k, k + d]
        coef = evecs.T @ x
        ells = np.rint((-1.0 + np.sqrt(1.0 + 4.0 * np.maximum(evals, 0.0))) / 2.0).astype(int)
        for ell, c, vec in zip(ells, coef, evecs.T):
            block = parts.setdefault(int(ell), np.zeros_like(op, dtype=complex))
            block[k, k + d] += c * vec
    return dict(sorted(parts.items()))


def spin_q_symbol(op: SpinOperator) -> SpinSymbol:
    """<zbar|op|z> / (1 + zbar z)^{2j}, exactly, with denominator power 2j."""
    return SpinSymbol.from_operator(op.j, Rep.Q, op.matrix)


def apply_Lsq(sym: SpinSymbol) -> SpinSymbol:
    """-(1 + zbar z)^2 d^2/dz dzbar, keeping the denominator power."""
    N, L = sym.numerator, sym.L
    k = np.arange(L + 1)
    pad = lambda a: np.pad(a, ((0, 2), (0, 2)))
    Nbz = np.zeros_like(N)
    Nbz[:-1, :-1] = (k[1:, None] * k[None, 1:]) * N[1:, 1:]
    zbNb = k[:, None] * N  # zbar N_zbar
    zNz = N * k[None, :]   # z N_z
    # w^2 N_zbar z
    t1 = pad(Nbz)
    t1[1:, 1:] += 2 * pad(Nbz)[:-1, :-1]
    t1[2:, 2:] += pad(Nbz)[:-2, :-2]
    # L w (zbar N_zbar + N + z N_z)
    inner = pad(zbNb + N + zNz)
    t2 = inner.copy()
    t2[1:, 1:] += inner[:-1, :-1]
    # L(L+1) zbar z N
    t3 = np.zeros_like(t1)
    t3[1 : L + 2, 1 : L + 2] = N
    out = -(t1 - L * t2 + L * (L + 1) * t3)
    # the top-degree parts cancel identically; drop the round-off
    return sym._like(out[: L + 1, : L + 1], L)


_ORDER = {Rep.P: -1, Rep.W: 0, Rep.Q: 1}


def spin_convert(sym: SpinSymbol, target) -> SpinSymbol:
    """Multipole rescaling H^{Q,P} = (1 -/+ L^2/(4 jt)) H^W, applied exactly per multipole.

    Accurate to relative O(jt^-2) as a map between the true symbols. Raises
    AsymptoticRangeError if a rescale factor is not positive for a component present.
    """
    target = Rep(target)
    if target == sym.rep:
        return sym
    jt = sym.j.jtilde
    out = np.zeros_like(sym.numerator)
    scale = np.abs(sym.numerator).max() if sym.numerator.size else 0.0
    for ell, part in _casimir_split(sym.as_operator()).items():
        if np.abs(part).max() <= 1e-14 * max(scale, 1e-300):
            continue
        x = ell * (ell + 1) / (4.0 * jt)
        f_from = 1.0 - _ORDER[sym.rep] * x
        f_to = 1.0 - _ORDER[target] * x
        if f_from <= 0 or f_to <= 0:
            raise AsymptoticRangeError(
                f"multipole {ell} rescale factor not positive for j = {sym.j.j}", ell=ell, j=sym.j.j
            )
        out += part * (f_to / f_from)
    s = _binom_sqrt(sym.L)
    return SpinSymbol(sym.j, target, out * np.outer(s, s), sym.L)


def spin_symbol_of_operator(op: SpinOperator, rep, reduce: bool = True) -> SpinSymbol:
    sym = spin_q_symbol(op)
    if reduce:
        sym = sym.reduced()
    return spin_convert(sym, rep)
