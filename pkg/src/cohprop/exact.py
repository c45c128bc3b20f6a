"""Exact coherent-state propagators from matrix exponentials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import ConvergenceError
from .spin import SpinOperator, coherent_state_vector
from .symbols import NormalOrderedOperator, fock_matrix


@dataclass(frozen=True, eq=False)
class FockMatrix:
    nmax: int
    matrix: np.ndarray

    @classmethod
    def of(cls, op: NormalOrderedOperator, nmax: int) -> "FockMatrix":
        return cls(nmax, fock_matrix(op, nmax))


def _evolution(mat: np.ndarray, T: float, hermitian: bool) -> np.ndarray:
    if hermitian:
        w, U = np.linalg.eigh(mat)
        return (U * np.exp(-1j * T * w)) @ U.conj().T
    return expm(-1j * T * mat)


def _coherent_fock(z: complex, nmax: int) -> np.ndarray:
    """z^n / sqrt(n!), n = 0..nmax (unnormalized coherent-state components)."""
    n = np.arange(nmax + 1)
    if z == 0:
        return (n == 0).astype(complex)
    return np.exp(n * np.log(complex(z)) - 0.5 * gammaln(n + 1.0))


def exact_propagator_particle(
    op: NormalOrderedOperator,
    zbar_f: complex,
    z_i: complex,
    T: float,
    nmax: int | None = None,
    tol: float = 1e-12,
    max_nmax: int = 1024,
) -> complex:
    """<zbar_f| exp(-i H T) |z_i> in a truncated number basis, nmax doubled until stable."""
    hermitian = op.is_hermitian()
    if nmax is None:
        r2 = max(abs(zbar_f), abs(z_i)) ** 2
        nmax = int(max(24, 2 * r2 + 12 * np.sqrt(r2) + 4 * op.max_degree))

    def value(nm):
        U = _evolution(fock_matrix(op, nm), T, hermitian)
        return complex(_coherent_fock(zbar_f, nm) @ U @ _coherent_fock(z_i, nm))

    prev = value(nmax)
    while 2 * nmax <= max_nmax:
        nmax *= 2
        cur = value(nmax)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError(
        "exact propagator did not converge in nmax", tag="exact_oracle.nonconvergence", nmax=nmax, last=prev
    )


def exact_propagator_spin(op: SpinOperator, zbar_f: complex, z_i: complex, T: float) -> complex:
    """<zbar_f| exp(-i H T) |z_i> for spin coherent states exp(z J-)|j, j>."""
    U = _evolution(op.matrix, T, op.is_hermitian())
    bra = coherent_state_vector(zbar_f, op.j)
    ket = coherent_state_vector(z_i, op.j)
    return complex(bra @ U @ ket)
