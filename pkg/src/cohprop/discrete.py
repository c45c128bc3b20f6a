"""Time-sliced coherent-state path integrals and their fluctuation determinants.

A discrete action with n integration pairs (zbar_j, z_j), j = 1..n, reads

    iS = sum_{j=0}^{n} zbar_{j+1} z_j - sum_{j=1}^{n} zbar_j z_j - i Delta sum_terms h(zbar_a, z_b),

with z_0 = z_i and zbar_{n+1} = zbar_f held fixed. The schemes differ only in
the Hamiltonian terms:

    Prep         n = M,      H^P(zbar_j, z_j),                      j = 1..M
    Qrep         n = M - 1,  H^Q(zbar_{j+1}, z_j),                  j = 0..M-1
    Alternating  n = M,      H^P(zbar_j, z_j) + H^Q(zbar_{j+1}, z_j),  j odd

The fluctuation matrix F = -Hess(iS) in the ordering (zbar_1, z_1, ..., zbar_n, z_n)
is symmetric tridiagonal. Its entries are stored per pair as

    D_bb[j] = F[zbar_j, zbar_j],  D_zz[j] = F[z_j, z_j],  D_bz[j] = F[zbar_j, z_j],
    c[j]    = F[z_j, zbar_{j+1}]   for j = 0..n,

where c[0] and c[n] couple to the fixed end points and are not matrix entries.
With them the exact finite-n identity is (-1)^n det F = Gamma_SK v_{n+1},
Gamma_SK = (-1)^n prod_j D_bz[j] prod_{j=1}^{n} c[j].
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .dynamics import Particle, ShootingOptions, TimeGrid, _integral, solve_bvp_shooting, unwrapped_sqrt
from .errors import CausticError, ConvergenceError, IdentityViolation, ZeroPivotError
from .exact import exact_propagator_particle
from .propagator import sk_integrand
from .symbols import NormalOrderedOperator, PhasePoint, Rep, SymbolPolynomial, convert_symbol, symbol_of_operator


class Scheme(str, enum.Enum):
    Q = "Qrep"
    P = "Prep"
    ALT = "Alternating"


@dataclass(frozen=True, eq=False)
class DiscreteAction:
    scheme: Scheme
    grid: TimeGrid
    hq: SymbolPolynomial
    hp: SymbolPolynomial
    z_i: complex
    zbar_f: complex
    # Hamiltonian terms as (symbol, a, b): h(zbar_a, z_b)
    terms: tuple

    @property
    def n(self) -> int:
        return self.grid.M - 1 if self.scheme == Scheme.Q else self.grid.M

    @property
    def delta(self) -> float:
        return self.grid.delta

    def _full(self, zbar, z):
        """Node arrays zbar[0..n+1] (zbar[0] unused) and z[0..n] with the fixed ends filled in."""
        n = self.n
        zb = np.empty(n + 2, complex)
        zz = np.empty(n + 1, complex)
        zb[0] = np.nan
        zb[1 : n + 1] = zbar
        zb[n + 1] = self.zbar_f
        zz[0] = self.z_i
        zz[1:] = z
        return zb, zz

    def _term_derivs(self, zb, zz):
        out = []
        for sym, a, b in self.terms:
            out.append((a, b, sym.derivs2(zb[a], zz[b])))
        return out

    def iS(self, zbar, z) -> complex:
        zb, zz = self._full(zbar, z)
        n = self.n
        kin = np.sum(zb[1:] * zz) - np.sum(zb[1 : n + 1] * zz[1:])
        ham = sum(sym.derivs2(zb[a], zz[b])[0] for sym, a, b in self.terms)
        return complex(kin - 1j * self.delta * ham)

    def gradient(self, zbar, z) -> tuple[np.ndarray, np.ndarray]:
        """(d iS / d zbar_j, d iS / d z_j) for j = 1..n."""
        zb, zz = self._full(zbar, z)
        n = self.n
        gb = zz[:-1] - zz[1:] + 0j
        gz = zb[2:] - zb[1 : n + 1] + 0j
        d = -1j * self.delta
        for a, b, (H, Hb, Hz, *_) in self._term_derivs(zb, zz):
            if 1 <= a <= n:
                gb[a - 1] += d * Hb
            if 1 <= b <= n:
                gz[b - 1] += d * Hz
        return gb, gz

    def coefficients(self, zbar, z) -> "SliceCoefficients":
        zb, zz = self._full(zbar, z)
        n = self.n
        Dbb = np.zeros(n + 1, complex)
        Dzz = np.zeros(n + 1, complex)
        Dbz = np.ones(n + 1, complex)
        c = -np.ones(n + 1, complex)
        d = 1j * self.delta
        for a, b, (H, Hb, Hz, Hbb, Hbz, Hzz) in self._term_derivs(zb, zz):
            if 1 <= a <= n:
                Dbb[a] += d * Hbb
            if 1 <= b <= n:
                Dzz[b] += d * Hzz
            if a == b:
                Dbz[a] += d * Hbz
            elif a == b + 1:
                c[b] += d * Hbz
        Dbz[0] = np.nan
        Dbb[0] = Dzz[0] = np.nan
        return SliceCoefficients(self.scheme, n, Dbb, Dzz, Dbz, c)


def build_discrete_action(scheme, op, z_i, zbar_f, grid: TimeGrid) -> DiscreteAction:
    """``op`` is a NormalOrderedOperator or a (H^Q, H^P) pair of symbols."""
    scheme = Scheme(scheme)
    if isinstance(op, NormalOrderedOperator):
        hq, hp = symbol_of_operator(op, Rep.Q), symbol_of_operator(op, Rep.P)
    else:
        hq, hp = op
    M = grid.M
    if scheme == Scheme.P:
        terms = tuple((hp, j, j) for j in range(1, M + 1))
    elif scheme == Scheme.Q:
        terms = tuple((hq, j + 1, j) for j in range(M))
    else:
        if M % 2:
            raise ValueError("the alternating scheme needs an even number of slices")
        terms = tuple(t for j in range(1, M, 2) for t in ((hp, j, j), (hq, j + 1, j)))
    return DiscreteAction(scheme, grid, hq, hp, complex(z_i), complex(zbar_f), terms)


@dataclass(frozen=True, eq=False)
class SliceCoefficients:
    """Per-pair fluctuation coefficients; index 0 of D_* is unused, c runs over 0..n."""

    scheme: Scheme
    n: int
    D_bb: np.ndarray
    D_zz: np.ndarray
    D_bz: np.ndarray
    c: np.ndarray

    def bands(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal (2n) and off-diagonal (2n - 1) of F."""
        n = self.n
        diag = np.empty(2 * n, complex)
        diag[0::2] = self.D_bb[1:]
        diag[1::2] = self.D_zz[1:]
        off = np.empty(max(2 * n - 1, 0), complex)
        off[0::2] = self.D_bz[1:]
        off[1::2] = self.c[1:n]
        return diag, off


@dataclass(frozen=True, eq=False)
class StationaryNodes:
    zbar: np.ndarray  # zbar_1..zbar_n
    z: np.ndarray     # z_1..z_n
    gradient_norm: float
    iterations: int


def _continuum_symbol(action: DiscreteAction):
    if action.scheme == Scheme.P:
        return action.hp
    if action.scheme == Scheme.Q:
        return action.hq
    # the alternating scheme averages H^P and H^Q, i.e. the Weyl symbol to this order
    return convert_symbol(action.hq, Rep.W)


def solve_discrete_stationary(
    action: DiscreteAction,
    tol: float = 1e-12,
    max_iter: int = 50,
    init=None,
) -> StationaryNodes:
    """Newton's method on grad iS = 0, started from the continuum trajectory sampled on the grid."""
    n = action.n
    if n == 0:
        return StationaryNodes(np.zeros(0, complex), np.zeros(0, complex), 0.0, 0)
    if init is None:
        M = action.grid.M
        fine = M * max(1, math.ceil(200 / M))
        traj = solve_bvp_shooting(
            Particle(), _continuum_symbol(action), action.z_i, action.zbar_f, TimeGrid(action.grid.T, fine)
        )
        step = fine // M
        zbar = traj.zbar[step : (n + 1) * step : step].copy()
        z = traj.z[step : (n + 1) * step : step].copy()
    else:
        zbar, z = (np.array(x, complex) for x in init)
    scale = max(1.0, abs(action.z_i), abs(action.zbar_f))
    gnorm = np.inf
    for it in range(max_iter + 1):
        gb, gz = action.gradient(zbar, z)
        g = np.empty(2 * n, complex)
        g[0::2], g[1::2] = gb, gz
        gnorm = float(np.max(np.abs(g)))
        if gnorm < tol * scale:
            return StationaryNodes(zbar, z, gnorm, it)
        diag, off = action.coefficients(zbar, z).bands()
        ab = np.zeros((3, 2 * n), complex)
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        # Hess(iS) = -F, so the Newton step is + F^{-1} g
        dx = solve_banded((1, 1), ab, g)
        zbar = zbar + dx[0::2]
        z = z + dx[1::2]
    raise ConvergenceError(
        "discrete stationary point not found", tag="discrete_path_integral.nonconvergence", gradient_norm=gnorm
    )


def slice_coefficients(action: DiscreteAction, nodes: StationaryNodes) -> SliceCoefficients:
    return action.coefficients(nodes.zbar, nodes.z)


def fluctuation_matrix(coeffs: SliceCoefficients) -> np.ndarray:
    diag, off = coeffs.bands()
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True)
class TridiagonalDeterminant:
    log_value: complex  # log of (-1)^n det F, continuous branch
    value: complex
    K_red: complex
    pair_ratios: np.ndarray  # -f_{2j} / f_{2j-2}


def det_tridiagonal(diag, off=None) -> TridiagonalDeterminant:
    """(-1)^n det of a 2n x 2n tridiagonal matrix by the leading-minor recurrence.

    Pass either the diagonal and off-diagonal, or the dense symmetric matrix alone.

    Minors are carried normalized by the last even minor; the ratios -f_{2j}/f_{2j-2}
    are each close to one on a fine grid, so summing their principal logs fixes
    the branch of the square root continuously as pairs are added.
    """
    diag = np.asarray(diag, complex)
    if off is None:
        diag, off = np.diag(diag).copy(), np.diag(diag, 1).copy()
    off = np.asarray(off, complex)
    if diag.size % 2:
        raise ValueError("expected an even dimension")
    n = diag.size // 2
    prev, cur = 0j, 1 + 0j  # (f_{k-1}, f_k) / f_{2j-2}
    ratios = np.empty(n, complex)
    logsum = 0j
    for j in range(n):
        k = 2 * j
        e_in = off[k - 1] if k > 0 else 0j
        f_odd = diag[k] * cur - e_in * e_in * prev
        f_even = diag[k + 1] * f_odd - off[k] * off[k] * cur
        if f_even == 0:
            raise ZeroPivotError(f"leading minor of order {k + 2} vanishes", order=k + 2)
        ratios[j] = -f_even
        logsum += cmath.log(-f_even)
        prev, cur = f_odd / f_even, 1 + 0j
    value = cmath.exp(logsum)
    return TridiagonalDeterminant(logsum, value, cmath.exp(-0.5 * logsum), ratios)


@dataclass(frozen=True, eq=False)
class JacobiFieldsDiscrete:
    u: np.ndarray  # u_0..u_n
    v: np.ndarray  # v_1..v_{n+1}

    @property
    def v_end(self) -> complex:
        return complex(self.v[-1])


def discrete_jacobi(coeffs: SliceCoefficients, truncated: bool = False) -> JacobiFieldsDiscrete:
    """Propagate (u_j, v_{j+1}) from u_0 = 0, v_1 = 1.

    The default solves each 2x2 step exactly. ``truncated`` uses the first-order
    transfer matrix [[1 - i D A, -i D B], [i D Bbar, 1 + i D A]] instead, with
    i D A_j = (D_bz[j] - 1) + (c[j-1] + 1), i D B_j = D_bb[j], i D Bbar_j = D_zz[j].
    """
    n = coeffs.n
    u = np.zeros(n + 1, complex)
    v = np.zeros(n + 1, complex)
    v[0] = 1.0  # stores v_1 at index 0
    Dbb, Dzz, Dbz, c = coeffs.D_bb, coeffs.D_zz, coeffs.D_bz, coeffs.c
    for j in range(1, n + 1):
        vj = v[j - 1]
        if truncated:
            iA = (Dbz[j] - 1.0) + (c[j - 1] + 1.0)
            u[j] = (1 - iA) * u[j - 1] - Dbb[j] * vj
            v[j] = Dzz[j] * u[j - 1] + (1 + iA) * vj
            continue
        if Dbz[j] == 0 or c[j] == 0:
            raise ZeroPivotError(f"singular 2x2 Jacobi step at pair {j}", pair=j)
        u[j] = -(c[j - 1] * u[j - 1] + Dbb[j] * vj) / Dbz[j]
        v[j] = -(Dbz[j] * vj + Dzz[j] * u[j]) / c[j]
    return JacobiFieldsDiscrete(u, v)


def gamma_sk(coeffs: SliceCoefficients) -> complex:
    n = coeffs.n
    return complex((-1) ** n * np.prod(coeffs.D_bz[1:]) * np.prod(coeffs.c[1:]))


@dataclass(frozen=True, eq=False)
class SliceRecursion:
    Gud: np.ndarray   # G_{j,ud}, j = 1..n
    detG: np.ndarray
    K_red: complex
    consistency: float  # max |G_uu - G_dd|


def slice_recursion(coeffs: SliceCoefficients) -> SliceRecursion:
    """Gaussian elimination slice by slice: K_red = prod (det G_j)^(-1/2).

    G_j = [[D_bz, G_ud], [D_zz, D_bz]], det G_j = D_bz^2 - G_ud D_zz, and
    G_{j+1,ud} = D_bb[j+1] + c[j]^2 G_{j,ud} / det G_j.
    """
    n = coeffs.n
    Gud = np.zeros(n, complex)
    detG = np.zeros(n, complex)
    if n == 0:
        return SliceRecursion(Gud, detG, 1 + 0j, 0.0)
    g = coeffs.D_bb[1]
    logsum = 0j
    for j in range(1, n + 1):
        Gud[j - 1] = g
        dG = coeffs.D_bz[j] * coeffs.D_bz[j] - g * coeffs.D_zz[j]
        if abs(dG) < 1e-300:
            raise CausticError(f"det G_{j} vanishes", tag="discrete_path_integral.caustic", pair=j)
        detG[j - 1] = dG
        logsum += cmath.log(dG)
        if j < n:
            g = coeffs.D_bb[j + 1] + coeffs.c[j] ** 2 * g / dG
    # G_uu and G_dd are both D_bz by the symmetry of F
    return SliceRecursion(Gud, detG, cmath.exp(-0.5 * logsum), 0.0)


@dataclass(frozen=True)
class DiscreteFluctuationReport:
    scheme: Scheme
    M: int
    n: int
    detF: complex
    gammaSK: complex
    vM1: complex
    identityResidual: float
    kRed: complex
    kRed_slices: complex

    def csv_row(self):
        return (
            self.scheme.value, self.M, self.detF.real, self.detF.imag, self.gammaSK.real, self.gammaSK.imag,
            self.vM1.real, self.vM1.imag, self.identityResidual, self.kRed.real, self.kRed.imag,
        )


def verify_identity(coeffs: SliceCoefficients, M: int | None = None, tol: float = 1e-10) -> DiscreteFluctuationReport:
    """Check (-1)^n det F = Gamma_SK v_{n+1}; on failure report the first pair where it breaks."""
    det = det_tridiagonal(*coeffs.bands())
    jac = discrete_jacobi(coeffs)
    gam = gamma_sk(coeffs)
    lhs = det.value
    rhs = gam * jac.v_end
    resid = abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(rhs)
    if not resid < tol:
        # the same identity holds for every leading block; find the first that breaks
        partial = np.cumprod(-coeffs.D_bz[1:] * coeffs.c[1:]) * jac.v[1:]
        minors = np.cumprod(det.pair_ratios)
        bad = np.nonzero(np.abs(minors - partial) > tol * np.abs(minors))[0]
        first = int(bad[0]) + 1 if bad.size else None
        raise IdentityViolation(
            "determinant / Jacobi identity violated",
            residual=resid,
            first_pair=first,
            minor=complex(minors[first - 1]) if first else None,
            gamma_v=complex(partial[first - 1]) if first else None,
        )
    rec = slice_recursion(coeffs)
    return DiscreteFluctuationReport(
        coeffs.scheme, M if M is not None else coeffs.n, coeffs.n, lhs, gam, jac.v_end, float(resid), det.K_red, rec.K_red
    )


def discrete_report(scheme, op, z_i, zbar_f, T, M) -> DiscreteFluctuationReport:
    """Stationary nodes, coefficients and the identity check in one call."""
    act = build_discrete_action(scheme, op, z_i, zbar_f, TimeGrid(T, M))
    nodes = solve_discrete_stationary(act)
    return verify_identity(slice_coefficients(act, nodes), M)


@dataclass(frozen=True)
class ContinuumLimit:
    v_T: complex
    int_A: complex
    det_limit: complex  # e^{+i int A} v(T) for Prep, e^{-i int A} v(T) for Qrep
    K_red: complex


def continuum_limit(scheme, op: NormalOrderedOperator, z_i, zbar_f, T, M: int = 2000) -> ContinuumLimit:
    """Continuum values that the discrete quantities approach as Delta -> 0."""
    scheme = Scheme(scheme)
    rep = {Scheme.P: Rep.P, Scheme.Q: Rep.Q, Scheme.ALT: Rep.W}[scheme]
    sym = symbol_of_operator(op, rep)
    traj = solve_bvp_shooting(Particle(), sym, z_i, zbar_f, TimeGrid(T, M), ShootingOptions(tol=1e-13))
    A = [sk_integrand(Particle(), sym, PhasePoint(zb, z)) for zb, z in zip(traj.zbar, traj.z)]
    intA = _integral(A, traj.grid)
    vT = complex(traj.v[-1])
    sign = {Scheme.P: 1, Scheme.Q: -1, Scheme.ALT: 0}[scheme]
    root = unwrapped_sqrt(traj.v)
    return ContinuumLimit(vT, intA, cmath.exp(1j * sign * intA) * vT, cmath.exp(-0.5j * sign * intA) / root)


def weyl_slice_saddle_check(op: NormalOrderedOperator, zbar2, z1, delta) -> complex:
    """Exact one-slice propagator minus overlap * exp(-i Delta H^Q(zbar2, z1)).

    Integrating the Weyl-kernel slice by steepest descent assembles H^W and its
    derivatives into H^Q at order Delta, so the difference is O(Delta^2).
    """
    exact = exact_propagator_particle(op, zbar2, z1, delta)
    hq = symbol_of_operator(op, Rep.Q)
    approx = cmath.exp(complex(zbar2) * complex(z1) - 1j * delta * hq(zbar2, z1))
    return complex(exact - approx)


def saddle_error_ratio(op: NormalOrderedOperator, zbar2, z1, delta) -> float:
    """|error(Delta)| / |error(Delta / 2)|; close to 4 for a second-order error."""
    return abs(weyl_slice_saddle_check(op, zbar2, z1, delta)) / abs(weyl_slice_saddle_check(op, zbar2, z1, delta / 2))
