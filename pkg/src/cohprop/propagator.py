"""Continuum semiclassical propagators in the P, Q and Weyl representations.

For a particle, with v(T) the Jacobi field of the classical path,

    K = v(T)^(-1/2) exp(iS + sk),  sk = +(i/2) int A (Q),  -(i/2) int A (P),  0 (W),

since d^2(iS)/dzbar_f dz_i = 1/v(T). For a spin the same structure holds with
d^2(iS)/dzbar_f dz_i = 2 kappa / ((1 + zbar(0) z_i)^2 v(T)) and, under the square
root, the factor 1/(2 kappa) times

    W:  1,                                  kappa = j + 1/2
    Q:  (1 + zbar_f z(T))(1 + zbar(0) z_i),  kappa = j
    P:  1 / ((1 + zbar_f z(T))(1 + zbar(0) z_i)),  kappa = j + 1

The P form is the one for which the SK term, split as for Q, turns the kinetic and
boundary coefficients into j + 1/2; with kappa = j it does not converge in j.

Square roots are continued from T = 0 along the trajectory.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ClassicalTrajectory,
    Particle,
    ShootingOptions,
    Spin,
    TimeGrid,
    _flow,
    _integral,
    action,
    solve_bvp_shooting,
    unwrapped_sqrt,
)
from .spin import SpinOperator, spin_convert, spin_q_symbol
from .symbols import NormalOrderedOperator, PhasePoint, Rep, symbol_of_operator

DEFAULT_M = 400


@dataclass(frozen=True)
class PropagatorResult:
    value: complex
    iS: complex
    prefactor: complex
    sk_phase: complex
    rep: Rep
    system: str
    method: str = "continuum"
    diagnostics: dict = field(default_factory=dict, compare=False)

    @classmethod
    def assemble(cls, iS, prefactor, sk_phase, rep, system, method="continuum", **diag):
        value = prefactor * cmath.exp(iS + sk_phase)
        return cls(complex(value), complex(iS), complex(prefactor), complex(sk_phase), Rep(rep), system, method, diag)

    @property
    def value_without_sk(self) -> complex:
        return self.prefactor * cmath.exp(self.iS)

    def csv_row(self, z_i, zbar_f, T):
        z_i, zbar_f = complex(z_i), complex(zbar_f)
        return (
            self.system, self.rep.value, z_i.real, z_i.imag, zbar_f.real, zbar_f.imag, T,
            self.value.real, self.value.imag, self.iS.real, self.iS.imag,
            self.sk_phase.real, self.sk_phase.imag, self.diagnostics.get("residual", 0.0),
        )


def sk_integrand(system, symbol, pt: PhasePoint) -> complex:
    """A = (1/2)[d_zbar(g H_z) + d_z(g H_zbar)], g the EOM metric factor (1 for a particle)."""
    H, Hb, Hz, Hbb, Hbz, Hzz = symbol.derivs2(pt.zbar, pt.z)
    g, gb, gz = system.metric(pt.zbar, pt.z)
    return complex(g * Hbz + 0.5 * (gb * Hz + gz * Hb))


def sk_split(system: Spin, symbol, pt: PhasePoint, velocity=None) -> tuple[complex, complex, complex]:
    """Spin split A = A1 + A2 and A2 recomputed from the path velocity.

    A1 = (1 + zbar z)^2 H_zbar_z / (2 kappa), A2 = (1 + zbar z)(z H_z + zbar H_zbar) / (2 kappa),
    and A2 = -i (zbar' z - z' zbar) / (1 + zbar z) on a solution of the equations of motion.
    """
    zb, z = pt.zbar, pt.z
    H, Hb, Hz, Hbb, Hbz, Hzz = symbol.derivs2(zb, z)
    w = 1.0 + zb * z
    k = system.kappa
    a1 = w * w * Hbz / (2 * k)
    a2 = w * (z * Hz + zb * Hb) / (2 * k)
    if velocity is None:
        velocity = _flow(system, symbol, zb, z)[:2]
    dz, dzb = velocity
    a2_eom = -1j * (dzb * z - dz * zb) / w
    return complex(a1), complex(a2), complex(a2_eom)


def _sk_phase(traj: ClassicalTrajectory, rep: Rep) -> complex:
    if rep == Rep.W:
        return 0j
    A = [sk_integrand(traj.system, traj.symbol, PhasePoint(zb, z)) for zb, z in zip(traj.zbar, traj.z)]
    integral = _integral(A, traj.grid)
    return (0.5j if rep == Rep.Q else -0.5j) * integral


def _grid(T, M, grid):
    if grid is not None:
        return grid
    return TimeGrid(T, M or DEFAULT_M)


def _diag(traj):
    d = traj.diagnostics
    return dict(
        newton_iterations=d.get("newton_iterations"),
        residual=float(abs(traj.zbar[-1] - traj.zbar_f)) if not d.get("residuals") else float(d["residuals"][-1]),
        v_T=complex(traj.v[-1]),
        zbar0=complex(traj.zbar[0]),
        zT=complex(traj.z[-1]),
    )


def propagate_particle(
    op: NormalOrderedOperator,
    rep,
    z_i: complex,
    zbar_f: complex,
    T: float,
    M: int | None = None,
    grid: TimeGrid | None = None,
    opts: ShootingOptions | None = None,
) -> PropagatorResult:
    rep = Rep(rep)
    grid = _grid(T, M, grid)
    sym = symbol_of_operator(op, rep)
    traj = solve_bvp_shooting(Particle(), sym, z_i, zbar_f, grid, opts)
    iS = action(traj)
    pref = 1.0 / unwrapped_sqrt(traj.v)
    return PropagatorResult.assemble(iS, pref, _sk_phase(traj, rep), rep, "particle", **_diag(traj))


def spin_symbol_for(op: SpinOperator, rep):
    """Reduced Q symbol, and W or P symbols obtained from it by multipole rescaling."""
    rep = Rep(rep)
    q = spin_q_symbol(op).reduced()
    if rep == Rep.Q:
        return q
    w = spin_convert(q, Rep.W)
    return w if rep == Rep.W else spin_convert(w, Rep.P)


def propagate_spin(
    op: SpinOperator,
    rep,
    z_i: complex,
    zbar_f: complex,
    T: float,
    M: int | None = None,
    grid: TimeGrid | None = None,
    opts: ShootingOptions | None = None,
    symbol=None,
) -> PropagatorResult:
    rep = Rep(rep)
    grid = _grid(T, M, grid)
    sym = spin_symbol_for(op, rep) if symbol is None else symbol
    system = Spin.for_rep(op.j, rep)
    traj = solve_bvp_shooting(system, sym, z_i, zbar_f, grid, opts)
    iS = action(traj)
    w0 = 1.0 + traj.zbar[0] * traj.z[0]
    if rep == Rep.W:
        pref = 1.0 / (w0 * unwrapped_sqrt(traj.v))
    elif rep == Rep.Q:
        pref = unwrapped_sqrt((1.0 + traj.zbar * traj.z) / (w0 * traj.v))
    else:
        pref = unwrapped_sqrt(w0 / ((1.0 + traj.zbar * traj.z) * traj.v)) / (w0 * w0)
    return PropagatorResult.assemble(iS, pref, _sk_phase(traj, rep), rep, "spin", **_diag(traj))
