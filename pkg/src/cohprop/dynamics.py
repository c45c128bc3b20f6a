"""Complexified classical trajectories, Jacobi fields, Riccati flow and the action.

The flow is written for an independent pair (z, zbar),

    dz/dt = -i g H_zbar,   dzbar/dt = i g H_z,

with g = 1 for a particle and g = (1 + zbar z)^2 / (2 kappa) for a spin. The
Jacobi fields (u, v) = (dz, dzbar) / dzbar(0) obey the linearized flow
(u, v)' = [[p, q], [r, s]] (u, v) with u(0) = 0, v(0) = 1, and G = -u/v obeys

    dG/dt = -q + (p - s) G + r G^2,

which for a particle is -i dG/dt = B - 2 A G + Bbar G^2 with A = H_zbar_z,
B = H_zbar_zbar, Bbar = H_zz.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import simpson

from .errors import (
    CausticError,
    ConvergenceError,
    DivergedTrajectoryError,
    RiccatiBlowupError,
)
from .spin import SpinQuantum
from .symbols import PhasePoint, Rep

_BIG = 1e150


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not self.T >= 0:
            raise ValueError("T must be non-negative")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "M", int(self.M))

    @property
    def delta(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.M + 1)

    def scaled(self, T: float) -> "TimeGrid":
        return TimeGrid(T, self.M)


@dataclass(frozen=True)
class Particle:
    name = "particle"

    def metric(self, zbar, z):
        return 1.0, 0.0, 0.0

    def kinetic(self, zbar, z, dzbar, dz):
        return 0.5 * (dzbar * z - zbar * dz)

    def boundary(self, zbar_f, zT, zbar0, z_i):
        return 0.5 * (zbar_f * zT + zbar0 * z_i)

    def cross_factor(self, zbar0, z_i) -> complex:
        """d^2(iS)/dzbar_f dz_i = cross_factor / v(T)."""
        return 1.0


@dataclass(frozen=True)
class Spin:
    """Spin dynamics with action and EOM coefficient ``kappa`` (j, j + 1/2 or j + 1)."""

    kappa: float
    j: SpinQuantum | None = None
    name = "spin"

    @classmethod
    def for_rep(cls, j: SpinQuantum, rep) -> "Spin":
        """kappa = j + 1/2 for W, j for Q, j + 1 for P."""
        rep = Rep(rep)
        return cls({Rep.W: j.jtilde, Rep.Q: j.j, Rep.P: j.j + 1.0}[rep], j)

    def metric(self, zbar, z):
        w = 1.0 + zbar * z
        k = self.kappa
        return w * w / (2.0 * k), w * z / k, w * zbar / k

    def kinetic(self, zbar, z, dzbar, dz):
        return self.kappa * (dzbar * z - zbar * dz) / (1.0 + zbar * z)

    def boundary(self, zbar_f, zT, zbar0, z_i):
        return self.kappa * (np.log(1.0 + zbar_f * zT) + np.log(1.0 + zbar0 * z_i))

    def cross_factor(self, zbar0, z_i) -> complex:
        return 2.0 * self.kappa / (1.0 + zbar0 * z_i) ** 2


def _flow(system, symbol, zb, z):
    """Velocities and the linearization entries (p, q, r, s) at one point."""
    H, Hb, Hz, Hbb, Hbz, Hzz = symbol.derivs2(zb, z)
    g, gb, gz = system.metric(zb, z)
    dz = -1j * g * Hb
    dzb = 1j * g * Hz
    p = -1j * (gz * Hb + g * Hbz)
    q = -1j * (gb * Hb + g * Hbb)
    r = 1j * (gz * Hz + g * Hzz)
    s = 1j * (gb * Hz + g * Hbz)
    return dz, dzb, p, q, r, s


def eom_rhs(system, symbol, pt: PhasePoint) -> tuple[complex, complex]:
    """(dz/dt, dzbar/dt) at ``pt``."""
    dz, dzb, *_ = _flow(system, symbol, pt.zbar, pt.z)
    return complex(dz), complex(dzb)


@dataclass(frozen=True)
class SecondDerivs:
    """Riccati coefficients in the form -i dG/dt = B - 2 A G + Bbar G^2.

    For a particle these are the second derivatives of H. For a spin the
    metric factor and its gradient are absorbed: B = i q, Bbar = -i r,
    A = i (p - s) / 2 in terms of the linearized flow.
    """

    A: complex
    B: complex
    Bbar: complex


def second_derivs(system, symbol, pt: PhasePoint) -> SecondDerivs:
    _, _, p, q, r, s = _flow(system, symbol, pt.zbar, pt.z)
    return SecondDerivs(complex(0.5j * (p - s)), complex(1j * q), complex(-1j * r))


@dataclass(frozen=True, eq=False)
class ClassicalTrajectory:
    grid: TimeGrid
    z: np.ndarray
    zbar: np.ndarray
    u: np.ndarray
    v: np.ndarray
    system: Any
    symbol: Any
    G: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def rep(self):
        return self.symbol.rep

    @property
    def z_i(self) -> complex:
        return complex(self.z[0])

    @property
    def zbar_f(self) -> complex:
        return complex(self.zbar[-1])

    def velocities(self) -> tuple[np.ndarray, np.ndarray]:
        out = [_flow(self.system, self.symbol, zb, z)[:2] for zb, z in zip(self.zbar, self.z)]
        arr = np.array(out, dtype=complex).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    def energy(self) -> np.ndarray:
        return np.array([self.symbol.derivs2(zb, z)[0] for zb, z in zip(self.zbar, self.z)])

    def csv_rows(self):
        """(t, Re z, Im z, Re zbar, Im zbar, Re v, Im v) per node."""
        for t, z, zb, v in zip(self.grid.times, self.z, self.zbar, self.v):
            yield (t, z.real, z.imag, zb.real, zb.imag, v.real, v.imag)


def integrate_ivp(system, symbol, z0, zbar0, grid: TimeGrid, riccati: bool = False) -> ClassicalTrajectory:
    """Fixed-step RK4 for the trajectory and its Jacobi fields (and optionally G)."""
    # overflow is detected below and reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4(system, symbol, z0, zbar0, grid, riccati)


def _rk4(system, symbol, z0, zbar0, grid, riccati):
    h = grid.delta
    n = grid.M + 1
    Z = np.empty(n, complex)
    ZB = np.empty(n, complex)
    U = np.empty(n, complex)
    V = np.empty(n, complex)
    GG = np.empty(n, complex) if riccati else None
    z, zb, u, v, G = complex(z0), complex(zbar0), 0j, 1 + 0j, 0j

    def f(z, zb, u, v, G):
        dz, dzb, p, q, r, s = _flow(system, symbol, zb, z)
        dG = -q + (p - s) * G + r * G * G if riccati else 0j
        return dz, dzb, p * u + q * v, r * u + s * v, dG

    times = grid.times
    for k in range(n):
        Z[k], ZB[k], U[k], V[k] = z, zb, u, v
        if riccati:
            GG[k] = G
            if not abs(G) < 1e8:
                raise RiccatiBlowupError(f"G_ud diverges near t = {times[k]:.6g}", t=float(times[k]))
        if not (abs(z) < _BIG and abs(zb) < _BIG and abs(v) < _BIG and abs(u) < _BIG):
            raise DivergedTrajectoryError(
                f"trajectory left the representable range near t = {times[k]:.6g}", t=float(times[k])
            )
        if k == n - 1:
            break
        y = (z, zb, u, v, G)
        k1 = f(*y)
        k2 = f(*(a + 0.5 * h * b for a, b in zip(y, k1)))
        k3 = f(*(a + 0.5 * h * b for a, b in zip(y, k2)))
        k4 = f(*(a + h * b for a, b in zip(y, k3)))
        z, zb, u, v, G = (
            a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
        )
    return ClassicalTrajectory(grid, Z, ZB, U, V, system, symbol, GG)


@dataclass(frozen=True)
class ShootingOptions:
    tol: float = 1e-11
    max_iter: int = 40
    caustic_tol: float = 1e-12
    homotopy_steps: int = 8
    polish: bool = True
    initial_guess: complex | None = None


def _newton(system, symbol, z_i, zbar_f, grid, guess, opts):
    x = complex(guess)
    residuals = []
    best = None
    for it in range(opts.max_iter + 1):
        traj = integrate_ivp(system, symbol, z_i, x, grid)
        res = traj.zbar[-1] - zbar_f
        residuals.append(abs(res))
        if best is None or abs(res) < best[0]:
            best = (abs(res), traj)
        if abs(res) < opts.tol:
            if opts.polish and abs(res) > 0:
                vT = traj.v[-1]
                if abs(vT) > opts.caustic_tol:
                    try:
                        t2 = integrate_ivp(system, symbol, z_i, x - res / vT, grid)
                    except DivergedTrajectoryError:
                        t2 = None
                    if t2 is not None and abs(t2.zbar[-1] - zbar_f) < abs(res):
                        traj = t2
                        residuals.append(abs(t2.zbar[-1] - zbar_f))
            return traj, residuals, it
        vT = traj.v[-1]
        if abs(vT) < opts.caustic_tol:
            raise CausticError(
                "Jacobi field v(T) vanishes: near a caustic",
                tag="classical_dynamics.near_caustic",
                v_T=complex(vT),
            )
        step = res / vT
        # backtrack when the full step makes things worse or diverges
        for _ in range(12):
            try:
                trial = integrate_ivp(system, symbol, z_i, x - step, grid)
                if abs(trial.zbar[-1] - zbar_f) < max(abs(res), 1e-300) * 1.5 or abs(res) < 1e-3:
                    break
            except DivergedTrajectoryError:
                pass
            step *= 0.5
        x = x - step
    return None, residuals, best


def solve_bvp_shooting(system, symbol, z_i, zbar_f, grid: TimeGrid, opts: ShootingOptions | None = None):
    """Trajectory with z(0) = z_i and zbar(T) = zbar_f by Newton shooting on zbar(0).

    The Newton derivative is the Jacobi field v(T). The default starting point is
    zbar(0) = zbar_f, the branch continuously connected to T = 0; if Newton stalls
    the time is ramped up from a fraction of T.
    """
    opts = opts or ShootingOptions()
    z_i, zbar_f = complex(z_i), complex(zbar_f)
    guess = zbar_f if opts.initial_guess is None else complex(opts.initial_guess)
    traj, residuals, it = _newton(system, symbol, z_i, zbar_f, grid, guess, opts)
    homotopy = False
    if traj is None and opts.homotopy_steps > 1 and grid.T > 0:
        homotopy = True
        x = zbar_f
        for k in range(1, opts.homotopy_steps + 1):
            sub = grid.scaled(grid.T * k / opts.homotopy_steps)
            traj, residuals, it = _newton(system, symbol, z_i, zbar_f, sub, x, opts)
            if traj is None:
                break
            x = traj.zbar[0]
    if traj is None:
        best = it[0] if isinstance(it, tuple) else float("nan")
        raise ConvergenceError(
            "shooting did not converge",
            tag="classical_dynamics.nonconvergence",
            best_residual=best,
            residuals=residuals,
        )
    vT = traj.v[-1]
    if abs(vT) < opts.caustic_tol:
        raise CausticError(
            "Jacobi field v(T) vanishes: near a caustic", tag="classical_dynamics.near_caustic", v_T=complex(vT)
        )
    traj.diagnostics.update(newton_iterations=it, residuals=residuals, homotopy=homotopy)
    return traj


def _integral(y, grid: TimeGrid) -> complex:
    if grid.T == 0:
        return 0j
    return complex(simpson(np.asarray(y), x=grid.times))


def action(traj: ClassicalTrajectory, symbol=None) -> complex:
    """iS: boundary term plus the integral of the kinetic term minus iH (Simpson)."""
    symbol = traj.symbol if symbol is None else symbol
    sysm = traj.system
    dz, dzb = traj.velocities()
    H = np.array([symbol.derivs2(zb, z)[0] for zb, z in zip(traj.zbar, traj.z)])
    integrand = sysm.kinetic(traj.zbar, traj.z, dzb, dz) - 1j * H
    bnd = sysm.boundary(traj.zbar[-1], traj.z[-1], traj.zbar[0], traj.z[0])
    return complex(bnd) + _integral(integrand, traj.grid)


@dataclass(frozen=True, eq=False)
class RiccatiState:
    times: np.ndarray
    Gud: np.ndarray
    closed_form: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    discrepancy: float


def riccati_Gud(traj: ClassicalTrajectory, symbol=None) -> RiccatiState:
    """Integrate the Riccati flow for G_ud along ``traj`` and compare with the Jacobi closed form.

    The closed form is G = (s - v'/v) / r with v' from the linearized flow; for a
    particle this is (A + i v'/v) / Bbar. Where r vanishes it is replaced by its
    limit -u/v.
    """
    symbol = traj.symbol if symbol is None else symbol
    ric = integrate_ivp(traj.system, symbol, traj.z[0], traj.zbar[0], traj.grid, riccati=True)
    n = len(ric.z)
    closed = np.empty(n, complex)
    A = np.empty(n, complex)
    B = np.empty(n, complex)
    Bb = np.empty(n, complex)
    for k in range(n):
        _, _, p, q, r, s = _flow(traj.system, symbol, ric.zbar[k], ric.z[k])
        A[k], B[k], Bb[k] = 0.5j * (p - s), 1j * q, -1j * r
        vdot = r * ric.u[k] + s * ric.v[k]
        scale = abs(p) + abs(q) + abs(s) + 1e-300
        if abs(r) > 1e-12 * scale:
            closed[k] = (s - vdot / ric.v[k]) / r
        else:
            closed[k] = -ric.u[k] / ric.v[k]
    disc = float(np.max(np.abs(ric.G - closed))) if n else 0.0
    return RiccatiState(traj.grid.times, ric.G, closed, A, B, Bb, disc)


@dataclass(frozen=True)
class CrossDerivative:
    value: complex
    finite_difference: complex
    rel_discrepancy: float


def cross_derivative_from_trajectory(traj: ClassicalTrajectory) -> complex:
    """d^2(iS)/dzbar_f dz_i from the Jacobi field: cross_factor / v(T)."""
    return complex(traj.system.cross_factor(traj.zbar[0], traj.z[0]) / traj.v[-1])


def cross_derivative_of_action(
    system,
    symbol,
    z_i,
    zbar_f,
    grid: TimeGrid,
    h: float = 1e-4,
    rtol: float = 1e-5,
    opts: ShootingOptions | None = None,
) -> CrossDerivative:
    """d^2(iS)/dzbar_f dz_i by the Jacobi relation and by centred differences of re-solved actions.

    Raises ConvergenceError (tag ``classical_dynamics.cross_derivative``) when the
    two disagree by more than ``rtol``.
    """
    opts = opts or ShootingOptions(tol=1e-13)
    base = solve_bvp_shooting(system, symbol, z_i, zbar_f, grid, opts)
    a = cross_derivative_from_trajectory(base)

    def iS(db, dz):
        o = ShootingOptions(tol=opts.tol, initial_guess=base.zbar[0], max_iter=opts.max_iter)
        t = solve_bvp_shooting(system, symbol, z_i + dz, zbar_f + db, grid, o)
        return action(t, symbol)

    b = (iS(h, h) - iS(h, -h) - iS(-h, h) + iS(-h, -h)) / (4 * h * h)
    rel = abs(a - b) / abs(a)
    if not rel < rtol:
        raise ConvergenceError(
            "Jacobi and finite-difference cross derivatives disagree",
            tag="classical_dynamics.cross_derivative",
            jacobi=a,
            finite_difference=b,
            rel=rel,
        )
    return CrossDerivative(a, complex(b), float(rel))


def unwrapped_sqrt(values: np.ndarray) -> complex:
    """Square root of values[-1] on the branch continuous along the sequence from values[0] ~ 1."""
    values = np.asarray(values, dtype=complex)
    if np.any(values == 0):
        raise CausticError("prefactor passes through zero", tag="semiclassical_propagator.branch")
    phase = np.unwrap(np.angle(values))
    return complex(np.sqrt(abs(values[-1])) * cmath.exp(0.5j * phase[-1]))
