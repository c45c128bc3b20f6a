"""Acceptance criteria. Each test records one PASS/FAIL line, printed after the run."""

import cmath
import time

import numpy as np
import pytest

from cohprop.discrete import Scheme, continuum_limit, discrete_report, saddle_error_ratio
from cohprop.dynamics import Particle, TimeGrid, cross_derivative_of_action, riccati_Gud, solve_bvp_shooting
from cohprop.exact import exact_propagator_particle, exact_propagator_spin
from cohprop.propagator import propagate_particle, propagate_spin
from cohprop.spin import SpinQuantum, spin_matrices
from cohprop.symbols import (
    NormalOrderedOperator,
    PhasePoint,
    Rep,
    SymbolPolynomial,
    convert_symbol,
    eval_symbol,
    kerr_operator,
    symbol_of_operator,
    weyl_kernel_trace_oracle,
)

pytestmark = pytest.mark.acceptance

KERR = kerr_operator(1.0, 0.05)
Z_KERR = 1.2
T_KERR = 1.0


@pytest.fixture(scope="module")
def kerr_results():
    ex = exact_propagator_particle(KERR, Z_KERR, Z_KERR, T_KERR)
    res = {rep: propagate_particle(KERR, rep, Z_KERR, Z_KERR, T_KERR) for rep in Rep}
    return ex, res


def test_quadratic_exactness(record):
    t0 = time.perf_counter()
    op = NormalOrderedOperator.number()
    radii, angles = (0.0, 0.8, 1.5), (0.3, 2.1, -1.7)
    points = [
        (radii[a] * cmath.exp(1j * angles[b]), radii[(a + b + 1) % 3] * cmath.exp(-1j * angles[a]))
        for a in range(3)
        for b in range(3)
    ]
    worst = 0.0
    for z_i, zbar_f in points:
        for T in (0.5, 1.0, 2.0):
            ex = exact_propagator_particle(op, zbar_f, z_i, T)
            for rep in Rep:
                k = propagate_particle(op, rep, z_i, zbar_f, T).value
                worst = max(worst, abs(k - ex) / abs(ex))
    dt = time.perf_counter() - t0
    ok = record(1, "quadratic exactness", worst < 1e-9 and dt < 10, f"max rel error {worst:.2e}, {dt:.1f} s")
    assert ok


def test_phase_correction_necessity(record, kerr_results):
    t0 = time.perf_counter()
    ex, res = kerr_results
    parts = []
    ok = True
    for rep in (Rep.Q, Rep.P):
        with_sk = abs(res[rep].value - ex)
        without = abs(res[rep].value_without_sk - ex)
        ok &= with_sk < 0.1 * without
        parts.append(f"{rep.value}: {with_sk:.3e} vs 0.1 x {without:.3e}")
    dt = time.perf_counter() - t0
    ok = record(2, "phase correction necessity", ok and dt < 10, "; ".join(parts))
    assert ok


def test_representation_equivalence(record, kerr_results):
    _, res = kerr_results
    spread = max(abs(res[a].value - res[b].value) for a in Rep for b in Rep)
    q = res[Rep.Q]
    bound = 0.2 * abs(cmath.exp(q.sk_phase) - 1) * abs(q.value)
    ok = record(3, "representation equivalence", spread <= bound, f"spread {spread:.3e} <= {bound:.3e}")
    assert ok


def test_discrete_identity(record):
    t0 = time.perf_counter()
    worst = 0.0
    for scheme in (Scheme.P, Scheme.Q):
        for M in (4, 16, 64, 256):
            worst = max(worst, discrete_report(scheme, KERR, Z_KERR, Z_KERR, T_KERR, M).identityResidual)
    dt = time.perf_counter() - t0
    ok = record(4, "discrete determinant identity", worst < 1e-10 and dt < 30, f"max residual {worst:.2e}, {dt:.1f} s")
    assert ok


def test_continuum_limit_rates(record):
    parts = []
    ok = True
    for scheme in (Scheme.P, Scheme.Q):
        lim = continuum_limit(scheme, KERR, Z_KERR, Z_KERR, T_KERR)
        errs = [abs(discrete_report(scheme, KERR, Z_KERR, Z_KERR, T_KERR, M).detF - lim.det_limit) for M in (64, 128, 256)]
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        ok &= all(1.5 <= r <= 2.5 for r in ratios)
        parts.append(f"{scheme.value} ratios {ratios[0]:.3f}, {ratios[1]:.3f}")
    ok = record(5, "continuum-limit rates", ok, "; ".join(parts))
    assert ok


def test_riccati_closed_form(record):
    hq = symbol_of_operator(KERR, Rep.Q)
    traj = solve_bvp_shooting(Particle(), hq, Z_KERR, Z_KERR, TimeGrid(T_KERR, 1000))
    disc = riccati_Gud(traj).discrepancy
    ok = record(6, "Riccati vs closed form", disc < 1e-8, f"sup discrepancy {disc:.2e}")
    assert ok


def test_jacobi_action_duality(record):
    hq = symbol_of_operator(KERR, Rep.Q)
    cd = cross_derivative_of_action(Particle(), hq, Z_KERR, Z_KERR, TimeGrid(T_KERR, 1000), rtol=1.0)
    ok = record(7, "Jacobi/action duality", cd.rel_discrepancy < 1e-5, f"rel discrepancy {cd.rel_discrepancy:.2e}")
    assert ok


def test_spin_linear_exactness(record):
    worst = 0.0
    z_i, zbar_f, T = 0.4 + 0.3j, 0.5 - 0.2j, 1.3
    for two_j in (4, 10, 20):
        jz = spin_matrices(SpinQuantum(two_j))[2]
        op = 0.8 * jz
        ex = exact_propagator_spin(op, zbar_f, z_i, T)
        k = propagate_spin(op, Rep.W, z_i, zbar_f, T).value
        worst = max(worst, abs(k - ex) / abs(ex))
    ok = record(8, "spin linear exactness", worst < 1e-7, f"max rel error {worst:.2e}")
    assert ok


def test_spin_j_scaling(record):
    # the classical problem is held fixed by scaling time with 1/j
    t0 = time.perf_counter()
    ew, eq = [], []
    for two_j in (10, 20, 40):
        j = SpinQuantum(two_j)
        jx, _, jz, _, _ = spin_matrices(j)
        op = jz * jz + 0.3 * jx
        T = 1.0 / j.j
        ex = exact_propagator_spin(op, 0.6, 0.6, T)
        ew.append(abs(propagate_spin(op, Rep.W, 0.6, 0.6, T).value - ex) / abs(ex))
        eq.append(abs(propagate_spin(op, Rep.Q, 0.6, 0.6, T).value_without_sk - ex) / abs(ex))
    dt = time.perf_counter() - t0
    ok = all(w < q for w, q in zip(ew, eq)) and ew[0] > ew[1] > ew[2] and dt < 60
    w_txt = ", ".join(f"{e:.3f}" for e in ew)
    q_txt = ", ".join(f"{e:.3f}" for e in eq)
    ok = record(9, "spin j-scaling", ok, f"W {w_txt}; stripped Q {q_txt}; {dt:.1f} s")
    assert ok


def test_symbol_round_trips(record):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        terms = {}
        for _ in range(rng.integers(1, 10)):
            m = int(rng.integers(0, 7))
            n = int(rng.integers(0, 7 - m))
            terms[(m, n)] = complex(rng.normal(), rng.normal())
        p = SymbolPolynomial(terms, Rep.P)
        back = p
        for rep in (Rep.W, Rep.Q, Rep.W, Rep.P):
            back = convert_symbol(back, rep)
        keys = set(p.terms) | set(back.terms)
        worst = max(worst, max(abs(back.terms.get(k, 0) - p.terms.get(k, 0)) for k in keys))
    oracle = 0.0
    for _ in range(6):
        terms = {}
        for _ in range(6):
            m = int(rng.integers(0, 4))
            n = int(rng.integers(0, 4))
            terms[(m, n)] = complex(rng.normal(), rng.normal())
        op = NormalOrderedOperator(terms)
        hw = symbol_of_operator(op, Rep.W)
        for _ in range(3):
            zb, z = rng.uniform(-1.2, 1.2, 2) + 1j * rng.uniform(-1.2, 1.2, 2)
            pt = PhasePoint(zb, z)
            ref = weyl_kernel_trace_oracle(op, pt)
            oracle = max(oracle, abs(ref - eval_symbol(hw, pt)) / max(1.0, abs(ref)))
    ok = record(10, "symbol round trips", worst < 1e-12 and oracle < 1e-8, f"round trip {worst:.1e}, kernel oracle {oracle:.1e}")
    assert ok


def test_alternating_scheme_limit(record):
    lim = continuum_limit(Scheme.ALT, KERR, Z_KERR, Z_KERR, T_KERR)
    errs = []
    for M in (128, 256):
        k = discrete_report(Scheme.ALT, KERR, Z_KERR, Z_KERR, T_KERR, M).kRed
        errs.append(abs(k - lim.K_red) / abs(lim.K_red))
    ratio = errs[0] / errs[1]
    ok = errs[1] < 5e-2 and 1.5 <= ratio <= 2.5
    ok = record(11, "alternating scheme", ok, f"rel error M=256 {errs[1]:.4f}, halving ratio {ratio:.3f}")
    assert ok


def test_weyl_slice_saddle(record):
    ratio = saddle_error_ratio(KERR, 0.9 - 0.2j, 1.1 + 0.3j, 0.02)
    ok = record(12, "Weyl slice saddle", abs(ratio - 4) <= 0.8, f"error ratio {ratio:.3f}")
    assert ok
