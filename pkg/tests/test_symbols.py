import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohprop.symbols import (
    NormalOrderedOperator,
    PhasePoint,
    Rep,
    SymbolPolynomial,
    convert_symbol,
    eval_symbol,
    eval_symbol_derivs,
    fock_matrix,
    moyal_square_leading,
    operator_from_p_symbol,
    q_symbol_of_operator,
    symbol_of_operator,
    weyl_kernel_trace_oracle,
    weyl_symbol_of_square,
)

N = NormalOrderedOperator.number()
A = NormalOrderedOperator.annihilation()
AD = NormalOrderedOperator.creation()
ONE = NormalOrderedOperator.identity()

coef = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, max_deg=6, rep=None):
    n = draw(st.integers(1, 6))
    terms = {}
    for _ in range(n):
        m = draw(st.integers(0, max_deg))
        k = draw(st.integers(0, max_deg - m))
        terms[(m, k)] = draw(coef)
    r = rep or draw(st.sampled_from(list(Rep)))
    return SymbolPolynomial(terms, r)


def brute_q_symbol(op, zbar, z, nmax=60):
    """<zbar|op|z> / <zbar|z> from Fock matrices."""
    from scipy.special import gammaln

    n = np.arange(nmax + 1)
    bra = np.exp(n * np.log(complex(zbar)) - 0.5 * gammaln(n + 1.0))
    ket = np.exp(n * np.log(complex(z)) - 0.5 * gammaln(n + 1.0))
    return complex(bra @ fock_matrix(op, nmax) @ ket) / np.exp(zbar * z)


class TestOperators:
    def test_canonical_form_drops_zeros(self):
        op = NormalOrderedOperator({(1, 1): 1.0, (2, 0): 0.0})
        assert dict(op.terms) == {(1, 1): 1.0}

    def test_commutator(self):
        comm = A * AD - AD * A
        assert dict(comm.terms) == {(0, 0): 1.0}

    def test_number_squared(self):
        assert dict((N * N).terms) == {(2, 2): 1.0, (1, 1): 1.0}

    def test_hermitian_predicate(self):
        assert (AD + A).is_hermitian()
        assert not (1j * AD + A).is_hermitian()
        assert (1j * AD - 1j * A).is_hermitian()

    def test_fock_matrix_matches_products(self):
        op = AD * AD * A + 0.3 * A * A
        nm = 12
        a = np.diag(np.sqrt(np.arange(1, nm + 1)), 1)
        ref = a.T @ a.T @ a + 0.3 * a @ a
        got = fock_matrix(op, nm)
        # the truncation only spoils the last rows/columns
        assert np.allclose(got[:-3, :-3], ref[:-3, :-3])


class TestQSymbol:
    def test_number(self):
        assert dict(q_symbol_of_operator(N).terms) == {(1, 1): 1.0}

    def test_identity(self):
        assert dict(q_symbol_of_operator(ONE).terms) == {(0, 0): 1.0}

    def test_number_squared_against_brute_force(self):
        op = N * N
        sym = q_symbol_of_operator(op)
        assert dict(sym.terms) == {(2, 2): 1.0, (1, 1): 1.0}
        for zb, z in [(0.3 + 0.1j, 0.7), (-0.4j, 0.2 - 0.5j)]:
            assert abs(sym(zb, z) - brute_q_symbol(op, zb, z)) < 1e-10


class TestPSymbol:
    def test_zbar_z_is_antinormal(self):
        op = operator_from_p_symbol(SymbolPolynomial({(1, 1): 1.0}, Rep.P))
        assert dict(op.terms) == {(1, 1): 1.0, (0, 0): 1.0}

    def test_constant(self):
        op = operator_from_p_symbol(SymbolPolynomial({(0, 0): 1.0}, Rep.P))
        assert dict(op.terms) == {(0, 0): 1.0}

    def test_round_trip(self):
        x = AD * AD * A * A
        back = operator_from_p_symbol(symbol_of_operator(x, Rep.P))
        assert dict(back.terms) == dict(x.terms)

    def test_rejects_non_p(self):
        with pytest.raises(ValueError):
            operator_from_p_symbol(SymbolPolynomial({(1, 1): 1.0}, Rep.Q))


class TestConversions:
    def test_q_to_w_number(self):
        w = convert_symbol(SymbolPolynomial({(1, 1): 1.0}, Rep.Q), Rep.W)
        assert w.allclose(SymbolPolynomial({(1, 1): 1.0, (0, 0): -0.5}, Rep.W))

    def test_p_to_w_number(self):
        w = convert_symbol(SymbolPolynomial({(1, 1): 1.0}, Rep.P), Rep.W)
        assert w.allclose(SymbolPolynomial({(1, 1): 1.0, (0, 0): 0.5}, Rep.W))

    def test_quartic_chain(self):
        hq = q_symbol_of_operator(N * N)
        hw = convert_symbol(hq, Rep.W)
        # the constants from the first and second smoothing steps cancel
        assert hw.allclose(SymbolPolynomial({(2, 2): 1, (1, 1): -1}, Rep.W))

    @settings(max_examples=60, deadline=None)
    @given(polys())
    def test_round_trip_exact(self, sym):
        others = [r for r in Rep if r != sym.rep]
        back = convert_symbol(convert_symbol(convert_symbol(sym, others[0]), others[1]), sym.rep)
        assert back.allclose(sym, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(polys(max_deg=8, rep=Rep.P))
    def test_chain_consistency(self, sym):
        direct = convert_symbol(sym, Rep.Q)
        via_w = convert_symbol(convert_symbol(sym, Rep.W), Rep.Q)
        assert direct.allclose(via_w, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(polys(max_deg=6, rep=Rep.Q))
    def test_leading_order_in_hbar(self, sym):
        def remainder(h):
            s = SymbolPolynomial(sym.terms, Rep.Q, h)
            w = convert_symbol(s, Rep.W)
            lead = s - s.derivative(1, 1) * (h / 2)
            return SymbolPolynomial(w.terms, Rep.Q, h) - lead

        r1, r2 = remainder(0.02), remainder(0.01)
        # what is left after the first-order term carries hbar^2 or higher
        for k, c in r1.terms.items():
            c2 = r2.terms.get(k, 0j)
            assert abs(c2) <= abs(c) / 3.9 + 1e-14

    def test_hbar_scale(self):
        s = SymbolPolynomial({(1, 1): 1.0}, Rep.Q, hbar=0.1)
        assert convert_symbol(s, Rep.W).allclose(SymbolPolynomial({(1, 1): 1.0, (0, 0): -0.05}, Rep.W, 0.1))

    def test_hermitian_weyl_symbol_is_real(self):
        rng = np.random.default_rng(3)
        base = NormalOrderedOperator({(2, 1): 0.3 + 0.2j, (1, 1): 1.0, (3, 0): 0.1j, (2, 2): 0.05})
        op = base + base.dagger()
        hw = symbol_of_operator(op, Rep.W)
        z = rng.normal(size=20) + 1j * rng.normal(size=20)
        assert np.max(np.abs(hw(np.conj(z), z).imag)) < 1e-12


class TestKernelOracle:
    def test_identity(self):
        for pt in [PhasePoint(0, 0), PhasePoint(0.7 - 0.2j, 0.7 + 0.2j), PhasePoint(1.3j, -0.4)]:
            assert abs(weyl_kernel_trace_oracle(ONE, pt) - 1) < 1e-10

    def test_number_at_origin(self):
        assert abs(weyl_kernel_trace_oracle(N, PhasePoint(0, 0)) + 0.5) < 1e-10

    def test_random_quartics(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            terms = {}
            for m in range(5):
                for n in range(5 - m):
                    if rng.random() < 0.5:
                        terms[(m, n)] = complex(rng.normal(), rng.normal())
            op = NormalOrderedOperator(terms)
            hw = symbol_of_operator(op, Rep.W)
            for _ in range(5):
                zb, z = rng.uniform(-1.4, 1.4, 2) + 1j * rng.uniform(-1.4, 1.4, 2)
                pt = PhasePoint(zb, z)
                ref = weyl_kernel_trace_oracle(op, pt)
                assert abs(ref - eval_symbol(hw, pt)) < 1e-8 * max(1, abs(ref))


class TestEvaluation:
    def test_values(self):
        s = SymbolPolynomial({(1, 1): 1.0}, Rep.Q)
        assert eval_symbol(s, PhasePoint(2, 3j)) == 6j
        assert eval_symbol_derivs(s, PhasePoint(0.3, 4.0), (1, 1)) == 1

    def test_quartic_derivative(self):
        s = SymbolPolynomial({(2, 2): 1.0}, Rep.Q)
        assert eval_symbol_derivs(s, PhasePoint(1, 1), (1, 1)) == 4

    def test_order_limit(self):
        s = SymbolPolynomial({(3, 3): 1.0}, Rep.Q)
        with pytest.raises(ValueError):
            eval_symbol_derivs(s, PhasePoint(1, 1), (3, 2))

    def test_derivs2_matches_derivatives(self):
        s = SymbolPolynomial({(3, 1): 0.5, (2, 2): 1 - 1j, (0, 4): 0.2, (1, 0): 3}, Rep.W)
        zb, z = 0.4 - 0.3j, -0.8 + 0.1j
        got = s.derivs2(zb, z)
        ref = [s.derivative(a, b)(zb, z) for a, b in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))]
        assert np.allclose(got, ref, atol=1e-14)


class TestMoyal:
    def test_number(self):
        exact = weyl_symbol_of_square(N)
        assert exact.allclose(SymbolPolynomial({(2, 2): 1, (1, 1): -1}, Rep.W))
        assert moyal_square_leading(symbol_of_operator(N, Rep.W)).allclose(exact)

    def test_identity(self):
        assert weyl_symbol_of_square(ONE).allclose(SymbolPolynomial({(0, 0): 1}, Rep.W))

    @pytest.mark.parametrize(
        "op",
        [AD + A, 0.7 * N + 0.2 * AD * AD + 0.2 * A * A + 0.1 * A, (0.3 + 0.4j) * AD * AD + ONE],
    )
    def test_quadratics_exact(self, op):
        assert moyal_square_leading(symbol_of_operator(op, Rep.W)).allclose(weyl_symbol_of_square(op), atol=1e-12)

    def test_quartic_leading_order(self):
        # the neglected terms are O(hbar^4): the difference drops by 16 when hbar halves
        op = N * N + 0.3 * AD * A * A
        diffs = []
        for h in (0.1, 0.05):
            hq = SymbolPolynomial(q_symbol_of_operator(op).terms, Rep.Q, h)
            hw = convert_symbol(hq, Rep.W)
            # exact square of the operator with [a, a^dag] = hbar
            sq = SymbolPolynomial(q_symbol_of_operator(_scaled_square(op, h)).terms, Rep.Q, h)
            exact = convert_symbol(sq, Rep.W)
            d = exact - moyal_square_leading(hw)
            diffs.append(max(abs(c) for c in d.terms.values()))
        assert 14 < diffs[0] / diffs[1] < 18


def _scaled_square(op, h):
    """op * op with commutator [a, a^dag] = h."""
    import math

    out = {}
    for (m, n), c1 in op.terms.items():
        for (p, q), c2 in op.terms.items():
            for k in range(min(n, p) + 1):
                w = math.factorial(k) * math.comb(n, k) * math.comb(p, k) * h**k
                key = (m + p - k, n + q - k)
                out[key] = out.get(key, 0j) + w * c1 * c2
    return NormalOrderedOperator(out)
