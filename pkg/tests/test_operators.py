import random
from fractions import Fraction as F

import pytest

from hodgekp.algebra import HbarPoly, TPoly, ZSeries, double_factorial
from hodgekp.curve import CurveParams, CurveSeries, witt_coefficients
from hodgekp.operators import (
    LinearOp,
    big_t_to_odd_t,
    couplings_from_log_r,
    exp_apply,
    givental_direct,
    givental_factorized,
    heisenberg_apply,
    heisenberg_op,
    linear_change_generator,
    odd_t_to_big_t,
    operator_equality_check,
    rl_identity_check,
    tqp_forms,
    tqp_forms_symbolic,
    translation_op,
    transformed_variable_images,
    virasoro_apply,
    virasoro_conjugation_check,
    virasoro_factorization_check,
    virasoro_op,
    virasoro_sum_op,
    w_apply,
    w_op,
    weight_monomials,
)
from hodgekp.curve import log_r_series, r_series

from conftest import random_tpoly


def t(k, w=9):
    return TPoly.variable("t", k, w)


def T(m, w=9):
    return TPoly.variable("T", m, w)


class TestVirasoroModes:
    def test_scaling_eigenvector(self):
        assert virasoro_apply(0, t(1)) == t(1)

    def test_lowering_mode(self):
        got = virasoro_apply(-2, t(1))
        expect = (t(1) * t(1) * t(1)).scale(F(1, 2)) + t(3, 9).scale(3)
        assert got == expect

    def test_raising_mode_on_product(self):
        assert virasoro_apply(2, t(1) * t(3)) == t(1) * t(1)

    def test_raising_mode_oracle(self):
        # brute-force differentiation of the displayed formula
        rng = random.Random(41)
        W = 8
        for m in (1, 2, 3):
            P = random_tpoly(rng, "t", W)
            expect = TPoly.zero("t", W)
            for k in range(1, W + 1):
                if k + m <= W:
                    expect = expect + P.diff(k + m).mul_var(k, F(k))
            for a in range(1, m):
                b = m - a
                expect = expect + P.diff(a).diff(b).scale(F(1, 2))
            assert virasoro_apply(m, P) == expect

    def test_rejects_big_t_side(self):
        with pytest.raises(ValueError):
            virasoro_apply(1, T(1))


class TestHeisenbergModes:
    def test_derivative_mode(self):
        assert heisenberg_apply(3, t(3)) == TPoly.one("t", 9)

    def test_multiplication_mode(self):
        assert heisenberg_apply(-2, TPoly.one("t", 9)) == t(2).scale(2)

    def test_zero_mode_is_callers_bug(self):
        with pytest.raises(ValueError):
            heisenberg_apply(0, t(1))

    def test_commutator_is_central(self):
        rng = random.Random(43)
        for k in (1, 2, 3):
            # ambient lift so the raising mode never overflows the cap
            P = random_tpoly(rng, "t", 8, cap=8 + k)
            J = lambda Q, i: heisenberg_op(i, Q.max_weight).apply(Q)
            lhs = J(J(P, -k), k) - J(J(P, k), -k)
            assert lhs == P.scale(k)


def _lift(i):
    return max(0, -i)


class TestCommutatorSuites:
    """The algebra relations, checked on random inputs with an ambient
    weight lift so no intermediate truncation occurs."""

    def test_virasoro_virasoro(self):
        rng = random.Random(47)
        W = 8
        for k in range(-3, 4):
            for m in range(-3, 4):
                amb = W + _lift(k) + _lift(m) + _lift(k + m)
                P = random_tpoly(rng, "t", W, cap=amb)
                L = lambda Q, i: virasoro_op(i, Q.max_weight).apply(Q)
                lhs = L(L(P, m), k) - L(L(P, k), m)
                rhs = L(P, k + m).scale(F(k - m))
                if k + m == 0:
                    rhs = rhs + P.scale(F(k**3 - k, 12))
                assert lhs == rhs, (k, m)

    def test_virasoro_heisenberg(self):
        rng = random.Random(53)
        W = 8
        for k in range(-3, 4):
            for m in (-3, -2, -1, 1, 2, 3):
                amb = W + _lift(k) + _lift(m) + _lift(k + m)
                P = random_tpoly(rng, "t", W, cap=amb)
                L = lambda Q, i: virasoro_op(i, Q.max_weight).apply(Q)
                J = lambda Q, i: heisenberg_op(i, Q.max_weight).apply(Q)
                lhs = L(J(P, m), k) - J(L(P, k), m)
                if k + m == 0:
                    rhs = TPoly.zero("t", amb)
                else:
                    rhs = J(P, k + m).scale(F(-m))
                assert lhs == rhs, (k, m)

    def test_w_generators_commute(self):
        rng = random.Random(59)
        for k in (1, 2):
            for m in (1, 2):
                P = random_tpoly(rng, "T", 9)
                lhs = w_apply(k, w_apply(m, P)) - w_apply(m, w_apply(k, P))
                assert lhs.is_zero(), (k, m)


class TestWGenerators:
    def test_kills_lowest_variable(self):
        assert w_apply(1, T(0)).is_zero()

    def test_action_on_t1(self):
        assert w_apply(1, T(1)) == -T(0)

    def test_action_on_t0_squared(self):
        assert w_apply(1, T(0) * T(0)) == TPoly.one("T", 9)

    def test_brute_force_oracle(self):
        # independent construction straight from the displayed formula
        rng = random.Random(61)
        W = 9
        M = (W - 1) // 2
        for k in (1, 2):
            for shift, dil_index in (("kw", 1), ("bgw", 0)):
                P = random_tpoly(rng, "T", W)
                expect = TPoly.zero("T", W)
                for m in range(0, M + 1):
                    if m + 2 * k - 1 <= M:
                        expect = expect - P.diff(m + 2 * k - 1).mul_var(m)
                if dil_index + 2 * k - 1 <= M:
                    expect = expect + P.diff(dil_index + 2 * k - 1).scale(
                        HbarPoly.hbar(-1)
                    )
                for m in range(0, 2 * k - 1):
                    b = 2 * k - 2 - m
                    if m <= M and b <= M:
                        expect = expect + P.diff(m).diff(b).scale(F((-1) ** m, 2))
                assert w_op(k, W, shift).apply(P) == expect, (k, shift)

    def test_lower_triangular_rejected(self):
        with pytest.raises(ValueError):
            w_apply(0, T(0))

    def test_weight_drop_bound(self):
        assert w_op(1, 9).min_weight_drop >= 2
        assert w_op(2, 13).min_weight_drop >= 6


class TestExponentials:
    def test_exp_zero_is_identity(self):
        P = t(1) * t(2)
        assert exp_apply(LinearOp("t"), P) == P

    def test_exp_inverse(self):
        rng = random.Random(67)
        a1 = F(3, 5)
        op = virasoro_sum_op([a1], 9)
        for _ in range(5):
            P = random_tpoly(rng, "t", 9)
            assert exp_apply(op, exp_apply(op.scale(-1), P)) == P

    def test_translation_matches_substitution(self):
        rng = random.Random(71)
        shifts = {1: F(1, 2), 3: F(-2, 3), 4: F(5)}
        op = translation_op({k: HbarPoly.const(c) for k, c in shifts.items()}, 9, "t")
        for _ in range(5):
            P = random_tpoly(rng, "t", 9)
            images = {
                v: TPoly.variable("t", v, 9) + TPoly.constant(shifts.get(v, 0), "t", 9)
                for v in P.variables()
            }
            expect = P.substitute(images) if P.variables() else P
            assert exp_apply(op, P) == expect

    def test_nonnilpotent_rejected(self):
        op = LinearOp.from_terms("t", [("m", 1, F(1))])
        with pytest.raises(ValueError, match="terminate"):
            exp_apply(op, t(1))


class TestGiventalAction:
    def test_zero_couplings_identity(self):
        rng = random.Random(73)
        P = random_tpoly(rng, "T", 9)
        assert givental_direct({}, P) == P

    def test_exponential_series_oracle(self):
        # termwise Horner evaluation of exp(c W_1), independent of exp_apply
        rng = random.Random(79)
        for c in (F(1), F(1, 2), F(-2, 3)):
            P = random_tpoly(rng, "T", 9)
            expect = TPoly.zero("T", 9)
            term = P
            n = 0
            while not term.is_zero():
                expect = expect + term
                n += 1
                term = w_apply(1, term).scale(F(c, n))
            assert givental_direct({1: c}, P) == expect

    def test_factorized_identity_for_trivial_r(self):
        rng = random.Random(83)
        P = random_tpoly(rng, "T", 9)
        assert givental_factorized(ZSeries.one(12), P) == P

    @pytest.mark.parametrize("q,p,s", [(1, 3, 2), (-1, 2, 1)], ids=["(1,3,2)", "(-1,2,1)"])
    def test_direct_equals_factorized_on_basis(self, q, p, s):
        W = 9
        par = CurveParams(F(q), F(p), F(s))
        order = 2 * ((W - 1) // 2 + 1)
        R = r_series(par, order)
        couplings = couplings_from_log_r(log_r_series(par, order), W)
        for mono in weight_monomials("T", W):
            P = TPoly("T", W, {mono: 1})
            assert givental_direct(couplings, P) == givental_factorized(R, P), mono

    def test_theta_mode_on_constant(self):
        par = CurveParams(F(1), F(3), F(2))
        R = r_series(par, 10)
        P = TPoly.one("T", 9)
        couplings = couplings_from_log_r(log_r_series(par, 10), 9)
        assert givental_factorized(R, P, "theta") == givental_direct(couplings, P, "bgw")

    def test_mumford_couplings_match_miwa(self):
        # B_{2k}/(2k)! * s_k with the Miwa weights (-p, -q, pq/(p+q))
        # reproduces the odd-log coefficients exactly
        from hodgekp.curve import bernoulli

        for par in (CurveParams(F(1), F(3), F(2)), CurveParams(F(3), F(1), F(2))):
            logR = log_r_series(par, 11)
            u = (-par.p, -par.q, par.p * par.q / (par.p + par.q))
            for k in (1, 2, 3):
                sk = _factorial(2 * k - 2) * sum(x ** (2 * k - 1) for x in u)
                ck = bernoulli(2 * k) / _factorial(2 * k) * sk
                assert ck == logR.coeff(2 * k - 1), k

    def test_affine_images_carry_translation_constants(self):
        par = CurveParams(F(1), F(3), F(2))
        R = r_series(par, 10)
        rb = R.subs_neg()
        images = transformed_variable_images(R, 9, "standard")
        assert images[0] == T(0)
        # k=2 image: sum rb_{2-m} T_m + hbar^{-1} delta_2 with delta_2 = -rb_1
        expect = T(2) + T(1).scale(rb.coeff(1)) + T(0).scale(rb.coeff(2)) + TPoly.constant(
            HbarPoly.hbar(-1, -rb.coeff(1)), "T", 9
        )
        assert images[2] == expect


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


class TestChangeOfVariables:
    def test_lowest_form(self):
        par = CurveParams(F(1), F(3), F(2))
        forms = tqp_forms(par, 2, 9)
        assert forms[0] == t(1)

    def test_first_form_generic(self):
        for q, p, s in [(1, 3, 2), (3, 1, 2), (-1, 2, 1)]:
            par = CurveParams(F(q), F(p), F(s))
            forms = tqp_forms(par, 1, 9)
            expect = (
                t(1).scale(par.q)
                + t(2).scale(2 * (2 * par.q + par.p) / par.s)
                + t(3).scale(3)
            )
            assert forms[1] == expect

    def test_first_form_132(self):
        forms = tqp_forms(CurveParams(F(1), F(3), F(2)), 1, 9)
        assert forms[1] == t(1) + t(2).scale(5) + t(3).scale(3)

    def test_symbol_calculus_cross_check(self):
        for q, p, s in [(1, 3, 2), (-1, 2, 1), (0, 4, 2)]:
            par = CurveParams(F(q), F(p), F(s))
            assert tqp_forms(par, 4, 11) == tqp_forms_symbolic(par, 4, 11)

    def test_parity_preserved_at_reduction_locus(self):
        par = CurveParams(F(-1), F(2), F(1))  # p = -2q
        for form in tqp_forms(par, 3, 9):
            assert all(v % 2 == 1 for mono in form.terms for v, _ in mono)

    def test_forms_stay_linear(self):
        for form in tqp_forms(CurveParams(F(1), F(3), F(2)), 4, 11):
            assert form.is_linear()


class TestVariableRelabeling:
    def test_round_trip(self):
        rng = random.Random(89)
        P = random_tpoly(rng, "T", 9)
        assert odd_t_to_big_t(big_t_to_odd_t(P)) == P

    def test_scaling(self):
        assert big_t_to_odd_t(T(1)) == t(3).scale(3)
        assert odd_t_to_big_t(t(5)) == T(2).scale(F(1, 15))

    def test_even_variables_rejected(self):
        with pytest.raises(ValueError, match="even"):
            odd_t_to_big_t(t(2))


class TestEqualityHarness:
    def test_identity_vs_identity(self):
        basis = [TPoly("t", 6, {m: 1}) for m in weight_monomials("t", 6)]
        rep = operator_equality_check(lambda P: P, lambda P: P, basis, "id")
        assert rep.passed and rep.checked == len(basis)

    def test_detects_difference(self):
        basis = [t(1, 6)]
        rep = operator_equality_check(lambda P: P, lambda P: P.scale(2), basis, "x2")
        assert not rep.passed


class TestFactorizationOfGroupElement:
    def test_grunsky_kernel_factorization(self, curve132):
        rep = virasoro_factorization_check(curve132, 6)
        assert rep.passed


def _trivial_flow_curve(K):
    zK = ZSeries.z(K)
    x = ZSeries.from_terms({2: F(1, 2)}, K)
    return CurveSeries(None, K, x, zK, zK, zK, ZSeries.one(K), ZSeries.one(K),
                       ZSeries.zero(K), ZSeries.one(K // 2))


class TestConjugation:
    def test_trivial_curve_all_modes(self):
        rep = virasoro_conjugation_check(_trivial_flow_curve(14), 4)
        assert rep.passed

    def test_catalog_point(self, curve132):
        rep = virasoro_conjugation_check(curve132, 5)
        assert rep.passed

    def test_flipped_sign_fails_first_order(self, curve132):
        rep = virasoro_conjugation_check(curve132, 5, modes=[1], flip_sign=True)
        assert not rep.passed


class TestShiftTransport:
    """Conjugating the t-side translation vectors by the linear-change
    element reproduces the dilaton-shift translations in the embedded
    variables, for both shift conventions."""

    @pytest.mark.parametrize("mode", ["standard", "theta"])
    def test_translation_conjugation(self, curve132, mode):
        from hodgekp.curve import shift_data

        W = 7
        a = witt_coefficients(curve132.f.truncate(W + 1)).a
        sd = shift_data(curve132, check_moments=False)
        gen = linear_change_generator(a, W)
        src = sd.v if mode == "standard" else sd.v0
        dst = sd.delta if mode == "standard" else sd.delta0
        rhs = translation_op(
            {
                2 * k + 1: F(c, double_factorial(2 * k + 1))
                for k, c in dst.items()
                if 2 * k + 1 <= W
            },
            W,
            "t",
        )
        trans = translation_op({k: HbarPoly.const(c) for k, c in src.items()}, W, "t")
        for mono in weight_monomials("t", W, odd_only=True):
            P = TPoly("t", W, {mono: 1})
            lhs = exp_apply(gen.scale(-1), trans.apply(exp_apply(gen, P)))
            assert lhs == rhs.apply(P), mono


class TestOperatorIdentification:
    def test_basis_identity_small(self, curve132):
        rep = rl_identity_check(curve132, 7)
        assert rep.passed and rep.checked == len(weight_monomials("t", 7, odd_only=True))

    def test_mismatched_translation_detected(self, curve132):
        # sanity of the harness: breaking the translation must fail
        from hodgekp.curve import shift_data
        from hodgekp.operators import rl_transform_quantized

        W = 7
        basis = [TPoly("t", W, {((5, 1),): 1})]
        rep = operator_equality_check(
            lambda P: rl_transform_quantized(curve132, P, W),
            lambda P: P,
            basis,
            "broken",
        )
        assert not rep.passed
