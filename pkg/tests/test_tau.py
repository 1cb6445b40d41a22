from fractions import Fraction as F

import pytest

from hodgekp.algebra import HbarPoly, TPoly, mono_weight
from hodgekp.curve import CurveParams
from hodgekp.operators import odd_t_to_big_t
from hodgekp.tau import (
    bgw_tau,
    hodge_partition,
    kw_tau,
    psi_correlator,
    tau_qp_check,
    tau_qp_theta_check,
    theta_correlator,
    tp_exp,
    trust_band,
)


class TestPsiCorrelators:
    def test_seeds(self):
        assert psi_correlator(0, (0, 0, 0)) == 1
        assert psi_correlator(1, (1,)) == F(1, 24)

    def test_genus_zero(self):
        assert psi_correlator(0, (1, 0, 0, 0)) == 1
        assert psi_correlator(0, (2, 0, 0, 0, 0)) == 1
        assert psi_correlator(0, (1, 1, 0, 0, 0)) == 2

    def test_genus_one(self):
        assert psi_correlator(1, (2, 0)) == F(1, 24)
        assert psi_correlator(1, (1, 1)) == F(1, 24)
        assert psi_correlator(1, (2, 1, 0)) == F(1, 12)
        assert psi_correlator(1, (1, 1, 1)) == F(1, 12)

    def test_genus_two(self):
        assert psi_correlator(2, (4,)) == F(1, 1152)
        assert psi_correlator(2, (5, 0)) == F(1, 1152)
        assert psi_correlator(2, (4, 1)) == F(1, 384)
        assert psi_correlator(2, (3, 2)) == F(29, 5760)
        assert psi_correlator(2, (7,)) == 0  # dimension mismatch

    def test_unstable_vanish(self):
        assert psi_correlator(0, (0, 0)) == 0
        assert psi_correlator(0, ()) == 0


class TestThetaCorrelators:
    def test_base(self):
        assert theta_correlator(1, (0,)) == F(1, 8)

    def test_genus_one_strings(self):
        # <Theta tau_0^n>_1 = (n-1)!/8
        assert theta_correlator(1, (0, 0)) == F(1, 8)
        assert theta_correlator(1, (0, 0, 0)) == F(2, 8)
        assert theta_correlator(1, (0, 0, 0, 0)) == F(6, 8)

    def test_genus_two(self):
        assert theta_correlator(2, (1,)) == F(3, 128)

    def test_dimension_gate(self):
        assert theta_correlator(2, (0,)) == 0
        assert theta_correlator(0, (0, 0, 0)) == 0


class TestBaseTaus:
    def test_kw_lowest_coefficients(self):
        body = kw_tau(12).body
        assert body.constant_term() == HbarPoly.one()
        assert body.coeff(((1, 3),)) == HbarPoly.hbar(1, F(1, 6))
        assert body.coeff(((3, 1),)) == HbarPoly.hbar(1, F(1, 8))

    def test_kw_dimension_constraint(self):
        body = kw_tau(12).body
        for mono, c in body.terms.items():
            w = mono_weight("t", mono)
            assert w % 3 == 0
            assert set(c.exponents()) == ({w // 3} if mono else {0})
            assert all(v % 2 == 1 for v, _ in mono)

    def test_bgw_lowest_coefficient(self):
        body = bgw_tau(10).body
        assert body.coeff(((1, 1),)) == HbarPoly.hbar(1, F(1, 8))

    def test_bgw_grading(self):
        body = bgw_tau(10).body
        for mono, c in body.terms.items():
            w = mono_weight("t", mono)
            assert set(c.exponents()) == ({w} if mono else {0})
            assert all(v % 2 == 1 for v, _ in mono)

    def test_minimum_weights_enforced(self):
        with pytest.raises(ValueError):
            kw_tau(2)
        with pytest.raises(ValueError):
            bgw_tau(0)

    def test_tp_exp_inverts_constant_free(self):
        body = kw_tau(6).body
        # exp of a log: reconstruct via multiplication
        F_part = body - TPoly.one("t", 6)
        # crude check: exp(log-truncation) of the quadratic-free part matches
        assert tp_exp(TPoly.zero("t", 6)) == TPoly.one("t", 6)
        with pytest.raises(ValueError):
            tp_exp(TPoly.one("t", 6))


def _constraint_op(n, W, dilaton_index, extras=()):
    """The reduced-hierarchy constraint mode L_n on hbar-stripped series:
    (1/2) sum_{k odd} k t_k d_{k+2n} - (1/2) d_{dil+2n}
    + (1/4) sum_{a+b=2n, odd} d_a d_b + optional inhomogeneous parts."""
    from hodgekp.operators import LinearOp

    items = []
    for k in range(1, W + 1, 2):
        if 1 <= k + 2 * n <= W:
            items.append(("md", k, k + 2 * n, F(k, 2)))
    di = dilaton_index + 2 * n
    if 1 <= di <= W:
        items.append(("d", di, F(-1, 2)))
    if n >= 1:
        for a in range(1, 2 * n, 2):
            b = 2 * n - a
            if a <= b <= W:
                items.append(("dd", a, b, F(1, 2) if a != b else F(1, 4)))
    items.extend(extras)
    return LinearOp.from_terms("t", items)


class TestConstraintResiduals:
    """The generated tau-functions annihilate their constraint modes as
    output-level polynomial identities; this validates the generators
    through a different functional form than the recursion they used."""

    def test_psi_tau_constraints(self):
        from hodgekp.kp import hbar_weight_strip

        W = 12
        tau = hbar_weight_strip(kw_tau(W).body, 1, 3)
        for n in (-1, 0, 1, 2):
            extras = []
            if n == -1:
                extras.append(("mm", 1, 1, F(1, 4)))
            if n == 0:
                extras.append(("id", F(1, 16)))
            res = _constraint_op(n, W, 3, extras).apply(tau)
            covered = W - max(3 + 2 * n, 0)
            for mono, c in res.terms.items():
                assert mono_weight("t", mono) > covered, (n, mono, c)

    def test_theta_tau_constraints(self):
        from hodgekp.kp import hbar_weight_strip

        W = 10
        tau = hbar_weight_strip(bgw_tau(W).body, 1, 1)
        for n in (0, 1, 2):
            extras = [("id", F(1, 16))] if n == 0 else []
            res = _constraint_op(n, W, 1, extras).apply(tau)
            covered = W - (1 + 2 * n)
            for mono, c in res.terms.items():
                assert mono_weight("t", mono) > covered, (n, mono, c)


class TestHodgePartition:
    def test_zero_couplings_identity(self):
        # the trivial degeneration: no couplings, action is the identity
        from hodgekp.operators import givental_direct

        base = odd_t_to_big_t(kw_tau(9).body)
        assert givental_direct({}, base) == base

    def test_pipelines_agree_and_leading_data(self, p132):
        Z = hodge_partition(p132, 9)
        su = -p132.p - p132.q + p132.p * p132.q / (p132.p + p132.q)
        # the hbar^1 component of the T0 coefficient (higher hbar powers
        # are out-of-band tails of the weight truncation)
        assert Z.body.coeff(((0, 1),)).coeff(1) == su / 24

    def test_p_q_symmetry(self):
        a = hodge_partition(CurveParams(F(0), F(4), F(2)), 8)
        b = hodge_partition(CurveParams(F(4), F(0), F(2)), 8)
        assert a.body == b.body

    def test_theta_mode(self, p132):
        Z = hodge_partition(p132, 7, mode="theta")
        assert Z.body.constant_term().coeff(0) == 1


class TestTauQpIdentity:
    @pytest.mark.parametrize(
        "q,p,s",
        [(1, 3, 2), (-1, 2, 1), (0, 4, 2), (4, 0, 2), (3, 1, 2), (1, 3, -2)],
        ids=["(1,3,2)", "(-1,2,1)", "(0,4,2)", "(4,0,2)", "(3,1,2)", "negative-root"],
    )
    def test_two_routes_agree(self, q, p, s):
        rep = tau_qp_check(CurveParams(F(q), F(p), F(s)), 7)
        assert rep.equal

    @pytest.mark.parametrize(
        "q,p,s",
        [(1, 3, 2), (-1, 2, 1), (1, 3, -2)],
        ids=["(1,3,2)", "(-1,2,1)", "negative-root"],
    )
    def test_theta_routes_agree(self, q, p, s):
        rep = tau_qp_theta_check(CurveParams(F(q), F(p), F(s)), 6)
        assert rep.equal

    def test_reduction_point_has_no_even_times(self):
        rep = tau_qp_check(CurveParams(F(-1), F(2), F(1)), 7)
        assert all(
            v % 2 == 1 for mono in rep.tau.body.terms for v, _ in mono
        )

    def test_generic_point_has_even_times(self):
        rep = tau_qp_check(CurveParams(F(1), F(3), F(2)), 7)
        assert any(
            v % 2 == 0 for mono in rep.tau.body.terms for v, _ in mono
        )

    def test_trust_band_lookup(self):
        assert trust_band("tau_qp") == (12, 3)
        assert trust_band("tau_theta_qp") == (2, 1)

    def test_graded_coefficients_stable_under_weight_growth(self):
        # the exactness band: graded coefficients with 12e <= W + 3v must
        # not change when the construction weight grows
        par = CurveParams(F(1), F(3), F(2))
        t7 = tau_qp_check(par, 7).tau.body
        t9 = tau_qp_check(par, 9).tau.body
        a, b = trust_band("tau_qp")
        checked = 0
        for mono, c in t7.terms.items():
            v = mono_weight("t", mono)
            for e in c.exponents():
                if a * e <= 7 + b * v:
                    checked += 1
                    assert t9.coeff(mono).coeff(e) == c.coeff(e), (mono, e)
        assert checked >= 5
