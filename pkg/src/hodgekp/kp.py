"""Exact bilinear-identity verification for truncated tau-functions.

The generating bilinear identity is expanded through elementary Schur
polynomials; every coefficient of an auxiliary y-monomial gives one
bilinear equation in the Hirota symbols, which is evaluated exactly by
the two-copy polynomial shift.  A "pass" always means: every residual
coefficient inside the stated weight budget vanishes exactly.  Nothing
asymptotic is ever claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (
    HbarPoly,
    Mono,
    TPoly,
    T_SIDE,
    mono_mul,
    mono_str,
    mono_weight,
    rat_str,
)

__all__ = [
    "specialize_hbar",
    "hbar_weight_strip",
    "HirotaReport",
    "hirota_first_equation",
    "hirota_full_check",
    "hirota_graded_check",
    "kdv_reduction_check",
    "EvenTimeReport",
]


def specialize_hbar(P: TPoly, value) -> TPoly:
    """Evaluate every coefficient at a fixed rational hbar, exactly."""
    value = Fraction(value) if not isinstance(value, Fraction) else value
    return P.map_coeffs(lambda c: HbarPoly.const(c.at(value)))


def hbar_weight_strip(P: TPoly, num: int, den: int) -> TPoly:
    """Remove an hbar-grading of slope num/den (exponent = weight*num/den).

    This is the exact form of absorbing hbar by a fractional-power time
    rescaling; it requires every monomial to carry exactly the graded
    power and errors otherwise.
    """
    out = {}
    for mono, c in P.terms.items():
        w = mono_weight(P.kind, mono)
        if (w * num) % den:
            raise ValueError(f"weight {w} is not compatible with grading {num}/{den}")
        e = w * num // den
        if set(c.terms) - {e}:
            raise ValueError(f"monomial {mono_str(P.kind, mono)} is not hbar-graded")
        if c.coeff(e):
            out[mono] = HbarPoly.const(c.coeff(e))
    res = TPoly(P.kind, P.max_weight)
    res.terms = out
    return res


# ---------------------------------------------------------------------------
# Hirota machinery
# ---------------------------------------------------------------------------


def _require_specialized(tau: TPoly):
    for c in tau.terms.values():
        if set(c.terms) - {0}:
            raise ValueError("hbar must be specialized before a bilinear check")


def _scaled_derivatives(tau: TPoly, dmax: int) -> dict[Mono, TPoly]:
    """All d^gamma tau / gamma! for D-multi-indices of weight <= dmax."""
    from .operators import weight_monomials

    out: dict[Mono, TPoly] = {(): tau}
    for gamma in weight_monomials(T_SIDE, dmax):
        if gamma == ():
            continue
        # peel one derivative off the last variable entry
        v, e = gamma[-1]
        prev = gamma[:-1] + ((v, e - 1),) if e > 1 else gamma[:-1]
        out[gamma] = out[prev].diff(v).scale(Fraction(1, e))
    return out


def _bilinear_pair(derivs: dict[Mono, TPoly], gamma: Mono) -> TPoly:
    """D^gamma tau . tau evaluated by the exact two-copy expansion."""
    some = derivs[()]
    acc = TPoly.zero(some.kind, some.max_weight)
    gamma_dict = dict(gamma)
    gfact = 1
    for _, e in gamma_dict.items():
        gfact *= math.factorial(e)
    size = sum(gamma_dict.values())

    def rec(vars_left: list, beta: list):
        nonlocal acc
        if not vars_left:
            b = tuple((v, e) for v, e in beta if e)
            d = tuple((v, gamma_dict[v] - dict(beta).get(v, 0)) for v in gamma_dict)
            d = tuple((v, e) for v, e in d if e)
            blen = sum(e for _, e in b)
            sign = -1 if (size - blen) % 2 else 1
            acc = acc + (derivs[b] * derivs[d]).scale(Fraction(sign * gfact))
            return
        v = vars_left[0]
        for e in range(gamma_dict[v] + 1):
            rec(vars_left[1:], beta + [(v, e)])

    rec(sorted(gamma_dict), [])
    return acc


def _schur_polys(top: int) -> list[dict[Mono, Fraction]]:
    """Elementary Schur polynomials p_0..p_top: exp(sum x_k z^k) = sum p_j z^j."""
    polys: list[dict[Mono, Fraction]] = [{(): Fraction(1)}]
    for j in range(1, top + 1):
        acc: dict[Mono, Fraction] = {}
        for r in range(1, j + 1):
            for mono, c in polys[j - r].items():
                key = mono_mul(mono, ((r, 1),))
                acc[key] = acc.get(key, Fraction(0)) + Fraction(r) * c
        polys.append({m: c / j for m, c in acc.items() if c})
    return polys


def _poly_sub_scale(poly: dict[Mono, Fraction], factor) -> dict[Mono, Fraction]:
    """Substitute x_r -> factor(r) * x_r in a Schur-type polynomial."""
    out = {}
    for mono, c in poly.items():
        for v, e in mono:
            c = c * factor(v) ** e
        if c:
            out[mono] = c
    return out


def hirota_equation_table(y_weight: int) -> list[tuple[Mono, dict[Mono, Fraction]]]:
    """Bilinear equations indexed by y-monomials of weight <= y_weight.

    Coefficient extraction of
        sum_j p_j(-2y) p_{j+1}(Dtilde) exp(sum_r y_r D_r)
    with Dtilde_r = D_r / r.  Each equation is homogeneous of D-weight
    (weight of its y-monomial) + 1.
    """
    from .operators import weight_monomials

    schur = _schur_polys(y_weight + 1)
    table: dict[Mono, dict[Mono, Fraction]] = {}
    y_monos = weight_monomials(T_SIDE, y_weight)
    for j in range(0, y_weight + 1):
        pj_y = _poly_sub_scale(schur[j], lambda r: Fraction(-2))
        pD = _poly_sub_scale(schur[j + 1], lambda r: Fraction(1, r))
        for nu, c_nu in pj_y.items():
            for mu in y_monos:
                if mono_weight(T_SIDE, nu) + mono_weight(T_SIDE, mu) > y_weight:
                    continue
                alpha = mono_mul(nu, mu)
                mufact = 1
                for _, e in mu:
                    mufact *= math.factorial(e)
                eq = table.setdefault(alpha, {})
                for dmono, c in pD.items():
                    key = mono_mul(dmono, mu)
                    val = eq.get(key, Fraction(0)) + c_nu * c / mufact
                    if val:
                        eq[key] = val
                    else:
                        eq.pop(key, None)
    return sorted(table.items(), key=lambda kv: (mono_weight(T_SIDE, kv[0]), kv[0]))


@dataclass
class EquationStatus:
    label: str
    covered_weight: int
    status: str

    def to_json_obj(self):
        return {
            "label": self.label,
            "maxResidualWeightChecked": self.covered_weight,
            "status": self.status,
        }


@dataclass
class HirotaReport:
    """Result of an exact bilinear check at one fixed hbar value."""

    check: str
    checked_weight: int
    hbar_value: str | None = None
    y_weight: int | None = None
    equations: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_obj(self) -> dict:
        return {
            "check": self.check,
            "hbar": self.hbar_value,
            "yWeight": self.y_weight,
            "coveredWeight": min((e.covered_weight for e in self.equations), default=-1),
            "status": "pass" if self.passed else "fail",
            "failures": self.failures[:20],
            "equations": [e.to_json_obj() for e in self.equations],
        }


def _run_equations(
    tau: TPoly, equations, check_name: str, y_weight: int | None, hbar_label: str | None
) -> HirotaReport:
    _require_specialized(tau)
    W = tau.max_weight
    dmax = max(
        (mono_weight(T_SIDE, g) for _, eq in equations for g in eq), default=0
    )
    derivs = _scaled_derivatives(tau, dmax)
    pair_cache: dict[Mono, TPoly] = {}
    report = HirotaReport(
        check=check_name, checked_weight=W, hbar_value=hbar_label, y_weight=y_weight
    )
    for label_mono, eq in equations:
        dweight = max((mono_weight(T_SIDE, g) for g in eq), default=0)
        covered = W - dweight
        label = "y[" + mono_str(T_SIDE, label_mono).replace("t", "y") + "]" if isinstance(label_mono, tuple) else str(label_mono)
        residual = TPoly.zero(tau.kind, W)
        for gamma, c in sorted(eq.items()):
            if gamma not in pair_cache:
                pair_cache[gamma] = _bilinear_pair(derivs, gamma)
            residual = residual + pair_cache[gamma].scale(c)
        bad = [
            (mono, c)
            for mono, c in residual.sorted_terms()
            if mono_weight(tau.kind, mono) <= covered
        ]
        status = "pass" if not bad else "fail"
        if covered < 0:
            status = "skipped"
        report.equations.append(EquationStatus(label, covered, status))
        for mono, c in bad:
            report.failures.append(
                {
                    "equation": label,
                    "monomial": mono_str(tau.kind, mono),
                    "residual": repr(c),
                }
            )
    return report


def hirota_first_equation(tau: TPoly, hbar_label: str | None = None) -> HirotaReport:
    """The lowest bilinear equation (D_1^4 + 3 D_2^2 - 4 D_1 D_3) tau.tau = 0."""
    eq = {
        ((1, 4),): Fraction(1),
        ((2, 2),): Fraction(3),
        ((1, 1), (3, 1)): Fraction(-4),
    }
    return _run_equations(tau, [("D1^4+3*D2^2-4*D1*D3", eq)], "hirota-first", None, hbar_label)


def hirota_full_check(tau: TPoly, y_weight: int, hbar_label: str | None = None) -> HirotaReport:
    """All bilinear equations from the generating identity, to the stated
    y-weight, each verified on its covered residual range."""
    table = hirota_equation_table(y_weight)
    return _run_equations(tau, table, "hirota-full", y_weight, hbar_label)


def hirota_graded_check(tau: TPoly, y_weight: int, band: tuple[int, int]) -> HirotaReport:
    """Bilinear check for hbar-graded truncations, coefficientwise in hbar.

    A weight-truncated series produced by weight-dropping group elements
    is exact only per (monomial weight v, hbar exponent e) inside a band
    a*e <= W + b*v determined by its construction (the out-of-band part
    keeps changing as the construction weight grows, because the fixed-
    hbar coefficients of the exact object are divergent series).  For the
    residual of an equation of derivative-weight d the sound region is
    a*e <= W + b*(v + d) together with v <= W - d; this check asserts
    exact vanishing there and ignores the rest.  It subsumes the fixed-
    hbar statement for every scalar hbar, coefficientwise.
    """
    a, b = band
    W = tau.max_weight
    table = hirota_equation_table(y_weight)
    dmax = max((mono_weight(T_SIDE, g) for _, eq in table for g in eq), default=0)
    derivs = _scaled_derivatives(tau, dmax)
    pair_cache: dict[Mono, TPoly] = {}
    report = HirotaReport(
        check="hirota-graded",
        checked_weight=W,
        hbar_value=f"graded band {a}e<=W+{b}(v+d)",
        y_weight=y_weight,
    )
    for label_mono, eq in table:
        d = max((mono_weight(T_SIDE, g) for g in eq), default=0)
        covered = W - d
        label = "y[" + mono_str(T_SIDE, label_mono).replace("t", "y") + "]"
        residual = TPoly.zero(tau.kind, W)
        for gamma, c in sorted(eq.items()):
            if gamma not in pair_cache:
                pair_cache[gamma] = _bilinear_pair(derivs, gamma)
            residual = residual + pair_cache[gamma].scale(c)
        bad = []
        for mono, c in residual.sorted_terms():
            v = mono_weight(tau.kind, mono)
            if v > covered:
                continue
            for e in c.exponents():
                if a * e <= W + b * (v + d) and c.coeff(e):
                    bad.append((mono, e, c.coeff(e)))
        status = "pass" if not bad else "fail"
        if covered < 0:
            status = "skipped"
        report.equations.append(EquationStatus(label, covered, status))
        for mono, e, c in bad:
            report.failures.append(
                {
                    "equation": label,
                    "monomial": mono_str(tau.kind, mono),
                    "hbarExponent": e,
                    "residual": rat_str(c),
                }
            )
    return report


@dataclass
class EvenTimeReport:
    """Whether a polynomial is free of even-index time variables."""

    passed: bool
    even_monomials: list

    def to_json_obj(self):
        return {
            "status": "pass" if self.passed else "fail",
            "evenMonomials": self.even_monomials[:20],
        }


def kdv_reduction_check(tau: TPoly) -> EvenTimeReport:
    """Pass iff no monomial contains an even-index variable."""
    if tau.kind != T_SIDE:
        raise ValueError("the even-time check applies to t-side polynomials")
    bad = [
        mono_str(tau.kind, mono)
        for mono, _ in tau.sorted_terms()
        if any(v % 2 == 0 for v, _ in mono)
    ]
    return EvenTimeReport(not bad, bad)
