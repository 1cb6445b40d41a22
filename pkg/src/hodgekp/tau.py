"""Base tau-functions and the derived partition functions.

The psi-class and Theta-class intersection numbers are generated by the
standard Virasoro-constraint recursions (seeded by the classical base
values) and are validated downstream by the independent bilinear-identity
checker rather than trusted.  The expansion convention is topological:
a term with genus g and n insertions carries hbar^(2g-2+n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .algebra import (
    HbarPoly,
    InvariantViolation,
    TPoly,
    T_SIDE,
    double_factorial,
    rat_str,
)
from .curve import (
    CurveParams,
    CurveSeries,
    build_curve,
    log_r_series,
    r_series,
    shift_data,
    witt_coefficients,
)
from .operators import (
    couplings_from_log_r,
    exp_apply,
    givental_direct,
    givental_factorized,
    odd_t_to_big_t,
    translation_op,
    tqp_forms,
    virasoro_sum_op,
)

__all__ = [
    "TauSeries",
    "psi_correlator",
    "theta_correlator",
    "kw_tau",
    "bgw_tau",
    "tp_exp",
    "hodge_partition",
    "TauIdentityReport",
    "tau_qp_check",
    "tau_qp_theta_check",
    "trust_band",
]

# Exactness bands of the weight-truncated products: a coefficient at
# monomial weight v and hbar exponent e is exact iff a*e <= W + b*v.
# The slopes come from the weight-per-grading ratio of the group
# elements (translations by z^k with k >= 4 on the psi side, k >= 2 on
# the Theta side); out-of-band coefficients are partial sums of
# divergent series and keep changing as the construction weight grows.
_TRUST_BANDS = {
    "KW": (0, 0),
    "BGW": (0, 0),
    "HodgeZ": (12, 3),
    "ThetaZ": (2, 1),
    "tau_qp": (12, 3),
    "tau_theta_qp": (2, 1),
}


def trust_band(kind: str) -> tuple[int, int]:
    """Band parameters (a, b) such that hbar-graded coefficients with
    a*e <= W + b*v are exact for a series of the given kind."""
    return _TRUST_BANDS[kind]


# ---------------------------------------------------------------------------
# Intersection-number recursions
# ---------------------------------------------------------------------------


def _sub_multisets(items: tuple):
    """Yield (submultiset, count-of-labelled-choices, complement)."""
    groups = []
    seen = []
    for v in items:
        if v in seen:
            continue
        seen.append(v)
        groups.append((v, items.count(v)))

    def rec(i, chosen, ways):
        if i == len(groups):
            comp = list(items)
            for v in chosen:
                comp.remove(v)
            yield tuple(sorted(chosen, reverse=True)), ways, tuple(
                sorted(comp, reverse=True)
            )
            return
        v, c = groups[i]
        for take in range(c + 1):
            yield from rec(i + 1, chosen + [v] * take, ways * math.comb(c, take))

    yield from rec(0, [], 1)


@lru_cache(maxsize=None)
def psi_correlator(g: int, args: tuple) -> Fraction:
    """<tau_{a_1} ... tau_{a_n}>_g, the psi-class intersection numbers.

    Recursion seeded by <tau_0^3>_0 = 1 and <tau_1>_1 = 1/24; unstable
    or dimensionally impossible correlators vanish.
    """
    args = tuple(sorted(args, reverse=True))
    n = len(args)
    if g < 0 or any(a < 0 for a in args):
        return Fraction(0)
    if 2 * g - 2 + n <= 0:
        return Fraction(0)
    if sum(args) != 3 * g - 3 + n:
        return Fraction(0)
    if g == 0 and args == (0, 0, 0):
        return Fraction(1)
    if g == 1 and args == (1,):
        return Fraction(1, 24)
    a0, rest = args[0], args[1:]
    k = a0 - 1
    total = Fraction(0)
    for j, aj in enumerate(rest):
        moved = tuple(sorted(rest[:j] + (aj + k,) + rest[j + 1 :], reverse=True))
        total += (
            Fraction(double_factorial(2 * aj + 2 * k + 1), double_factorial(2 * aj - 1))
            * psi_correlator(g, moved)
        )
    quad = Fraction(0)
    for i in range(0, k):
        j = k - 1 - i
        fac = double_factorial(2 * i + 1) * double_factorial(2 * j + 1)
        quad += fac * psi_correlator(g - 1, tuple(sorted(rest + (i, j), reverse=True)))
        for g1 in range(0, g + 1):
            g2 = g - g1
            for s1, ways, s2 in _sub_multisets(rest):
                quad += (
                    fac
                    * ways
                    * psi_correlator(g1, tuple(sorted(s1 + (i,), reverse=True)))
                    * psi_correlator(g2, tuple(sorted(s2 + (j,), reverse=True)))
                )
    return (total + quad / 2) / double_factorial(2 * k + 3)


@lru_cache(maxsize=None)
def theta_correlator(g: int, args: tuple) -> Fraction:
    """<Theta tau_{a_1} ... tau_{a_n}>_g, the Theta-class intersection numbers.

    Dimension forces sum(a_i) = g - 1.  The recursion removes the
    largest insertion through the corresponding constraint; the only
    inhomogeneity is the one-point genus-one value 1/8.
    """
    args = tuple(sorted(args, reverse=True))
    n = len(args)
    if g < 1 or any(a < 0 for a in args):
        return Fraction(0)
    if 2 * g - 2 + n <= 0:
        return Fraction(0)
    if sum(args) != g - 1:
        return Fraction(0)
    a0, rest = args[0], args[1:]
    total = Fraction(0)
    for j, aj in enumerate(rest):
        moved = tuple(sorted(rest[:j] + (aj + a0,) + rest[j + 1 :], reverse=True))
        total += (
            Fraction(double_factorial(2 * aj + 2 * a0 + 1), double_factorial(2 * aj - 1))
            * theta_correlator(g, moved)
        )
    quad = Fraction(0)
    for i in range(0, a0):
        j = a0 - 1 - i
        fac = double_factorial(2 * i + 1) * double_factorial(2 * j + 1)
        quad += fac * theta_correlator(g - 1, tuple(sorted(rest + (i, j), reverse=True)))
        for g1 in range(0, g + 1):
            g2 = g - g1
            for s1, ways, s2 in _sub_multisets(rest):
                quad += (
                    fac
                    * ways
                    * theta_correlator(g1, tuple(sorted(s1 + (i,), reverse=True)))
                    * theta_correlator(g2, tuple(sorted(s2 + (j,), reverse=True)))
                )
    extra = Fraction(1, 8) if (a0 == 0 and not rest and g == 1) else Fraction(0)
    return (total + quad / 2 + extra) / double_factorial(2 * a0 + 1)


def _kw_self_check(g: int, args: tuple):
    """String and dilaton consistency of the generated numbers."""
    if 0 in args and 2 * g - 2 + len(args) - 1 > 0:
        rest = list(args)
        rest.remove(0)
        expect = sum(
            psi_correlator(g, tuple(sorted(rest[:j] + [aj - 1] + rest[j + 1 :], reverse=True)))
            for j, aj in enumerate(rest)
            if aj >= 1
        )
        if psi_correlator(g, args) != expect:
            raise InvariantViolation(f"string equation failed at g={g}, {args}")
    if 1 in args and args != (1,) and 2 * g - 2 + len(args) - 1 > 0:
        rest = list(args)
        rest.remove(1)
        expect = (2 * g - 2 + len(rest)) * psi_correlator(g, tuple(rest))
        if psi_correlator(g, args) != expect:
            raise InvariantViolation(f"dilaton equation failed at g={g}, {args}")


# ---------------------------------------------------------------------------
# Tau-function assembly
# ---------------------------------------------------------------------------


@dataclass
class TauSeries:
    """A truncated tau-function or partition function with provenance."""

    body: TPoly
    kind: str
    provenance: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {"provenance": {"kind": self.kind, **self.provenance}, "terms": self.body.to_json_obj()}


def tp_exp(F: TPoly) -> TPoly:
    """exp of a polynomial without constant term (finite by weight truncation)."""
    if not F.constant_term().is_zero():
        raise ValueError("exp needs a polynomial with zero constant term")
    acc = TPoly.one(F.kind, F.max_weight)
    term = acc
    n = 1
    while True:
        term = (term * F).scale(Fraction(1, n))
        if term.is_zero():
            break
        acc = acc + term
        n += 1
    return acc


def _partitions_into(total: int, parts: int):
    """Nonincreasing tuples of `parts` nonnegative integers with the given sum."""

    def rec(total, parts, cap):
        if parts == 0:
            if total == 0:
                yield ()
            return
        for first in range(min(total, cap), -1, -1):
            if first * parts < total:
                break
            for rest in rec(total - first, parts - 1, first):
                yield (first,) + rest

    yield from rec(total, parts, total)


def _assemble_tau(W: int, correlator, dimension, self_check=None) -> TPoly:
    """Sum hbar^(2g-2+n) <...> prod t / automorphisms over all strata
    with t-weight at most W, then exponentiate."""
    F = TPoly.zero(T_SIDE, W)
    g = 0
    while True:
        emitted_for_g = False
        for n in range(1, W + 1):
            D = dimension(g, n)
            if D is None or D < 0:
                continue
            weight = 2 * D + n  # t-weight of any such monomial
            if weight > W:
                continue
            emitted_for_g = True
            for alpha in _partitions_into(D, n):
                c = correlator(g, alpha)
                if not c:
                    continue
                if self_check is not None:
                    self_check(g, alpha)
                mult: dict[int, int] = {}
                for a in alpha:
                    mult[a] = mult.get(a, 0) + 1
                coeff = c
                for a, e in mult.items():
                    coeff *= Fraction(double_factorial(2 * a + 1)) ** e
                    coeff /= math.factorial(e)
                mono = tuple(sorted((2 * a + 1, e) for a, e in mult.items()))
                F = F + TPoly(T_SIDE, W, {mono: HbarPoly.hbar(2 * g - 2 + n, coeff)})
        if not emitted_for_g and dimension(g, 1) is not None and 2 * dimension(g, 1) + 1 > W:
            break
        if g > W:
            break
        g += 1
    return tp_exp(F)


def kw_tau(W: int) -> TauSeries:
    """The psi-class tau-function, truncated at t-weight W, odd variables only.

    Every monomial of weight w carries hbar^(w/3); the leading data are
    (1/6) hbar t_1^3 and (1/8) hbar t_3.
    """
    if W < 3:
        raise ValueError("the psi-class tau-function needs W >= 3")
    body = _assemble_tau(
        W,
        psi_correlator,
        lambda g, n: 3 * g - 3 + n if 3 * g - 3 + n >= 0 and 2 * g - 2 + n > 0 else None,
        self_check=_kw_self_check,
    )
    return TauSeries(body, "KW", {"W": W, "variables": "odd t"})


def bgw_tau(W: int) -> TauSeries:
    """The Theta-class tau-function, truncated at t-weight W.

    Every monomial of weight w carries hbar^w; the leading datum is
    (1/8) hbar t_1.
    """
    if W < 1:
        raise ValueError("the Theta-class tau-function needs W >= 1")
    body = _assemble_tau(
        W,
        theta_correlator,
        lambda g, n: g - 1 if g >= 1 and 2 * g - 2 + n > 0 else None,
    )
    return TauSeries(body, "BGW", {"W": W, "variables": "odd t"})


# ---------------------------------------------------------------------------
# Derived partition functions
# ---------------------------------------------------------------------------


def hodge_partition(params: CurveParams, W: int, mode: str = "standard") -> TauSeries:
    """Quantized group action on the base tau-function, in T-variables.

    Computed by BOTH the termwise exponential and the factorized form;
    the two must agree exactly (any difference aborts).
    """
    if mode not in ("standard", "theta"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "standard":
        if W < 3:
            raise ValueError("standard mode needs W >= 3")
        base = odd_t_to_big_t(kw_tau(W).body)
        shift = "kw"
        kind = "HodgeZ"
    else:
        if W < 1:
            raise ValueError("theta mode needs W >= 1")
        base = odd_t_to_big_t(bgw_tau(W).body)
        shift = "bgw"
        kind = "ThetaZ"
    order = max(2 * ((W - 1) // 2 + 1), 4)
    R = r_series(params, order)
    couplings = couplings_from_log_r(log_r_series(params, order), W)
    direct = givental_direct(couplings, base, shift)
    fact = givental_factorized(R, base, mode)
    if direct != fact:
        raise InvariantViolation(
        f"pipeline disagreement in the quantized action ({mode}); diff = {(direct - fact)!r}"
        )
    return TauSeries(
        direct,
        kind,
        {
            "q": rat_str(params.q),
            "p": rat_str(params.p),
            "s": rat_str(params.s),
            "W": W,
            "pipeline": "direct+factorized",
        },
    )


@dataclass
class TauIdentityReport:
    """Outcome of building one tau-function by the two independent routes."""

    params: CurveParams
    W: int
    equal: bool
    tau: TauSeries
    difference: TPoly | None = None

    def to_json_obj(self) -> dict:
        return {
            "point": self.params.label(),
            "weight": self.W,
            "status": "pass" if self.equal else "fail",
            "difference": repr(self.difference) if self.difference is not None else None,
        }


def _tau_via_group(params: CurveParams, W: int, mode: str, curve: CurveSeries | None) -> tuple:
    if curve is None:
        curve = build_curve(params, 2 * W + 2)
    Z = hodge_partition(params, W, mode)
    forms = tqp_forms(params, (W - 1) // 2, W)
    occurring = Z.body.variables()
    if occurring:
        lhs = Z.body.substitute({m: forms[m] for m in occurring})
    else:
        lhs = TPoly(T_SIDE, W, {(): Z.body.constant_term()})
    return curve, lhs


def tau_qp_check(params: CurveParams, W: int, curve: CurveSeries | None = None) -> TauIdentityReport:
    """Triple Hodge tau-function: substitution route versus symmetry-group route.

    Route one pushes the quantized action through the linear change of
    variables; route two applies exp(sum a_k L_k) to the base
    tau-function and translates by the hbar^{-1}-weighted vector.  The
    two must agree exactly; the result is returned for KP testing.
    """
    curve, lhs = _tau_via_group(params, W, "standard", curve)
    a = witt_coefficients(curve.f.truncate(W + 1)).a
    sd = shift_data(curve, check_moments=False)
    rhs = exp_apply(virasoro_sum_op(a, W), kw_tau(W).body)
    trans = translation_op({k: HbarPoly.hbar(-1, c) for k, c in sd.v.items()}, W, T_SIDE)
    if not trans.is_zero():
        rhs = exp_apply(trans, rhs)
    equal = lhs == rhs
    tau = TauSeries(
        lhs,
        "tau_qp",
        {
            "q": rat_str(params.q),
            "p": rat_str(params.p),
            "s": rat_str(params.s),
            "W": W,
            "pipeline": "substitution+group",
        },
    )
    return TauIdentityReport(params, W, equal, tau, None if equal else lhs - rhs)


def tau_qp_theta_check(params: CurveParams, W: int, curve: CurveSeries | None = None) -> TauIdentityReport:
    """Theta-version of the tau-function identity, with the order-zero
    dilaton shift and the f-y translation vector."""
    curve, lhs = _tau_via_group(params, W, "theta", curve)
    a = witt_coefficients(curve.f.truncate(W + 1)).a
    sd = shift_data(curve, check_moments=False)
    rhs = exp_apply(virasoro_sum_op(a, W), bgw_tau(W).body)
    trans = translation_op({k: HbarPoly.hbar(-1, c) for k, c in sd.v0.items()}, W, T_SIDE)
    if not trans.is_zero():
        rhs = exp_apply(trans, rhs)
    equal = lhs == rhs
    tau = TauSeries(
        lhs,
        "tau_theta_qp",
        {
            "q": rat_str(params.q),
            "p": rat_str(params.p),
            "s": rat_str(params.s),
            "W": W,
            "pipeline": "substitution+group",
        },
    )
    return TauIdentityReport(params, W, equal, tau, None if equal else lhs - rhs)
