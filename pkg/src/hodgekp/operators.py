"""Linear operators on weight-truncated polynomials.

Current and Virasoro modes on the t-side, quantized odd-power
generators on the T-side, their (nilpotent) exponentials, the two
changes of variables, and basis-wide operator-equality testing.
Operators are immutable descriptions; application is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .algebra import (
    BIG_T_SIDE,
    HbarPoly,
    InvariantViolation,
    Mono,
    TPoly,
    T_SIDE,
    ZSeries,
    double_factorial,
    mono_str,
    mono_weight,
    var_weight,
)
from .curve import CurveSeries, givental_v_matrix, shift_data, witt_coefficients

__all__ = [
    "LinearOp",
    "virasoro_op",
    "heisenberg_op",
    "w_op",
    "translation_op",
    "linear_change_generator",
    "virasoro_sum_op",
    "virasoro_apply",
    "heisenberg_apply",
    "w_apply",
    "exp_apply",
    "couplings_from_log_r",
    "givental_direct",
    "givental_factorized",
    "transformed_variable_images",
    "tqp_forms",
    "tqp_forms_symbolic",
    "odd_t_to_big_t",
    "big_t_to_odd_t",
    "weight_monomials",
    "EqualityReport",
    "operator_equality_check",
    "virasoro_factorization_check",
    "virasoro_conjugation_check",
    "rl_transform_quantized",
    "rl_transform_virasoro",
    "rl_identity_check",
]


# ---------------------------------------------------------------------------
# Elementary operator sums
# ---------------------------------------------------------------------------


class LinearOp:
    """A finite sum of elementary actions on TPoly values.

    Term tags: "id" (scalar), "m" (multiply by one variable),
    "mm" (multiply by a product of two variables), "d" (one partial
    derivative), "dd" (two partial derivatives), "md" (differentiate,
    then multiply by a variable).  Every term records enough structure
    to bound its weight drop, making exponentials of weight-dropping
    operators finite sums.
    """

    __slots__ = ("kind", "terms")

    def __init__(self, kind: str, terms: Mapping[tuple, HbarPoly] | None = None):
        self.kind = kind
        clean: dict[tuple, HbarPoly] = {}
        if terms:
            for key, c in terms.items():
                c = HbarPoly.promote(c)
                if not c.is_zero():
                    clean[key] = c
        self.terms = clean

    @staticmethod
    def _norm_key(tag: str, *idx: int) -> tuple:
        if tag in ("dd", "mm"):
            idx = tuple(sorted(idx))
        return (tag, *idx)

    @classmethod
    def from_terms(cls, kind: str, items: Iterable[tuple]) -> "LinearOp":
        """items: iterables of (tag, indices..., coeff)."""
        acc: dict[tuple, HbarPoly] = {}
        for item in items:
            tag, *rest = item
            *idx, c = rest
            key = cls._norm_key(tag, *idx)
            c = HbarPoly.promote(c)
            prev = acc.get(key)
            c = c if prev is None else prev + c
            if c.is_zero():
                acc.pop(key, None)
            else:
                acc[key] = c
        return cls(kind, acc)

    def is_zero(self) -> bool:
        return not self.terms

    def term_drop(self, key: tuple) -> int:
        tag = key[0]
        w = lambda v: var_weight(self.kind, v)
        if tag == "id":
            return 0
        if tag == "m":
            return -w(key[1])
        if tag == "mm":
            return -(w(key[1]) + w(key[2]))
        if tag == "d":
            return w(key[1])
        if tag == "dd":
            return w(key[1]) + w(key[2])
        if tag == "md":
            return w(key[2]) - w(key[1])
        raise ValueError(f"unknown term tag {tag!r}")

    @property
    def min_weight_drop(self) -> int:
        """Guaranteed weight drop per application (0 for an empty op)."""
        return min((self.term_drop(k) for k in self.terms), default=0)

    def __add__(self, other: "LinearOp") -> "LinearOp":
        if self.kind != other.kind:
            raise ValueError("cannot add operators on different variable kinds")
        acc = dict(self.terms)
        for key, c in other.terms.items():
            prev = acc.get(key)
            s = c if prev is None else prev + c
            if s.is_zero():
                acc.pop(key, None)
            else:
                acc[key] = s
        return LinearOp(self.kind, acc)

    def scale(self, c) -> "LinearOp":
        c = HbarPoly.promote(c)
        if c.is_zero():
            return LinearOp(self.kind)
        return LinearOp(self.kind, {k: v * c for k, v in self.terms.items()})

    def apply(self, P: TPoly) -> TPoly:
        if P.kind != self.kind:
            raise ValueError(
                f"operator acts on {self.kind}-side polynomials, got {P.kind}-side"
            )
        acc = TPoly.zero(P.kind, P.max_weight)
        for key, c in self.terms.items():
            tag = key[0]
            if tag == "id":
                img = P.scale(c)
            elif tag == "m":
                img = P.mul_var(key[1], c)
            elif tag == "mm":
                img = P.mul_var(key[1]).mul_var(key[2], c)
            elif tag == "d":
                img = P.diff(key[1]).scale(c)
            elif tag == "dd":
                img = P.diff(key[1]).diff(key[2]).scale(c)
            elif tag == "md":
                img = P.diff(key[2]).mul_var(key[1], c)
            else:
                raise ValueError(f"unknown term tag {tag!r}")
            acc = acc + img
        return acc

    def __repr__(self) -> str:
        return f"LinearOp({self.kind}, {len(self.terms)} terms, drop>={self.min_weight_drop})"


def exp_apply(op: LinearOp, P: TPoly) -> TPoly:
    """exp(op) . P as a finite sum; op must drop weight by at least 1."""
    if op.is_zero():
        return P
    if op.min_weight_drop < 1:
        raise ValueError("exponential does not terminate on truncated space")
    acc = P
    term = P
    n = 1
    bound = P.max_weight // op.min_weight_drop + 1
    while True:
        term = op.apply(term).scale(Fraction(1, n))
        if term.is_zero():
            break
        acc = acc + term
        n += 1
        if n > bound + 1:
            raise InvariantViolation("nilpotence bound exceeded in exp_apply")
    return acc


# ---------------------------------------------------------------------------
# The standard generator families
# ---------------------------------------------------------------------------


def virasoro_op(m: int, W: int) -> LinearOp:
    """Virasoro mode on the t-side at weight cap W.

    L_m = (1/2) sum_{a+b=-m} a b t_a t_b + sum_k k t_k d/dt_{k+m}
        + (1/2) sum_{a+b=m} d^2/dt_a dt_b,
    all indices strictly positive, so only one of the quadratic sums
    appears for each sign of m.
    """
    items = []
    for k in range(max(1, 1 - m), W + 1):
        if 1 <= k + m <= W:
            items.append(("md", k, k + m, Fraction(k)))
    if m > 0:
        for a in range(1, m // 2 + 1):
            b = m - a
            if b > W or a > W:
                continue
            coeff = Fraction(1, 2) if a == b else Fraction(1)
            items.append(("dd", a, b, coeff))
    elif m < 0:
        mm = -m
        for a in range(1, mm // 2 + 1):
            b = mm - a
            if a + b > W:
                continue
            coeff = Fraction(a * b, 2) if a == b else Fraction(a * b)
            items.append(("mm", a, b, coeff))
    return LinearOp.from_terms(T_SIDE, items)


def heisenberg_op(k: int, W: int) -> LinearOp:
    """Current mode on the t-side: d/dt_k for k>0, -k t_{-k} for k<0."""
    if k == 0:
        raise ValueError("the zero current mode is identically zero; calling it is a bug")
    if k > 0:
        if k > W:
            return LinearOp(T_SIDE)
        return LinearOp.from_terms(T_SIDE, [("d", k, Fraction(1))])
    if -k > W:
        return LinearOp(T_SIDE)
    return LinearOp.from_terms(T_SIDE, [("m", -k, Fraction(-k))])


def w_op(k: int, W: int, shift: str = "kw") -> LinearOp:
    """Quantized odd-power generator on the T-side.

    W_k = -sum_m Ttilde_m d/dT_{m+2k-1}
          + (1/2) sum_{m=0}^{2k-2} (-1)^m d^2/dT_m dT_{2k-m-2},
    with the dilaton shift Ttilde_m = T_m - hbar^{-1} delta_{m,1}
    ("kw") or T_m - hbar^{-1} delta_{m,0} ("bgw").
    """
    if k <= 0:
        raise ValueError("only the upper-triangular generators (k >= 1) are implemented")
    if shift not in ("kw", "bgw"):
        raise ValueError(f"unknown dilaton shift {shift!r}")
    M = (W - 1) // 2  # largest T-variable index at this weight cap
    items = []
    for m in range(0, M + 1):
        if m + 2 * k - 1 <= M:
            items.append(("md", m, m + 2 * k - 1, Fraction(-1)))
    shift_index = 1 if shift == "kw" else 0
    dil = shift_index + 2 * k - 1
    if dil <= M:
        items.append(("d", dil, HbarPoly.hbar(-1)))
    for a in range(0, k):
        b = 2 * k - 2 - a
        if b > M or a > M:
            continue
        coeff = Fraction((-1) ** a)
        if a == b:
            coeff = coeff / 2
        items.append(("dd", a, b, coeff))
    return LinearOp.from_terms(BIG_T_SIDE, items)


def translation_op(coeffs: Mapping[int, object], W: int, kind: str) -> LinearOp:
    """sum_k c_k d/d(var_k); coefficients may carry hbar powers."""
    items = []
    for k, c in coeffs.items():
        if var_weight(kind, k) <= W:
            items.append(("d", k, HbarPoly.promote(c)))
    return LinearOp.from_terms(kind, items)


def linear_change_generator(a: Sequence[Fraction], W: int) -> LinearOp:
    """sum_k a_k sum_m m t_m d/dt_{m+k}: the first-order parts only."""
    items = []
    for k, ak in enumerate(a, start=1):
        if not ak:
            continue
        for m in range(1, W + 1 - k):
            items.append(("md", m, m + k, Fraction(m) * ak))
    return LinearOp.from_terms(T_SIDE, items)


def virasoro_sum_op(a: Sequence[Fraction], W: int) -> LinearOp:
    """sum_{k>=1} a_k L_k as one operator."""
    acc = LinearOp(T_SIDE)
    for k, ak in enumerate(a, start=1):
        if ak and k <= W:
            acc = acc + virasoro_op(k, W).scale(ak)
    return acc


# convenience single applications ------------------------------------------


def virasoro_apply(m: int, P: TPoly) -> TPoly:
    if P.kind != T_SIDE:
        raise ValueError("Virasoro modes act on t-side polynomials")
    return virasoro_op(m, P.max_weight).apply(P)


def heisenberg_apply(k: int, P: TPoly) -> TPoly:
    if P.kind != T_SIDE:
        raise ValueError("current modes act on t-side polynomials")
    return heisenberg_op(k, P.max_weight).apply(P)


def w_apply(k: int, P: TPoly, shift: str = "kw") -> TPoly:
    if P.kind != BIG_T_SIDE:
        raise ValueError("quantized generators act on T-side polynomials")
    return w_op(k, P.max_weight, shift).apply(P)


# ---------------------------------------------------------------------------
# Group elements: direct and factorized quantized action
# ---------------------------------------------------------------------------


def couplings_from_log_r(logR: ZSeries, W: int) -> dict[int, Fraction]:
    """c_k = [z^(2k-1)] log R for the generators that can act below weight W."""
    for e in range(0, logR.order + 1, 2):
        if logR.coeff_or_zero(e):
            raise ValueError("log R must be odd in z")
    out = {}
    k = 1
    while 4 * k - 2 <= W:
        if 2 * k - 1 <= logR.order:
            c = logR.coeff_or_zero(2 * k - 1)
            if c:
                out[k] = c
        k += 1
    return out


def givental_direct(couplings: Mapping[int, Fraction], P: TPoly, shift: str = "kw") -> TPoly:
    """exp(sum_k c_k W_k) . P, evaluated termwise (finite by nilpotence)."""
    if P.kind != BIG_T_SIDE:
        raise ValueError("the quantized action is defined on T-side polynomials")
    W = P.max_weight
    op = LinearOp(BIG_T_SIDE)
    for k, c in sorted(couplings.items()):
        if c and 4 * k - 2 <= W:
            op = op + w_op(k, W, shift).scale(c)
    return exp_apply(op, P)


def transformed_variable_images(
    R: ZSeries, W: int, mode: str = "standard"
) -> dict[int, TPoly]:
    """Affine substitution images of the transformed T-variables.

    T_k maps to sum_m [z^(k-m)]R(-z) T_m plus the hbar^{-1}-weighted
    constant produced by transporting the dilaton shift (starting at
    k=2 in standard mode and k=1 in theta mode).
    """
    if mode not in ("standard", "theta"):
        raise ValueError(f"unknown mode {mode!r}")
    M = (W - 1) // 2
    if R.order < M:
        raise ValueError("insufficient order of R for this weight cap")
    rb = [R.subs_neg().coeff_or_zero(e) for e in range(M + 1)]
    images: dict[int, TPoly] = {}
    for k in range(M + 1):
        img = TPoly.zero(BIG_T_SIDE, W)
        for m in range(k + 1):
            c = rb[k - m]
            if c:
                img = img + TPoly.variable(BIG_T_SIDE, m, W, c)
        if mode == "standard" and k >= 2:
            const = -rb[k - 1]
        elif mode == "theta" and k >= 1:
            const = -rb[k]
        else:
            const = Fraction(0)
        if const:
            img = img + TPoly.constant(HbarPoly.hbar(-1, const), BIG_T_SIDE, W)
        images[k] = img
    return images


def givental_factorized(R: ZSeries, P: TPoly, mode: str = "standard") -> TPoly:
    """Factorized form of the quantized action.

    Applies exp((1/2) sum V_ij d^2/dT_i dT_j) to P in its own variables
    and then performs the affine substitution of the transformed
    variables (which carries the translation constants).  Must agree
    exactly with givental_direct; the pair of routes is the standing
    cross-check.
    """
    if P.kind != BIG_T_SIDE:
        raise ValueError("the quantized action is defined on T-side polynomials")
    if R.coeff_or_zero(0) != 1:
        raise ValueError("R must have constant term 1")
    W = P.max_weight
    M = (W - 1) // 2
    size = M + 1
    if R.order < 2 * size:
        raise ValueError("insufficient order of R: need order >= 2*((W-1)//2 + 1)")
    V = givental_v_matrix(R, size)
    items = []
    for i in range(size):
        for j in range(i, size):
            if 2 * i + 1 + 2 * j + 1 > W:
                continue
            c = V.v(i, j)
            if not c:
                continue
            items.append(("dd", i, j, c if i != j else c / 2))
    ddop = LinearOp.from_terms(BIG_T_SIDE, items)
    Y = exp_apply(ddop, P) if not ddop.is_zero() else P
    images = transformed_variable_images(R, W, mode)
    occurring = Y.variables()
    return Y.substitute({k: images[k] for k in occurring}) if occurring else Y


# ---------------------------------------------------------------------------
# Changes of variables between the two sides
# ---------------------------------------------------------------------------


def odd_t_to_big_t(P: TPoly) -> TPoly:
    """Relabel odd t-variables into T-variables: t_{2m+1} = T_m / (2m+1)!!."""
    if P.kind != T_SIDE:
        raise ValueError("expected a t-side polynomial")
    out: dict[Mono, HbarPoly] = {}
    for mono, c in P.terms.items():
        new = []
        scale = Fraction(1)
        for v, e in mono:
            if v % 2 == 0:
                raise ValueError("polynomial involves even time variables")
            m = (v - 1) // 2
            new.append((m, e))
            scale /= Fraction(double_factorial(2 * m + 1)) ** e
        out[tuple(sorted(new))] = c * scale
    res = TPoly(BIG_T_SIDE, P.max_weight)
    res.terms = out
    return res


def big_t_to_odd_t(P: TPoly) -> TPoly:
    """Relabel T-variables into odd t-variables: T_m = (2m+1)!! t_{2m+1}."""
    if P.kind != BIG_T_SIDE:
        raise ValueError("expected a T-side polynomial")
    out: dict[Mono, HbarPoly] = {}
    for mono, c in P.terms.items():
        new = []
        scale = Fraction(1)
        for m, e in mono:
            new.append((2 * m + 1, e))
            scale *= Fraction(double_factorial(2 * m + 1)) ** e
        out[tuple(sorted(new))] = c * scale
    res = TPoly(T_SIDE, P.max_weight)
    res.terms = out
    return res


def tqp_forms(params, max_index: int, W: int) -> list[TPoly]:
    """The linear t-side forms substituted for the T-variables.

    T_0 = t_1 and T_k = (q L_0 + ((2q+p)/s) L_{-1} + (L_{-2} - t_1^2/2))
    applied to T_{k-1}.  The quadratic parts of L_{-2} and -t_1^2/2
    cancel exactly; the result must stay linear, and any residual
    nonlinearity aborts.
    """
    op = (
        virasoro_op(0, W).scale(params.q)
        + virasoro_op(-1, W).scale((2 * params.q + params.p) / params.s)
        + virasoro_op(-2, W)
        + LinearOp.from_terms(T_SIDE, [("mm", 1, 1, Fraction(-1, 2))])
    )
    forms = [TPoly.variable(T_SIDE, 1, W)]
    for _ in range(max_index):
        nxt = op.apply(forms[-1])
        if not nxt.is_linear():
            raise InvariantViolation("change-of-variables recursion left the linear span")
        forms.append(nxt)
    return forms


def tqp_forms_symbolic(params, max_index: int, W: int) -> list[TPoly]:
    """Independent route to the same forms through the symbol calculus.

    Iterate D = -((1+sz)(1+qz/s)/z) d/dz on 1/z and read the Laurent
    monomial z^{-k} as k*t_k.
    """
    n1, n2 = params.n1, params.n2
    phi = {1: Fraction(1)}  # exponent j means z^{-j}; starts at 1/z
    forms = []
    for _ in range(max_index + 1):
        poly = TPoly.zero(T_SIDE, W)
        for j, c in sorted(phi.items()):
            if c and j <= W:
                poly = poly + TPoly.variable(T_SIDE, j, W, c * j)
        forms.append(poly)
        nxt: dict[int, Fraction] = {}
        for j, c in phi.items():
            # D(z^-j) = j z^(-j-2) + j n1 z^(-j-1) + j n2 z^-j
            for shift, factor in ((2, Fraction(1)), (1, n1), (0, n2)):
                if factor:
                    key = j + shift
                    nxt[key] = nxt.get(key, Fraction(0)) + c * j * factor
        phi = {j: c for j, c in nxt.items() if c}
    return forms


# ---------------------------------------------------------------------------
# Basis enumeration and operator-equality harness
# ---------------------------------------------------------------------------


def weight_monomials(kind: str, W: int, *, odd_only: bool = False) -> list[Mono]:
    """All monomials of weight <= W, sorted by (weight, monomial)."""
    if kind == T_SIDE:
        vars_ = [v for v in range(1, W + 1) if not (odd_only and v % 2 == 0)]
    else:
        vars_ = list(range(0, (W - 1) // 2 + 1)) if W >= 1 else []
    out: list[Mono] = []

    def rec(pos: int, current: list, weight: int):
        out.append(tuple(current))
        for i in range(pos, len(vars_)):
            v = vars_[i]
            wv = var_weight(kind, v)
            if weight + wv > W:
                continue
            if current and current[-1][0] == v:
                current[-1] = (v, current[-1][1] + 1)
                rec(i, current, weight + wv)
                current[-1] = (v, current[-1][1] - 1)
            else:
                current.append((v, 1))
                rec(i, current, weight + wv)
                current.pop()

    rec(0, [], 0)
    uniq = sorted(set(out), key=lambda m: (mono_weight(kind, m), m))
    return uniq


@dataclass
class EqualityReport:
    """Outcome of comparing two polynomial maps on a monomial basis."""

    label: str
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_obj(self) -> dict:
        return {
            "label": self.label,
            "checked": self.checked,
            "status": "pass" if self.passed else "fail",
            "failures": self.failures[:10],
        }


def operator_equality_check(
    lhs: Callable[[TPoly], TPoly],
    rhs: Callable[[TPoly], TPoly],
    basis: Iterable[TPoly],
    label: str = "",
) -> EqualityReport:
    """Apply both maps to every basis element and collect discrepancies."""
    report = EqualityReport(label=label)
    for P in basis:
        left = lhs(P)
        right = rhs(P)
        report.checked += 1
        if left != right:
            diff = left - right
            report.failures.append(
                {
                    "input": repr(P),
                    "difference": repr(diff),
                }
            )
    return report


# ---------------------------------------------------------------------------
# The three operator-level identities
# ---------------------------------------------------------------------------


def virasoro_factorization_check(curve: CurveSeries, W: int) -> EqualityReport:
    """exp(sum a_k L_k) versus (linear change) o exp((1/2) sum v_km d_k d_m).

    The quadratic kernel v_km is the Grunsky matrix of h; equality on
    the full weight-<=W basis verifies the factorization of the
    upper-triangular group element.
    """
    from .curve import grunsky_matrix

    if curve.f.order < W + 1:
        raise ValueError("curve order too small for this weight")
    a = witt_coefficients(curve.f.truncate(W + 1)).a
    big = virasoro_sum_op(a, W)
    v0 = linear_change_generator(a, W)
    size = max(W - 1, 1)
    G = grunsky_matrix(curve.h, size)
    items = []
    for k in range(1, size + 1):
        for m in range(k, size + 1):
            if k + m > W:
                continue
            c = G.v(k, m)
            if not c:
                continue
            items.append(("dd", k, m, c if k != m else c / 2))
    quad = LinearOp.from_terms(T_SIDE, items)

    def lhs(P):
        return exp_apply(big, P)

    def rhs(P):
        inner = exp_apply(quad, P) if not quad.is_zero() else P
        return exp_apply(v0, inner)

    basis = [TPoly(T_SIDE, W, {m: 1}) for m in weight_monomials(T_SIDE, W)]
    return operator_equality_check(lhs, rhs, basis, label=f"virasoro-factorization W={W}")


def _current_transform_coeffs(curve: CurveSeries, k: int, W: int) -> LinearOp:
    """The mode sum equal to the conjugated current mode.

    Coefficients are read off h'(z) h(z)^(-j-1): the conjugated mode k
    expands as sum_j c_{jk} J_j with c_{jk} = [z^(-k-1)] h' h^(-j-1).
    """
    h = curve.h
    hp = h.derivative()
    u = h.shift(-1).strip_lowest()  # h/z, a unit
    items = []
    if k > 0:
        for j in range(k, W + 1):
            power = u.unit_pow(-(j + 1))
            series = (hp * power).truncate(min(hp.order, power.order))
            if j - k <= series.order:
                c = series.coeff_or_zero(j - k)
                if c:
                    items.append(("d", j, c))
    else:
        kappa = -k
        for j in range(1, W + 1):
            power = u.unit_pow(-(j + 1))
            series = (hp * power).truncate(min(hp.order, power.order))
            if kappa + j <= series.order:
                c = series.coeff_or_zero(kappa + j)
                if c:
                    items.append(("d", j, c))
        hpow = ZSeries.one(h.order)
        for n in range(1, kappa + 1):
            series = (hp * hpow).truncate(hp.order)
            c = series.coeff_or_zero(kappa - 1)
            if c:
                items.append(("m", n, c * n))
            hpow = (hpow * h).truncate(h.order)
    return LinearOp.from_terms(T_SIDE, items)


def virasoro_conjugation_check(
    curve: CurveSeries, W: int, modes: Iterable[int] | None = None, *, flip_sign: bool = False
) -> EqualityReport:
    """Check V J_k V^{-1} = (h-transformed current modes) on a monomial basis.

    flip_sign negates the flow coefficients; the identity must then fail
    at first order, pinning the sign convention operationally.
    """
    if modes is None:
        modes = [k for k in range(-W, W + 1) if k]
    modes = list(modes)
    max_cap = W + max((max(0, -k) for k in modes), default=0)
    if curve.f.order < max_cap + 1:
        raise ValueError("curve order too small for this weight and mode range")
    # On a weight-<=cap space every generator with index <= cap still acts
    # (through its second-derivative part), so the flow coefficients must
    # extend to the lifted cap, not just to W.
    a_full = list(witt_coefficients(curve.f.truncate(max_cap + 1)).a)
    if flip_sign:
        a_full = [-c for c in a_full]
    report = EqualityReport(label=f"current-conjugation W={W}")
    basis_monos = weight_monomials(T_SIDE, W)
    # The inverse group element only drops weight, so its action on a
    # weight-<=W monomial does not depend on the ambient cap: compute once.
    inv_op = virasoro_sum_op(a_full[:W], W).scale(-1)
    inv_images = {
        mono: exp_apply(inv_op, TPoly(T_SIDE, W, {mono: 1})) for mono in basis_monos
    }
    for k in modes:
        lift = max(0, -k)
        cap = W + lift
        big = virasoro_sum_op(a_full[:cap], cap)
        rhs_op = _current_transform_coeffs(curve, k, cap)
        jk = heisenberg_op(k, cap)
        for mono in basis_monos:
            P = TPoly(T_SIDE, cap, {mono: 1})
            left = exp_apply(big, jk.apply(inv_images[mono].with_max_weight(cap)))
            right = rhs_op.apply(P)
            report.checked += 1
            if left != right:
                report.failures.append(
                    {
                        "mode": k,
                        "input": mono_str(T_SIDE, mono),
                        "difference": repr(left - right),
                    }
                )
                if flip_sign:
                    return report  # one witness is enough for the negative control
    return report


# ---------------------------------------------------------------------------
# The full operator identity between the two group actions
# ---------------------------------------------------------------------------


def rl_transform_quantized(curve: CurveSeries, P_odd: TPoly, W: int) -> TPoly:
    """Quantized route: odd-time input read in T-variables, acted on by
    the factorized group element, then pushed through the t-side change
    of variables."""
    PT = odd_t_to_big_t(P_odd)
    img = givental_factorized(curve.R, PT, mode="standard")
    forms = tqp_forms(curve.params, (W - 1) // 2, W)
    occurring = img.variables()
    if not occurring:
        return TPoly(T_SIDE, W, {(): img.constant_term()})
    return img.substitute({m: forms[m] for m in occurring})


def rl_transform_virasoro(curve: CurveSeries, P_odd: TPoly, W: int) -> TPoly:
    """Symmetry-group route: exp(sum a_k L_k), then the hbar^{-1}-weighted
    translation in the t-variables."""
    a = witt_coefficients(curve.f.truncate(W + 1)).a
    sd = shift_data(curve, check_moments=False)
    out = exp_apply(virasoro_sum_op(a, W), P_odd)
    trans = translation_op(
        {k: HbarPoly.hbar(-1, c) for k, c in sd.v.items()}, W, T_SIDE
    )
    return exp_apply(trans, out) if not trans.is_zero() else out


def rl_identity_check(curve: CurveSeries, W: int, extra: Iterable[TPoly] = ()) -> EqualityReport:
    """Equality of the two transforms on every odd-time monomial of
    weight <= W (plus optional extra inputs such as a truncated
    tau-function)."""
    basis = [TPoly(T_SIDE, W, {m: 1}) for m in weight_monomials(T_SIDE, W, odd_only=True)]
    basis.extend(extra)

    def lhs(P):
        return rl_transform_quantized(curve, P, W)

    def rhs(P):
        return rl_transform_virasoro(curve, P, W)

    return operator_equality_check(lhs, rhs, basis, label=f"group-identification W={W}")
