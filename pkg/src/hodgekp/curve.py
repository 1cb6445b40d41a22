"""Per-parameter-point series data.

For a point (q, p) with a chosen exact square root s of p+q this module
builds the plane curve x(z), its normalized uniformizer f with inverse
h, the auxiliary y, the Bernoulli-weighted symplectic series R, the
Grunsky and quadratic-form matrices, the Witt-flow coefficients and all
dilaton-shift / translation vectors.  Everything is exact; contour
integrals are replaced throughout by the formal Gaussian-moment rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (
    InvariantViolation,
    ZSeries,
    double_factorial,
    rat,
    rat_str,
)

__all__ = [
    "CurveParams",
    "CurveSeries",
    "GrunskyMatrix",
    "GiventalMatrix",
    "WittCoeffs",
    "ShiftData",
    "CATALOG",
    "bernoulli",
    "build_curve",
    "x_closed_form",
    "r_series",
    "log_r_series",
    "gaussian_moments",
    "i_series",
    "grunsky_matrix",
    "givental_v_matrix",
    "witt_coefficients",
    "witt_flow",
    "shift_data",
    "identification_residual",
    "perturbed_control_curve",
]


# ---------------------------------------------------------------------------
# Bernoulli numbers
# ---------------------------------------------------------------------------

_BERNOULLI_CACHE: list[Fraction] = [Fraction(1)]


def _bernoulli_raw(n: int) -> Fraction:
    """B_n with the B_1 = -1/2 convention (even values are convention-free)."""
    while len(_BERNOULLI_CACHE) <= n:
        m = len(_BERNOULLI_CACHE)
        s = sum(
            Fraction(math.comb(m + 1, j)) * _BERNOULLI_CACHE[j] for j in range(m)
        )
        _BERNOULLI_CACHE.append(-s / (m + 1))
    return _BERNOULLI_CACHE[n]


def bernoulli(k: int) -> Fraction:
    """Exact Bernoulli number B_k for even k >= 2 (B_2 = 1/6, B_4 = -1/30).

    Normalization matches the generating function x*e^x/(e^x - 1)
    = 1 + x/2 + sum B_{2k} x^{2k}/(2k)!.
    """
    if k <= 0 or k % 2:
        raise ValueError(f"bernoulli defined for even k >= 2, got {k}")
    return _bernoulli_raw(k)


# ---------------------------------------------------------------------------
# Parameter points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveParams:
    """A parameter point (q, p) together with an exact square root s of p+q."""

    q: Fraction
    p: Fraction
    s: Fraction

    def __post_init__(self):
        object.__setattr__(self, "q", rat(self.q))
        object.__setattr__(self, "p", rat(self.p))
        object.__setattr__(self, "s", rat(self.s))
        if self.p + self.q == 0:
            raise ValueError("excluded parameter locus: p + q = 0")
        if self.s == 0 or self.s * self.s != self.p + self.q:
            raise ValueError("s must be a nonzero exact square root of p + q")

    def label(self) -> str:
        return f"q={rat_str(self.q)},p={rat_str(self.p)},s={rat_str(self.s)}"

    @property
    def n1(self) -> Fraction:
        """Linear coefficient of the denominator (1+s*z)(1+q*z/s)."""
        return self.s + self.q / self.s

    @property
    def n2(self) -> Fraction:
        return self.q


CATALOG: tuple[CurveParams, ...] = (
    CurveParams(Fraction(1), Fraction(3), Fraction(2)),
    CurveParams(Fraction(-1), Fraction(2), Fraction(1)),
    CurveParams(Fraction(0), Fraction(4), Fraction(2)),
    CurveParams(Fraction(4), Fraction(0), Fraction(2)),
    CurveParams(Fraction(3), Fraction(1), Fraction(2)),
)


# ---------------------------------------------------------------------------
# Series attached to a point
# ---------------------------------------------------------------------------


@dataclass
class CurveSeries:
    """All univariate series data of one parameter point, truncated at order K.

    For the in-family builder the fields satisfy (up to the stated
    orders): f = z + O(z^2), h = reversion(f), f^2/2 = x, N*x' = z,
    R(z)R(-z) = 1 and I(z) = R(-z).  params is None for the synthetic
    out-of-family control pipeline.
    """

    params: CurveParams | None
    K: int
    x: ZSeries
    f: ZSeries
    h: ZSeries
    y: ZSeries
    N: ZSeries
    R: ZSeries
    logR: ZSeries
    I: ZSeries


def _denominator_series(params: CurveParams, order: int) -> ZSeries:
    """(1 + s z)(1 + q z / s) as an exact polynomial-series."""
    return ZSeries.from_terms(
        {0: Fraction(1), 1: params.n1, 2: params.n2}, order
    )


def _curve_from_denominator(N_poly: ZSeries, K: int, margin: int = 2):
    """x, f, h, y, N from the series 1/N-integrals, all to order >= K."""
    work = K + margin
    N_full = N_poly.truncate(work) if N_poly.order >= work else ZSeries(
        [N_poly.coeff_or_zero(e) for e in range(0, work + 1)], work
    )
    inv_n = N_full.recip()
    x = (ZSeries.z(work) * inv_n).truncate(work).antiderivative()  # z/N integrated
    y = inv_n.antiderivative()  # since dx/z = dz/N
    f = x.scale(2).sqrt_normalized()
    h = f.truncate(K).reversion()
    return (
        x.truncate(K),
        f.truncate(K),
        h.truncate(K),
        y.truncate(K),
        N_full.truncate(K),
    )


def build_curve(params: CurveParams, K: int) -> CurveSeries:
    """Construct all series data for a parameter point, to order K.

    The ratio series I is computed by the Gaussian-moment transform and
    is trusted to order K // 2.
    """
    if K < 4:
        raise ValueError("curve construction needs K >= 4")
    N_poly = _denominator_series(params, K + 2)
    x, f, h, y, N = _curve_from_denominator(N_poly, K)
    R = r_series(params, K)
    logR = log_r_series(params, K)

    # mutual-consistency checks (pure recomputation, exact)
    if (f * f).truncate(K).scale(Fraction(1, 2)) != x.truncate(K):
        raise InvariantViolation("f^2/2 != x")
    zK = ZSeries.z(K)
    if f.compose(h) != zK or h.compose(f) != zK:
        raise InvariantViolation("f and h are not mutually inverse")
    if (R * R.subs_neg()).truncate(K) != ZSeries.one(K):
        raise InvariantViolation("R violates the symplectic condition")
    if (N * x.derivative()).truncate(K - 1) != ZSeries.z(K - 1):
        raise InvariantViolation("N * x' != z")

    curve = CurveSeries(params, K, x, f, h, y, N, R, logR, ZSeries.one(0))
    curve.I = i_series(curve)
    return curve


def x_closed_form(params: CurveParams, K: int) -> ZSeries:
    """Expansion of the logarithmic closed form of x, including the
    degenerate q=0 and p=0 cases."""
    q, p, s = params.q, params.p, params.s
    z = ZSeries.z(K)
    if q != 0 and p != 0:
        t1 = z.scale(q / s).log1p().scale((p + q) / (p * q))
        t2 = z.scale(s).log1p().scale(Fraction(1, p))
        return t1 - t2
    if q == 0:
        return z.scale(1 / s) - z.scale(s).log1p().scale(Fraction(1, p))
    # p == 0, s^2 = q
    t1 = z.scale(s).log1p().scale(Fraction(1, q))
    t2 = (z * (ZSeries.one(K) + z.scale(s)).recip()).truncate(K).scale(1 / s)
    return t1 - t2


def log_r_series(params: CurveParams, K: int) -> ZSeries:
    """The odd series sum_k -B_{2k}/(2k(2k-1)) (p^(2k-1)+q^(2k-1)-(pq/(p+q))^(2k-1)) z^(2k-1)."""
    q, p = params.q, params.p
    w = p * q / (p + q)
    terms = {}
    k = 1
    while 2 * k - 1 <= K:
        m = 2 * k - 1
        c = -bernoulli(2 * k) / (2 * k * m) * (p**m + q**m - w**m)
        if c:
            terms[m] = c
        k += 1
    return ZSeries.from_terms(terms, K)


def r_series(params: CurveParams, K: int) -> ZSeries:
    """R(z) = exp(log_r_series); satisfies R(0)=1 and R(z)R(-z)=1."""
    return log_r_series(params, K).expm()


def gaussian_moments(G: ZSeries, order: int | None = None) -> ZSeries:
    """Formal Gaussian-moment transform: zeta^(2k) -> (2k-1)!! z^k, odd powers -> 0."""
    if G.lowest < 0:
        raise ValueError("moment transform needs a power series")
    avail = G.order // 2
    if order is None:
        order = avail
    if order > avail:
        raise ValueError("insufficient input order for the requested output order")
    return ZSeries(
        [G.coeff_or_zero(2 * k) * double_factorial(2 * k - 1) for k in range(order + 1)],
        order,
    )


def i_series(curve: CurveSeries, order: int | None = None) -> ZSeries:
    """Moment transform of zeta/h(zeta); equals R(-z) for in-family curves."""
    g = curve.h.shift(-1).strip_lowest().recip()  # zeta/h(zeta)
    avail = g.order // 2
    if order is None:
        order = avail
    if order > avail:
        raise ValueError("insufficient input order: need h to order 2*order + 1")
    return gaussian_moments(g, order)


# ---------------------------------------------------------------------------
# Grunsky coefficients and the quadratic-form matrix of R
# ---------------------------------------------------------------------------


@dataclass
class GrunskyMatrix:
    """Coefficients v_{km} of log((h(e1)-h(e2))/(e1-e2)), 1 <= k,m <= size."""

    size: int
    entries: list  # entries[k-1][m-1]

    def v(self, k: int, m: int) -> Fraction:
        return self.entries[k - 1][m - 1]


def _bi_mul(A: list, B: list, cap: int) -> list:
    out = [[Fraction(0)] * (cap + 1) for _ in range(cap + 1)]
    for i in range(cap + 1):
        for j in range(cap + 1):
            a = A[i][j]
            if not a:
                continue
            for k in range(cap + 1 - i):
                row = B[k]
                for l in range(cap + 1 - j):
                    b = row[l]
                    if b:
                        out[i + k][j + l] += a * b
    return out


def grunsky_matrix(h: ZSeries, size: int) -> GrunskyMatrix:
    """Grunsky coefficients of a normalized series h = z + O(z^2)."""
    if h.coeff_or_zero(0) != 0 or h.coeff_or_zero(1) != 1:
        raise ValueError("Grunsky coefficients need h = z + O(z^2)")
    if h.order < 2 * size + 1:
        raise ValueError("insufficient order: need h to order 2*size + 1")
    cap = size
    # X = (h(e1)-h(e2))/(e1-e2) - 1 = sum_{m>=2} h_m sum_{i+j=m-1} e1^i e2^j
    X = [[Fraction(0)] * (cap + 1) for _ in range(cap + 1)]
    for m in range(2, 2 * size + 2):
        hm = h.coeff_or_zero(m)
        if not hm:
            continue
        for i in range(m):
            j = m - 1 - i
            if i <= cap and j <= cap:
                X[i][j] += hm
    # log(1 + X) truncated at per-variable degree cap
    acc = [[Fraction(0)] * (cap + 1) for _ in range(cap + 1)]
    power = X
    sign = Fraction(1)
    n = 1
    while True:
        if all(all(c == 0 for c in row) for row in power):
            break
        for i in range(cap + 1):
            for j in range(cap + 1):
                if power[i][j]:
                    acc[i][j] += sign * power[i][j] / n
        if n >= 2 * cap:
            break
        power = _bi_mul(power, X, cap)
        sign = -sign
        n += 1
    entries = [[acc[k][m] for m in range(1, size + 1)] for k in range(1, size + 1)]
    return GrunskyMatrix(size, entries)


@dataclass
class GiventalMatrix:
    """Coefficients V_{kl} of (1 - R(-w)R(-z))/(w+z), 0 <= k,l < size."""

    size: int
    entries: list  # entries[k][l]

    def v(self, k: int, l: int) -> Fraction:
        return self.entries[k][l]


def givental_v_matrix(R: ZSeries, size: int, *, require_symplectic: bool = True) -> GiventalMatrix:
    """Expand (1 - R(-w)R(-z))/(w+z) as a bivariate series.

    The division is exact iff R(z)R(-z) = 1 up to the available order;
    a violation raises unless require_symplectic is False, in which
    case the one-sided quotient is returned as a diagnostic.
    """
    if R.coeff_or_zero(0) != 1:
        raise ValueError("R must have constant term 1")
    if R.order < 2 * size:
        raise ValueError("insufficient order: need R to order 2*size")
    top = 2 * size - 1
    rb = [R.subs_neg().coeff_or_zero(e) for e in range(top + 1)]

    def num(i: int, j: int) -> Fraction:
        base = Fraction(1) if i == 0 and j == 0 else Fraction(0)
        return base - rb[i] * rb[j]

    if require_symplectic and num(0, 0) != 0:
        raise ValueError("R violates symplectic condition")
    # (w+z) * Q = numerator: n_{i,j} = Q_{i-1,j} + Q_{i,j-1}
    Q = [[Fraction(0)] * top for _ in range(top)]
    for d in range(top):
        Q[d][0] = num(d + 1, 0)
        for j in range(1, d + 1):
            i = d - j
            Q[i][j] = num(i + 1, j) - Q[i + 1][j - 1]
        if require_symplectic and num(0, d + 1) != Q[0][d]:
            raise ValueError("R violates symplectic condition")
    entries = [[Q[k][l] for l in range(size)] for k in range(size)]
    return GiventalMatrix(size, entries)


# ---------------------------------------------------------------------------
# Witt-flow coefficients
# ---------------------------------------------------------------------------


@dataclass
class WittCoeffs:
    """Flow coefficients a_k, 1 <= k <= len(a); a[k-1] is a_k."""

    a: list

    def __iter__(self):
        return iter(self.a)

    def as_dict(self) -> dict[int, Fraction]:
        return {k + 1: c for k, c in enumerate(self.a) if c}


def witt_flow(a, K: int) -> ZSeries:
    """Apply exp(-sum_k a_k z^(k+1) d/dz) to z, truncated at order K."""
    if K < 2:
        return ZSeries.z(K)
    coeffs = [Fraction(0)] * (K - 1)
    for k, c in enumerate(a, start=1):
        if 2 <= k + 1 <= K:
            coeffs[k - 1] = rat(c)
    # stored with its true valuation so repeated products keep full order
    v = ZSeries(coeffs, K, 2)
    term = ZSeries.z(K)
    acc = term
    n = 1
    while True:
        term = (v * term.derivative()).truncate(K).scale(Fraction(-1, n))
        if term.is_zero():
            break
        acc = acc + term
        n += 1
        if n > K + 2:
            raise InvariantViolation("witt flow failed to terminate")
    return acc


def witt_coefficients(f: ZSeries) -> WittCoeffs:
    """Order-by-order peeling of the flow coefficients of f = z + O(z^2).

    Reconstructing f via witt_flow(a, K) reproduces the input exactly.
    """
    if f.coeff_or_zero(0) != 0 or f.coeff_or_zero(1) != 1:
        raise ValueError("flow coefficients need f = z + O(z^2)")
    K = f.order
    a = [Fraction(0)] * (K - 1)
    for k in range(1, K):
        current = witt_flow(a, k + 1)
        a[k - 1] += current.coeff_or_zero(k + 1) - f.coeff_or_zero(k + 1)
    if witt_flow(a, K) != f:
        raise InvariantViolation("flow reconstruction failed")
    return WittCoeffs(a)


# ---------------------------------------------------------------------------
# Shift and translation data
# ---------------------------------------------------------------------------


@dataclass
class ShiftData:
    """Dilaton-shift changes (delta, delta0) and translation vectors (v, v0).

    delta[k] (k>=2) and delta0[k] (k>=1) come from z(1-R(-z)) and
    1-R(-z); v[k] (k>=4) and v0[k] (k>=2) are the corresponding
    translation coefficients on the Virasoro side.
    """

    delta: dict = field(default_factory=dict)
    delta0: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    v0: dict = field(default_factory=dict)


def shift_data(curve: CurveSeries, check_moments: bool = True) -> ShiftData:
    K = curve.K
    r_neg = curve.R.subs_neg()
    one = ZSeries.one(K)
    delta_series = (ZSeries.z(K) * (one - r_neg)).truncate(K)
    delta0_series = one - r_neg

    fy = curve.f - curve.y
    if fy.coeff_or_zero(1) != 0:
        raise InvariantViolation("f - y must vanish to first order")
    xprime = curve.x.derivative()
    v_series = (fy * xprime).truncate(K - 1).antiderivative()
    for k in range(1, 4):
        if v_series.coeff_or_zero(k) != 0:
            raise InvariantViolation(f"translation coefficient v_{k} expected to vanish")

    sd = ShiftData()
    sd.delta = {
        k: delta_series.coeff_or_zero(k)
        for k in range(2, K + 1)
        if delta_series.coeff_or_zero(k)
    }
    sd.delta0 = {
        k: delta0_series.coeff_or_zero(k)
        for k in range(1, K + 1)
        if delta0_series.coeff_or_zero(k)
    }
    sd.v = {
        k: v_series.coeff_or_zero(k)
        for k in range(4, min(v_series.order, K) + 1)
        if v_series.coeff_or_zero(k)
    }
    sd.v0 = {
        k: fy.coeff_or_zero(k) for k in range(2, K + 1) if fy.coeff_or_zero(k)
    }

    if check_moments:
        # The moment transform of the flow-side integrands must reproduce
        # the dilaton-shift series exactly.
        y_h = curve.y.compose(curve.h)
        zz = ZSeries.z(K)
        g1 = (zz * zz).truncate(K) - (zz * y_h).truncate(K)
        lhs1 = gaussian_moments(g1)
        if lhs1 != delta_series.truncate(lhs1.order):
            raise InvariantViolation("moment identity for the dilaton shift failed")
        g2 = one.truncate(K - 1) - y_h.derivative()
        lhs2 = gaussian_moments(g2)
        if lhs2 != delta0_series.truncate(lhs2.order):
            raise InvariantViolation("moment identity for the order-zero shift failed")
    return sd


# ---------------------------------------------------------------------------
# Identification residual and the out-of-family control
# ---------------------------------------------------------------------------


def identification_residual(curve: CurveSeries, size: int, *, require_symplectic: bool = True) -> list:
    """Entries V_{km} - (2k+1)!!(2m+1)!! v_{2k+1,2m+1} for 0 <= k,m < size.

    All-zero exactly when the quadratic parts of the two group actions
    can be identified through the odd-variable embedding.
    """
    if curve.K < 2 * (2 * size + 1):
        raise ValueError("insufficient order: need the curve built to order >= 2*(2*size+1)")
    V = givental_v_matrix(curve.R, size, require_symplectic=require_symplectic)
    G = grunsky_matrix(curve.h, 2 * size - 1)
    out = []
    for k in range(size):
        row = []
        for m in range(size):
            fac = double_factorial(2 * k + 1) * double_factorial(2 * m + 1)
            row.append(V.v(k, m) - fac * G.v(2 * k + 1, 2 * m + 1))
        out.append(row)
    return out


def perturbed_control_curve(K: int, *, quartic: bool = True) -> CurveSeries:
    """Out-of-family control curve built from a perturbed denominator.

    f and h are rebuilt from the perturbed x, and R is *defined* through
    the Gaussian-moment transform, so every downstream quantity is well
    defined while the identification is expected to fail.

    The default denominator 1 + (5/2)z + z^2 + z^3 + z^4 carries a
    degree-4 coefficient, which is exactly what the identification
    forbids.  With quartic=False the degree-4 term is dropped; a cubic
    denominator is still covered by the gauge orbit of the two-parameter
    family, so its residual vanishes identically (exact fact, kept here
    as a regression control for the checker itself).
    """
    work = 2 * K
    terms = {0: 1, 1: Fraction(5, 2), 2: 1, 3: 1}
    if quartic:
        terms[4] = 1
    N_poly = ZSeries.from_terms(terms, work + 2)
    x, f, h, y, N = _curve_from_denominator(N_poly, work)
    curve = CurveSeries(None, work, x, f, h, y, N, ZSeries.one(0), ZSeries.one(0), ZSeries.one(0))
    I = i_series(curve)  # trusted to order work//2 = K
    R = I.subs_neg()  # R(z) := I(-z)
    logR = (R - ZSeries.one(R.order)).log1p()
    return CurveSeries(
        None,
        K,
        x.truncate(K),
        f.truncate(K),
        h.truncate(2 * K),
        y.truncate(K),
        N.truncate(K),
        R.truncate(K),
        logR.truncate(K),
        I.truncate(K),
    )
