"""Exact analysis of the coefficient matrix and every parameter-range claim.

The 3x3 symmetric coefficient matrix A of the master identity's quadratic
form is positive definite for 0 < alpha < (n+4)/(n-4); this module certifies
that with exact arithmetic: the minor/determinant factorizations through the
auxiliary polynomials f1, f2, f3 are checked as polynomial identities in
formal (n, alpha), and positivity on the stated open intervals is certified
per integer n by Sturm chains over exact rationals (root counting plus an
interior sample).  A floating-point minimal-eigenvalue scan cross-checks the
certificates and reports the positivity margin.

The module also carries the small exact checks used by the blow-down
argument: the cubic coefficient of the Bernstein estimate, the exponent
gamma, and the final exponent inequality chain (which fails for n = 5 even
though the exponent itself stays negative; see linear_reduction_certificate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .coeffs import ALPHA, A, N, ParamScalar, ps
from .errors import DegenerateCertificateError, EngineInconsistencyError
from .registry import F1_COEFFS, F2_COEFFS, F3_COEFFS, build_named, poly_apply

# -- univariate exact polynomials (dense, constant term first) -----------------


def poly_eval(coeffs: list[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_trim(coeffs: list[Fraction]) -> list[Fraction]:
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    return coeffs


def poly_deriv(coeffs: list[Fraction]) -> list[Fraction]:
    return [k * c for k, c in enumerate(coeffs)][1:] or [Fraction(0)]


def poly_divmod(num: list[Fraction], den: list[Fraction]):
    num, den = poly_trim(list(num)), poly_trim(list(den))
    if not den:
        raise ZeroDivisionError("polynomial division by zero")
    quot = [Fraction(0)] * max(len(num) - len(den) + 1, 1)
    rem = list(num)
    while len(rem) >= len(den) and poly_trim(rem):
        rem = poly_trim(rem)
        if len(rem) < len(den):
            break
        k = len(rem) - len(den)
        q = rem[-1] / den[-1]
        quot[k] = q
        for i, d in enumerate(den):
            rem[i + k] -= q * d
        rem = rem[:-1]
    return poly_trim(quot), poly_trim(rem)


def _primitive(coeffs: list[Fraction]) -> list[Fraction]:
    """Scale by a positive rational so coefficients stay small; sign-safe."""
    nz = [c for c in coeffs if c]
    if not nz:
        return coeffs
    den_lcm = 1
    for c in nz:
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    ints = [c * den_lcm for c in nz]
    g = 0
    for c in ints:
        g = math.gcd(g, abs(c.numerator))
    scale = Fraction(den_lcm, g)
    return [c * scale for c in coeffs]


def sturm_chain(coeffs: list[Fraction]) -> list[list[Fraction]]:
    p0 = _primitive(poly_trim(list(coeffs)))
    if not p0:
        raise DegenerateCertificateError("Sturm chain of the zero polynomial")
    chain = [p0, _primitive(poly_deriv(p0))]
    while True:
        _, rem = poly_divmod(chain[-2], chain[-1])
        if not poly_trim(rem):
            break
        chain.append(_primitive([-c for c in rem]))
    return chain


def _variations(values: list[Fraction]) -> int:
    signs = [1 if v > 0 else -1 for v in values if v != 0]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def sturm_root_count(coeffs: list[Fraction], a: Fraction, b: Fraction) -> int:
    """Distinct real roots in the open interval (a, b).

    Roots sitting exactly at the endpoints are deflated away first, so the
    count refers to the interior only.
    """
    p = poly_trim(list(coeffs))
    if not p:
        raise DegenerateCertificateError("root count of the zero polynomial")
    for end in (a, b):
        while poly_eval(p, end) == 0:
            p, rem = poly_divmod(p, [-end, Fraction(1)])
            assert not rem
            if not p:
                raise DegenerateCertificateError("polynomial vanishes identically")
    if len(p) == 1:
        return 0
    chain = sturm_chain(p)
    va = _variations([poly_eval(q, a) for q in chain])
    vb = _variations([poly_eval(q, b) for q in chain])
    return va - vb


@dataclass
class SignCertificate:
    poly: str
    n: int
    interval: tuple[Fraction, Fraction]
    sturm_root_count: int
    endpoint_values: tuple[Fraction, Fraction]
    interior_sample: tuple[Fraction, Fraction]   # (point, value)
    verdict: str                                  # "positive" | "negative" | "not-one-signed"

    def to_dict(self) -> dict:
        return {
            "poly": self.poly,
            "n": self.n,
            "interval": [str(self.interval[0]), str(self.interval[1])],
            "sturm_root_count": self.sturm_root_count,
            "endpoint_values": [str(v) for v in self.endpoint_values],
            "interior_sample": {"point": str(self.interior_sample[0]),
                                "value": str(self.interior_sample[1])},
            "verdict": self.verdict,
        }


def certify_sign(name: str, coeffs: list[Fraction], n: int,
                 interval: tuple[Fraction, Fraction]) -> SignCertificate:
    """Exact one-signedness verdict on an open interval via Sturm counting."""
    a, b = Fraction(interval[0]), Fraction(interval[1])
    if not poly_trim(list(coeffs)):
        raise DegenerateCertificateError(f"{name}: zero polynomial on [{a}, {b}]")
    roots = sturm_root_count(coeffs, a, b)
    mid = (a + b) / 2
    sample = poly_eval(coeffs, mid)
    if roots == 0 and sample > 0:
        verdict = "positive"
    elif roots == 0 and sample < 0:
        verdict = "negative"
    else:
        verdict = "not-one-signed"
    return SignCertificate(name, n, (a, b), roots,
                           (poly_eval(coeffs, a), poly_eval(coeffs, b)),
                           (mid, sample), verdict)


# -- the coefficient matrix ----------------------------------------------------


@dataclass(frozen=True)
class MatrixA:
    """Symmetric 3x3 coefficient matrix of the master quadratic form, with
    exact rational-function entries in (n, alpha)."""
    A11: ParamScalar
    A12: ParamScalar
    A13: ParamScalar
    A22: ParamScalar
    A23: ParamScalar
    A33: ParamScalar

    def minor2(self) -> ParamScalar:
        return self.A11 * self.A22 - self.A12 * self.A12

    def det(self) -> ParamScalar:
        return (self.A11 * (self.A22 * self.A33 - self.A23 * self.A23)
                - self.A12 * (self.A12 * self.A33 - self.A23 * self.A13)
                + self.A13 * (self.A12 * self.A23 - self.A22 * self.A13))

    def entry_polys_in_alpha(self, n: int) -> dict[str, list[Fraction]]:
        out = {}
        for name in ("A11", "A12", "A13", "A22", "A23", "A33"):
            out[name] = getattr(self, name).subs_param("n", ps(n)).univariate("alpha")
        return out


@lru_cache(maxsize=None)
def build_matrix_A(n: int | None = None) -> MatrixA:
    """Entries from the catalog; the quartic display route for A11 is checked
    against the c1/c2 construction and any mismatch is fatal."""
    a11 = build_named("A11")
    if not (a11 == build_named("A11_display")):
        raise EngineInconsistencyError("the two constructions of A11 disagree")
    entries = {k: build_named(k) for k in ("A11", "A12", "A13", "A22", "A23", "A33")}
    if n is not None:
        entries = {k: v.subs_param("n", ps(n)) for k, v in entries.items()}
    return MatrixA(**entries)


@lru_cache(maxsize=None)
def _formal_bodies() -> dict[str, ParamScalar]:
    mat = build_matrix_A()
    return {"A11": mat.A11, "minor2": mat.minor2(), "detA": mat.det()}


@lru_cache(maxsize=None)
def _alpha_poly(poly_id: str, n: int) -> tuple[Fraction, ...]:
    return tuple(_formal_bodies()[poly_id].subs_param("n", ps(n)).univariate("alpha"))


# -- factorization identities ---------------------------------------------------


@dataclass
class MinorFormulaReport:
    minor2_vs_f1: bool
    det_vs_f2: bool
    f2_reduction_to_f3: bool
    f1_at_zero: bool
    f1_at_upper: bool
    f3_at_zero: bool
    f3_upper_computed: str
    f3_upper_printed: str
    f3_upper_matches_printed: bool
    f3_upper_corrected: str
    f3_upper_matches_corrected: bool

    def all_core_identities_hold(self) -> bool:
        return (self.minor2_vs_f1 and self.det_vs_f2 and self.f2_reduction_to_f3
                and self.f1_at_zero and self.f1_at_upper and self.f3_at_zero)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_minor_formulas() -> MinorFormulaReport:
    """Verify the minor/determinant factorizations as exact identities in
    formal (n, alpha), plus the endpoint formulas of f1 and f3.

    The upper endpoint of f3 is compared against both the printed display
    (with its (n-2)^2 factor) and the corrected one (single factor n-2);
    the printed one fails, which the report records.
    """
    mat = build_matrix_A()
    x13 = (N - 4) * ALPHA / ((N - 2) * (N + 4))
    minor_claim = ((N - 2) ** 2 / (2 * (N - 1) ** 2 * (N - 4) ** 2)
                   * poly_apply(F1_COEFFS, x13))
    det_claim = (N * ALPHA**2 / (64 * (N - 1) ** 2 * (N + 4) ** 2)
                 * (1 / (N - 4) - ALPHA / (N + 4))
                 * poly_apply(F2_COEFFS, ALPHA / (N + 4)))

    # cubic-to-quadratic reduction pattern: f2(x) = C3*(x^3 - x^2/(n-4)) + (n-2)*f3(x)
    x = A  # spare formal variable standing for the argument x
    c3 = F2_COEFFS[3]
    reduction = (poly_apply(F2_COEFFS, x) - (N - 2) * poly_apply(F3_COEFFS, x)
                 - c3 * (x**3 - x**2 / (N - 4)))

    f1_zero = poly_apply(F1_COEFFS, ps(0))
    f1_upper = poly_apply(F1_COEFFS, 1 / (N - 2))
    f3_zero = poly_apply(F3_COEFFS, ps(0))
    f3_upper = poly_apply(F3_COEFFS, 1 / (N - 4))
    printed = 64 * (N - 2) ** 2 * (4 * N**3 - 13 * N**2 + 24 * N - 16) / (N - 4) ** 2
    corrected = 64 * (N - 2) * (4 * N**3 - 13 * N**2 + 24 * N - 16) / (N - 4) ** 2

    return MinorFormulaReport(
        minor2_vs_f1=(mat.minor2() == minor_claim),
        det_vs_f2=(mat.det() == det_claim),
        f2_reduction_to_f3=reduction.is_zero,
        f1_at_zero=(f1_zero == 4 * (N + 2) * (N - 4)),
        f1_at_upper=(f1_upper == (8 * N**3 - 26 * N**2 + 48 * N - 32) / (N - 2) ** 2),
        f3_at_zero=(f3_zero == (N - 2) * (N - 4) * (7 * N + 32)),
        f3_upper_computed=str(f3_upper),
        f3_upper_printed=str(printed),
        f3_upper_matches_printed=(f3_upper == printed),
        f3_upper_corrected=str(corrected),
        f3_upper_matches_corrected=(f3_upper == corrected),
    )


# -- per-n positivity certificates ----------------------------------------------


def _f_poly_at_n(coeffs_ps, n: int) -> list[Fraction]:
    return [c.evaluate(n=n) for c in coeffs_ps]


def positivity_certificate(poly_id: str, n: int,
                           interval: tuple[Fraction, Fraction] | None = None,
                           coeffs: list[Fraction] | None = None) -> SignCertificate:
    """Sturm-certified sign of one of the named polynomials at integer n.

    Known ids: f1 on (0, 1/(n-2)); f3 on (0, 1/(n-4)); A11, minor2, detA in
    alpha on (0, (n+4)/(n-4)).  A custom coefficient list may be supplied
    with poly_id="custom" (used by tests to plant roots).
    """
    if n < 5:
        raise ValueError("certificates require integer n >= 5")
    upper_alpha = Fraction(n + 4, n - 4)
    if poly_id == "f1":
        cs = _f_poly_at_n(F1_COEFFS, n)
        iv = interval or (Fraction(0), Fraction(1, n - 2))
    elif poly_id == "f3":
        cs = _f_poly_at_n(F3_COEFFS, n)
        iv = interval or (Fraction(0), Fraction(1, n - 4))
    elif poly_id in ("A11", "minor2", "detA"):
        cs = list(_alpha_poly(poly_id, n))
        iv = interval or (Fraction(0), upper_alpha)
    elif poly_id == "custom":
        if coeffs is None:
            raise ValueError("custom certificate needs coefficients")
        cs = [Fraction(c) for c in coeffs]
        iv = interval or (Fraction(0), Fraction(1))
    else:
        raise KeyError(f"unknown certificate polynomial {poly_id!r}")
    return certify_sign(poly_id, cs, n, iv)


def sylvester_certificates(n: int) -> list[SignCertificate]:
    """The leading-principal-minor triple of A on the subcritical range."""
    return [positivity_certificate(p, n) for p in ("A11", "minor2", "detA")]


def all_certificates(n: int) -> list[SignCertificate]:
    return [positivity_certificate("f1", n), positivity_certificate("f3", n)] + \
        sylvester_certificates(n)


# -- numeric minimal-eigenvalue scan ---------------------------------------------


@dataclass
class PDReport:
    n_values: list[int]
    grid: int
    min_lambda: float
    argmin: tuple[int, float]
    per_n_min: dict[int, float]
    all_positive: bool
    agrees_with_certificates: bool

    def to_dict(self) -> dict:
        return {
            "n_values": [int(v) for v in self.n_values],
            "grid": self.grid,
            "min_lambda": self.min_lambda,
            "argmin": {"n": self.argmin[0], "alpha": self.argmin[1]},
            "per_n_min": {str(k): v for k, v in self.per_n_min.items()},
            "all_positive": self.all_positive,
            "agrees_with_certificates": self.agrees_with_certificates,
        }


def _eigmin_sym3(a11, a12, a13, a22, a23, a33):
    """Smallest root of the characteristic cubic of a symmetric 3x3 matrix,
    vectorized over numpy arrays (trigonometric solution)."""
    q = (a11 + a22 + a33) / 3.0
    p1 = a12**2 + a13**2 + a23**2
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    b11, b22, b33 = a11 - q, a22 - q, a33 - q
    detb = (b11 * (b22 * b33 - a23**2) - a12 * (a12 * b33 - a23 * a13)
            + a13 * (a12 * a23 - b22 * a13))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(p > 0, detb / (2.0 * p**3), 0.0)
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    return np.where(p > 0, q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0), q)


def numeric_pd_scan(n_values, grid: int = 1000,
                    check_certificates: bool = True) -> PDReport:
    """Minimal eigenvalue of A on a strictly interior alpha grid per n.

    The sign at every point must agree with the Sylvester certificates
    (which assert positivity on the whole open interval); disagreement is an
    engine inconsistency and is fatal.
    """
    mat = build_matrix_A()
    per_n_min: dict[int, float] = {}
    best = (None, None)
    min_lambda = math.inf
    for n in n_values:
        polys = mat.entry_polys_in_alpha(int(n))
        upper = (n + 4) / (n - 4)
        alphas = np.linspace(0.0, upper, grid + 2)[1:-1]
        vals = {}
        for name, cs in polys.items():
            c = np.array([float(x) for x in cs])
            vals[name] = np.polynomial.polynomial.polyval(alphas, c)
        lam = _eigmin_sym3(vals["A11"], vals["A12"], vals["A13"],
                           vals["A22"], vals["A23"], vals["A33"])
        i = int(np.argmin(lam))
        per_n_min[int(n)] = float(lam[i])
        if lam[i] < min_lambda:
            min_lambda = float(lam[i])
            best = (int(n), float(alphas[i]))
    all_positive = min_lambda > 0.0
    agrees = True
    if check_certificates:
        certs = {n: sylvester_certificates(int(n)) for n in n_values}
        cert_positive = all(c.verdict == "positive"
                            for cs in certs.values() for c in cs)
        agrees = cert_positive == all_positive
        if not agrees:
            raise EngineInconsistencyError(
                "numeric eigenvalue sign disagrees with the Sylvester certificates")
    return PDReport(list(int(v) for v in n_values), grid, min_lambda, best,
                    per_n_min, all_positive, agrees)


# -- auxiliary coefficient and exponent checks ------------------------------------


def est1_coefficient(n: int, a: Fraction) -> Fraction:
    """Cubic coefficient (a/n)(1+2a)(2-(n-4)a) of the Bernstein estimate."""
    a = Fraction(a)
    return a / n * (1 + 2 * a) * (2 - (n - 4) * a)


def est1_grid_check(n: int, count: int = 20) -> dict:
    """Exact positivity of the cubic coefficient on an interior a-grid."""
    upper = Fraction(2, n - 4)
    points = [Fraction(k, count + 1) * upper for k in range(1, count + 1)]
    values = [est1_coefficient(n, a) for a in points]
    return {
        "n": n,
        "count": count,
        "all_positive": all(v > 0 for v in values),
        "min_value": str(min(values)),
        "endpoint_value": str(est1_coefficient(n, upper)),
    }


@dataclass
class ExponentCheck:
    """Exact verdicts of the blow-down exponent arithmetic at one (n, alpha)."""
    n: int
    alpha: Fraction
    gamma: Fraction
    final_exponent: Fraction      # ((n^2-2n-16)a - (n+2)(n+4)) / ((n+4)(a-1))
    bound: Fraction               # -8 / ((n-4)(a-1))
    gamma_at_least_six: bool
    chain_holds: bool             # final_exponent < bound < 0
    exponent_negative: bool       # final_exponent < 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": str(self.alpha),
            "gamma": str(self.gamma),
            "final_exponent": str(self.final_exponent),
            "bound": str(self.bound),
            "gamma_at_least_six": self.gamma_at_least_six,
            "chain_holds": self.chain_holds,
            "exponent_negative": self.exponent_negative,
        }


def exponent_check(n: int, alpha: Fraction) -> ExponentCheck:
    alpha = Fraction(alpha)
    if n < 5:
        raise ValueError("need n >= 5")
    if not (1 < alpha < Fraction(n + 4, n - 4)):
        raise ValueError("alpha outside the subcritical range")
    gamma = max(Fraction(6),
                Fraction(1) / (alpha - 1) * (Fraction(6 * n + 16, n + 4) * alpha - 2))
    x = ((n * n - 2 * n - 16) * alpha - (n + 2) * (n + 4)) / ((n + 4) * (alpha - 1))
    bound = Fraction(-8, n - 4) / (alpha - 1)
    return ExponentCheck(
        n=n, alpha=alpha, gamma=gamma,
        final_exponent=x, bound=bound,
        gamma_at_least_six=(gamma >= 6),
        chain_holds=(x < bound < 0),
        exponent_negative=(x < 0),
    )


def linear_reduction_certificate(n: int) -> dict:
    """Clearing denominators, the chain final_exponent < bound reduces to
    L(alpha) = (n-4)(n^2-2n-16) alpha - (n-4)(n+2)(n+4) + 8(n+4) < 0.

    L vanishes at the critical exponent, so the chain holds on the whole
    range exactly when L(1) < 0, i.e. n^2 - 2n - 16 > 0, i.e. n >= 6.  For
    n = 5 the printed middle bound fails even though the exponent itself is
    negative on the whole range.
    """
    l1 = Fraction(-8 * (n * n - 2 * n - 16))
    le = (Fraction((n - 4) * (n * n - 2 * n - 16)) * Fraction(n + 4, n - 4)
          - (n - 4) * (n + 2) * (n + 4) + 8 * (n + 4))
    return {
        "n": n,
        "L_at_one": str(l1),
        "L_at_critical": str(le),
        "vanishes_at_critical": le == 0,
        "chain_holds_on_range": l1 < 0,
    }


def exponent_grid_check(n_values=range(5, 25), alphas_per_n: int = 20) -> dict:
    """Exact exponent checks on a rational grid; returns per-point records
    plus summary flags (the chain fails at n = 5, the exponent never does)."""
    records = []
    for n in n_values:
        upper = Fraction(n + 4, n - 4)
        for k in range(1, alphas_per_n + 1):
            alpha = 1 + Fraction(k, alphas_per_n + 1) * (upper - 1)
            records.append(exponent_check(int(n), alpha))
    return {
        "points": len(records),
        "gamma_always_at_least_six": all(r.gamma_at_least_six for r in records),
        "chain_holds_everywhere": all(r.chain_holds for r in records),
        "chain_failures": [(r.n, str(r.alpha)) for r in records if not r.chain_holds],
        "exponent_negative_everywhere": all(r.exponent_negative for r in records),
        "records": records,
    }
