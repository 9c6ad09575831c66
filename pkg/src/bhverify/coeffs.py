"""Exact rational-function coefficients in the formal parameters n, alpha, a, b.

Every coefficient appearing in the verified identities is an element of the
fraction field Q(n, alpha, a, b).  A ParamScalar stores a gcd-reduced pair of
multivariate polynomials with integer-primitive denominator and positive
denominator leading coefficient, so equal rational functions always have
byte-identical representations.

The polynomial arithmetic (multiplication, multivariate gcd) is delegated to
sympy's sparse polynomial rings over QQ; everything else here is thin,
deterministic bookkeeping on top of it.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Union

from sympy import QQ
from sympy.polys.rings import ring

from .errors import MalformedCoefficientError, PoleError

_RING, _N, _ALPHA, _A, _B = ring("n,alpha,a,b", QQ)
_GENS = {"n": _N, "alpha": _ALPHA, "a": _A, "b": _B}
VAR_NAMES = ("n", "alpha", "a", "b")

Rationalish = Union[int, Fraction, "ParamScalar"]


def _to_qq(x) -> "QQ":
    if isinstance(x, Fraction):
        return QQ(x.numerator, x.denominator)
    return QQ(int(x))


def _qq_to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


class ParamScalar:
    """A normalized rational function of (n, alpha, a, b) over the rationals.

    Instances are immutable; two ParamScalars compare equal iff their
    normalized (numerator, denominator) pairs are identical.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, _normalized=False):
        if den is None:
            den = _RING.one
        if not _normalized:
            num, den = self._normalize(num, den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "_hash", None)

    @staticmethod
    def _normalize(num, den):
        if not den:
            raise MalformedCoefficientError("zero denominator in coefficient")
        if not num:
            return _RING.zero, _RING.one
        num, den = num.cancel(den)
        # Make the denominator integer-primitive with positive leading
        # coefficient; the numerator absorbs the rational content.
        content, prim = den.primitive()
        num = num.quo_ground(content)
        if prim.LC < 0:
            prim = -prim
            num = -num
        return num, prim

    def __setattr__(self, *args):
        raise AttributeError("ParamScalar is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_int(cls, k: int) -> "ParamScalar":
        return cls(_RING.ground_new(QQ(k)))

    @classmethod
    def from_fraction(cls, f: Fraction) -> "ParamScalar":
        return cls(_RING.ground_new(_to_qq(f)))

    @classmethod
    def var(cls, name: str) -> "ParamScalar":
        return cls(_GENS[name])

    @classmethod
    def coerce(cls, x: Rationalish) -> "ParamScalar":
        if isinstance(x, ParamScalar):
            return x
        if isinstance(x, int):
            return cls.from_int(x)
        if isinstance(x, Fraction):
            return cls.from_fraction(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to ParamScalar")

    # -- ring / field structure -------------------------------------------

    def __add__(self, other: Rationalish) -> "ParamScalar":
        o = ParamScalar.coerce(other)
        return ParamScalar(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __sub__(self, other: Rationalish) -> "ParamScalar":
        o = ParamScalar.coerce(other)
        return ParamScalar(self.num * o.den - o.num * self.den, self.den * o.den)

    def __rsub__(self, other: Rationalish) -> "ParamScalar":
        return ParamScalar.coerce(other) - self

    def __mul__(self, other: Rationalish) -> "ParamScalar":
        o = ParamScalar.coerce(other)
        return ParamScalar(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other: Rationalish) -> "ParamScalar":
        o = ParamScalar.coerce(other)
        if not o.num:
            raise MalformedCoefficientError("division by zero coefficient")
        return ParamScalar(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other: Rationalish) -> "ParamScalar":
        return ParamScalar.coerce(other) / self

    def __neg__(self) -> "ParamScalar":
        return ParamScalar(-self.num, self.den, _normalized=True)

    def __pow__(self, k: int) -> "ParamScalar":
        if k < 0:
            return (ParamScalar.from_int(1) / self) ** (-k)
        return ParamScalar(self.num**k, self.den**k)

    # -- predicates / comparison -------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.num

    @property
    def is_one(self) -> bool:
        return self.num == _RING.one and self.den == _RING.one

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ParamScalar.coerce(other)
        if not isinstance(other, ParamScalar):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((tuple(sorted(self.num.terms())), tuple(sorted(self.den.terms()))))
            object.__setattr__(self, "_hash", h)
        return h

    # -- evaluation / substitution ------------------------------------------

    def evaluate(self, n=None, alpha=None, a=None, b=None) -> Fraction:
        """Evaluate exactly at rational parameter values.

        All variables actually present must be given; hitting a denominator
        root raises PoleError.
        """
        vals = (n, alpha, a, b)

        def ev(poly) -> Fraction:
            total = Fraction(0)
            for monom, coeff in poly.terms():
                t = _qq_to_fraction(coeff)
                for val, e in zip(vals, monom):
                    if e:
                        if val is None:
                            raise ValueError(f"unbound parameter in {self}")
                        t *= Fraction(val) ** e
                total += t
            return total

        den_val = ev(self.den)
        if den_val == 0:
            raise PoleError(f"parameters hit denominator root of {self}")
        return ev(self.num) / den_val

    def subs_param(self, name: str, value: "ParamScalar") -> "ParamScalar":
        """Substitute a formal parameter by another rational function."""
        gen_index = VAR_NAMES.index(name)

        def sub_poly(poly):
            out = ParamScalar.from_int(0)
            for monom, coeff in poly.terms():
                term = ParamScalar(_RING.ground_new(coeff))
                for i, e in enumerate(monom):
                    if e == 0:
                        continue
                    base = value if i == gen_index else ParamScalar(_RING.gens[i])
                    term = term * base**e
                out = out + term
            return out

        return sub_poly(self.num) / sub_poly(self.den)

    def degree(self, name: str) -> int:
        """Max degree of a variable across numerator and denominator."""
        i = VAR_NAMES.index(name)
        dn = self.num.degrees()[i] if self.num else 0
        dd = self.den.degrees()[i] if self.den else 0
        return max(dn, dd)

    def univariate(self, name: str) -> list[Fraction]:
        """Coefficient list [c0, c1, ...] in one variable.

        Requires every other variable to have been specialized away; the
        denominator must be a ground constant.
        """
        i = VAR_NAMES.index(name)
        if not self.den.is_ground:
            raise ValueError(f"denominator {self.den} not constant")
        den = _qq_to_fraction(self.den.coeff(1)) if self.den else Fraction(1)
        deg = self.num.degrees()[i] if self.num else 0
        coeffs = [Fraction(0)] * (max(deg, 0) + 1)
        for monom, coeff in self.num.terms():
            if any(e for j, e in enumerate(monom) if j != i):
                raise ValueError(f"{self} is not univariate in {name}")
            coeffs[monom[i]] += _qq_to_fraction(coeff)
        return [c / den for c in coeffs]

    # -- serialization -------------------------------------------------------

    def __str__(self) -> str:
        num = str(self.num)
        if self.den == _RING.one:
            return num
        return f"({num})/({self.den})"

    def __repr__(self) -> str:
        return f"ParamScalar({self})"


# Frequently used atoms.
ZERO = ParamScalar.from_int(0)
ONE = ParamScalar.from_int(1)
N = ParamScalar.var("n")
ALPHA = ParamScalar.var("alpha")
A = ParamScalar.var("a")
B = ParamScalar.var("b")


def ps(x: Rationalish) -> ParamScalar:
    return ParamScalar.coerce(x)


def frac(p: int, q: int) -> ParamScalar:
    return ParamScalar.from_fraction(Fraction(p, q))


def normalize_param(num, den=1) -> ParamScalar:
    """Build a normalized coefficient from a raw rational-function description.

    Accepts ParamScalar/int/Fraction numerator and denominator, or mappings
    from exponent tuples (e_n, e_alpha, e_a, e_b) to rational coefficients.
    Idempotent; a zero denominator raises MalformedCoefficientError.
    """

    def build(x):
        if isinstance(x, ParamScalar):
            return x
        if isinstance(x, Mapping):
            poly = _RING.zero
            for monom, coeff in x.items():
                poly += _RING.term_new(tuple(monom), _to_qq(coeff))
            return ParamScalar(poly)
        return ParamScalar.coerce(x)

    return build(num) / build(den)
