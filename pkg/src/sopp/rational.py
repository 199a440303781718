"""Exact univariate polynomials and rational functions over the rationals.

Coefficients are :class:`fractions.Fraction`; floats are converted exactly,
so evaluation and differentiation carry no rounding error.  A polynomial is a
tuple of coefficients in increasing degree, ``(1, 0, 2)`` is ``1 + 2x**2``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Number
from typing import Iterable, Sequence, Union

Scalar = Union[int, float, Fraction]


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    return Fraction(v)


class Poly:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Scalar] = ()):
        c = [_frac(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def const(cls, v: Scalar) -> "Poly":
        return cls((v,))

    @classmethod
    def x(cls) -> "Poly":
        return cls((0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # zero polynomial has degree -1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self):
        return f"Poly({[str(c) for c in self.coeffs]})"

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        if isinstance(other, Number):
            return self.coeffs == Poly.const(other).coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    @staticmethod
    def _coerce(v) -> "Poly":
        return v if isinstance(v, Poly) else Poly.const(v)

    def __add__(self, other):
        if isinstance(other, RationalFn):
            return NotImplemented
        o = self._coerce(other).coeffs
        a = self.coeffs
        if len(a) < len(o):
            a, o = o, a
        return Poly([a[i] + (o[i] if i < len(o) else 0) for i in range(len(a))])

    __radd__ = __add__

    def __neg__(self):
        return Poly([-c for c in self.coeffs])

    def __sub__(self, other):
        if isinstance(other, RationalFn):
            return NotImplemented
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, RationalFn):
            return NotImplemented
        o = self._coerce(other).coeffs
        a = self.coeffs
        if not a or not o:
            return Poly()
        res = [Fraction(0)] * (len(a) + len(o) - 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, oj in enumerate(o):
                res[i + j] += ai * oj
        return Poly(res)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Poly.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __divmod__(self, other: "Poly"):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dv = other.coeffs
        if len(rem) < len(dv):
            return Poly(), Poly(rem)
        quo = [Fraction(0)] * (len(rem) - len(dv) + 1)
        lead = dv[-1]
        for k in range(len(quo) - 1, -1, -1):
            q = rem[k + len(dv) - 1] / lead
            quo[k] = q
            if q:
                for j, d in enumerate(dv):
                    rem[k + j] -= q * d
        return Poly(quo), Poly(rem[: len(dv) - 1])

    def __call__(self, x0: Scalar):
        acc = Fraction(0) if isinstance(x0, (int, Fraction)) else 0.0
        for c in reversed(self.coeffs):
            acc = acc * x0 + (c if isinstance(acc, Fraction) else float(c))
        return acc

    def deriv(self) -> "Poly":
        return Poly([i * c for i, c in enumerate(self.coeffs)][1:])


class RationalFn:
    """``num / den`` with exact polynomial parts. Not auto-reduced."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1):
        self.num = Poly._coerce(num)
        self.den = Poly._coerce(den)
        if self.den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")

    def __repr__(self):
        return f"RationalFn({self.num!r}, {self.den!r})"

    @staticmethod
    def _coerce(v) -> "RationalFn":
        return v if isinstance(v, RationalFn) else RationalFn(v)

    def __add__(self, other):
        o = self._coerce(other)
        if self.den == o.den:
            return RationalFn(self.num + o.num, self.den)
        if o.den == 1:
            return RationalFn(self.num + o.num * self.den, self.den)
        if self.den == 1:
            return RationalFn(self.num * o.den + o.num, o.den)
        return RationalFn(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFn(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RationalFn(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.num.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFn(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def over(self, den: Poly) -> Poly:
        """Numerator after rewriting with denominator ``den``.

        ``den`` must be a polynomial multiple of ``self.den``.
        """
        q, r = divmod(den, self.den)
        if not r.is_zero():
            raise ValueError(f"{den!r} is not a multiple of {self.den!r}")
        return self.num * q

    def __call__(self, x0: Scalar):
        d = self.den(x0)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at x = {x0}")
        return self.num(x0) / d

    def deriv(self) -> "RationalFn":
        n, d = self.num, self.den
        return RationalFn(n.deriv() * d - n * d.deriv(), d * d)

    def derivatives_at(self, x0: Scalar, order: int = 2) -> list:
        """[R(x0), R'(x0), ..., R^(order)(x0)], exact when x0 is exact.

        Uses the Leibniz recurrence on num = R * den rather than repeated
        quotient rules, so the denominator degree does not grow.
        """
        from math import comb

        x0 = _frac(x0) if not isinstance(x0, float) else Fraction(x0)
        nd, dd = [], []
        pn, pd = self.num, self.den
        for _ in range(order + 1):
            nd.append(pn(x0))
            dd.append(pd(x0))
            pn, pd = pn.deriv(), pd.deriv()
        if dd[0] == 0:
            raise ZeroDivisionError(f"denominator vanishes at x = {x0}")
        r = []
        for k in range(order + 1):
            s = nd[k] - sum(comb(k, j) * r[j] * dd[k - j] for j in range(k))
            r.append(s / dd[0])
        return r


def det(m: Sequence[Sequence]):
    """Determinant by cofactor expansion; works for any ring-like entries."""
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = None
    for j in range(n):
        a = m[0][j]
        if isinstance(a, (int, float, Fraction)) and a == 0:
            continue
        if isinstance(a, Poly) and a.is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = a * det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return 0 if total is None else total
