"""Truncated formal power series with exact rational coefficients."""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Sequence


class SeriesOrderError(ValueError):
    pass


class PowerSeries:
    """``sum_{m=0}^{order} c_m s^m``; every operation truncates at the smaller order."""

    __slots__ = ("_c",)

    def __init__(self, coefficients: Iterable, order: int | None = None):
        c = [Fraction(x) for x in coefficients]
        if order is not None:
            c = (c + [Fraction(0)] * (order + 1))[: order + 1]
        if not c:
            raise ValueError("a series needs at least the constant coefficient")
        self._c = tuple(c)

    @classmethod
    def variable(cls, order: int, scale=1) -> "PowerSeries":
        """``scale * s``."""
        return cls([0, scale], order)

    @classmethod
    def constant(cls, value, order: int) -> "PowerSeries":
        return cls([value], order)

    @property
    def order(self) -> int:
        return len(self._c) - 1

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return self._c

    def __getitem__(self, m: int) -> Fraction:
        if m > self.order:
            raise SeriesOrderError(f"coefficient s^{m} beyond truncation order {self.order}")
        return self._c[m] if m >= 0 else Fraction(0)

    def __len__(self):
        return len(self._c)

    def __repr__(self):
        terms = [f"{c}*s^{m}" for m, c in enumerate(self._c) if c]
        return f"PowerSeries({' + '.join(terms) or '0'}; O(s^{self.order + 1}))"

    def __eq__(self, other):
        if isinstance(other, PowerSeries):
            return self._c == other._c
        return NotImplemented

    def __hash__(self):
        return hash(self._c)

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            return other
        return PowerSeries.constant(other, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        k = min(self.order, o.order)
        return PowerSeries([self._c[i] + o._c[i] for i in range(k + 1)])

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries([-x for x in self._c])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            f = Fraction(other)
            return PowerSeries([x * f for x in self._c])
        k = min(self.order, other.order)
        a, b = self._c, other._c
        return PowerSeries([sum(a[i] * b[m - i] for i in range(m + 1)) for m in range(k + 1)])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, PowerSeries):
            return self * (1 / Fraction(other))
        return self * other.reciprocal()

    def reciprocal(self) -> "PowerSeries":
        a = self._c
        if a[0] == 0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        out = [1 / a[0]]
        for m in range(1, len(a)):
            out.append(-sum(a[i] * out[m - i] for i in range(1, m + 1)) / a[0])
        return PowerSeries(out)

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = PowerSeries.constant(1, self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base
                p >>= 1
            return out
        return self.power(p)

    def power(self, alpha) -> "PowerSeries":
        """``(1 + g)^alpha`` for a series with constant term 1."""
        if self._c[0] != 1:
            raise ValueError("fractional powers need constant term 1")
        return (self.log() * Fraction(alpha)).exp()

    def exp(self) -> "PowerSeries":
        g = self._c
        if g[0] != 0:
            raise ValueError("exp needs a series without constant term (result must stay rational)")
        e = [Fraction(1)]
        for m in range(1, len(g)):
            e.append(sum(k * g[k] * e[m - k] for k in range(1, m + 1)) / m)
        return PowerSeries(e)

    def log(self) -> "PowerSeries":
        a = self._c
        if a[0] != 1:
            raise ValueError("log needs a series with constant term 1")
        out = [Fraction(0)]
        for m in range(1, len(a)):
            acc = m * a[m] - sum(k * out[k] * a[m - k] for k in range(1, m))
            out.append(acc / m)
        return PowerSeries(out)

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """``self(inner(s))`` for ``inner`` without constant term (Horner)."""
        if inner._c[0] != 0:
            raise ValueError("composition needs an inner series without constant term")
        k = min(self.order, inner.order)
        inner = inner.truncate(k)
        out = PowerSeries.constant(self._c[k], k)
        for m in range(k - 1, -1, -1):
            out = out * inner + self._c[m]
        return out

    def scale_argument(self, factor) -> "PowerSeries":
        """``self(factor * s)``."""
        f = Fraction(factor)
        return PowerSeries([c * f ** m for m, c in enumerate(self._c)])

    def shift_down(self) -> "PowerSeries":
        """``self / s`` for a series without constant term (loses one order)."""
        if self._c[0] != 0:
            raise ValueError("cannot divide by s: nonzero constant term")
        return PowerSeries(self._c[1:])

    def integrate(self) -> "PowerSeries":
        """``int_0^s``; gains one order."""
        return PowerSeries([Fraction(0)] + [c / (m + 1) for m, c in enumerate(self._c)])

    def derivative(self) -> "PowerSeries":
        return PowerSeries([m * c for m, c in enumerate(self._c)][1:] or [0])

    def truncate(self, order: int) -> "PowerSeries":
        if order > self.order:
            raise SeriesOrderError(f"cannot extend a series of order {self.order} to {order}")
        return PowerSeries(self._c[: order + 1])

    def egf_value(self, m: int) -> Fraction:
        """``m! [s^m]``: the m-th derivative at zero."""
        from math import factorial
        return factorial(m) * self[m]

    # serialization --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps([[c.numerator, c.denominator] for c in self._c])

    @classmethod
    def from_json(cls, text: str) -> "PowerSeries":
        return cls(Fraction(p, q) for p, q in json.loads(text))

