"""Approximate real values carried together with a rigorous error bound."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath

# Private context so callers' global mpmath precision is left alone.
mp = mpmath.MPContext()
mp.prec = 160


def to_mpf(x):
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    return mp.mpf(x)


@dataclass(frozen=True)
class Bounded:
    """``value`` is within ``error_bound`` of the quantity it stands for.

    ``value`` is a Fraction when the result is exact (bound 0) and an mpf
    otherwise.
    """

    value: object
    error_bound: object = 0

    @property
    def exact(self) -> bool:
        return isinstance(self.value, (Fraction, int)) and self.error_bound == 0

    def __float__(self) -> float:
        return float(self.value)

    def mpf(self):
        return to_mpf(self.value)

    def __mul__(self, other: "Bounded | Fraction | int") -> "Bounded":
        if not isinstance(other, Bounded):
            other = Bounded(Fraction(other))
        if self.exact and other.exact:
            return Bounded(Fraction(self.value) * Fraction(other.value))
        a, b = self.mpf(), other.mpf()
        ea, eb = to_mpf(self.error_bound), to_mpf(other.error_bound)
        err = abs(a) * eb + abs(b) * ea + ea * eb
        return Bounded(a * b, err)

    __rmul__ = __mul__

    def __add__(self, other: "Bounded | Fraction | int") -> "Bounded":
        if not isinstance(other, Bounded):
            other = Bounded(Fraction(other))
        if self.exact and other.exact:
            return Bounded(Fraction(self.value) + Fraction(other.value))
        return Bounded(self.mpf() + other.mpf(), to_mpf(self.error_bound) + to_mpf(other.error_bound))

    __radd__ = __add__

    def __pow__(self, k: int) -> "Bounded":
        out = Bounded(Fraction(1))
        for _ in range(k):
            out = out * self
        return out

    def reciprocal(self) -> "Bounded":
        if self.exact:
            return Bounded(1 / Fraction(self.value))
        v, e = self.mpf(), to_mpf(self.error_bound)
        if e >= abs(v):
            raise ZeroDivisionError("interval contains zero")
        return Bounded(1 / v, e / (abs(v) * (abs(v) - e)))

    def to_json(self) -> dict:
        if self.exact:
            return {"value": fraction_str(Fraction(self.value)), "approx": float(self.value), "error_bound": 0.0}
        return {"value": float(self.value), "error_bound": float(mp.mpf(self.error_bound) + abs(self.mpf() - mp.mpf(float(self.value))))}


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text.strip())
