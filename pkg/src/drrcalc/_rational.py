"""Conversion of user input to exact rationals and back to text."""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction
from typing import Union

Rat = Fraction
RationalLike = Union[int, Fraction, str, float, Decimal]


def as_rational(x: RationalLike) -> Fraction:
    """Exact conversion; floats go through their shortest decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError("non-finite value %r" % x)
        return Fraction(repr(x))
    if isinstance(x, (str, Decimal)):
        return Fraction(str(x).strip())
    raise TypeError("cannot convert %r to a rational" % (x,))


def to_decimal_str(x: Fraction, digits: int = 12) -> str:
    """Fixed-point rendering rounded half-even at ``digits`` decimals."""
    q = Decimal(x.numerator) / Decimal(x.denominator)
    text = format(q.quantize(Decimal(1).scaleb(-digits)), "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def truncate(x: Fraction, decimals: int) -> Fraction:
    """Truncate toward zero at a number of decimals."""
    scale = 10 ** decimals
    n = x * scale
    whole = n.numerator // n.denominator if n >= 0 else -((-n.numerator) // n.denominator)
    return Fraction(whole, scale)


def rational_json(x: Fraction) -> dict:
    return {"decimal": to_decimal_str(x), "num": x.numerator, "den": x.denominator}
