"""Parametric arrival curves.

Each spec materialises as a :class:`PwFunction` on any requested horizon, so
operators that need values beyond an earlier horizon can rebuild the curve
instead of failing.  All curves are 0 at ``t = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from ._rational import as_rational
from .minplus import PwFunction


class ArrivalSpec:
    kind = "abstract"

    def curve(self, horizon) -> PwFunction:
        raise NotImplementedError

    def shifted(self, delay) -> "ArrivalSpec":
        """Arrival curve of the output of a hop with delay bound ``delay``."""
        raise NotImplementedError

    @property
    def long_term_rate(self) -> Fraction:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TokenBucket(ArrivalSpec):
    """``burst + rate * t`` for ``t > 0``."""

    rate: Fraction
    burst: Fraction
    kind = "token-bucket"

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rational(self.rate))
        object.__setattr__(self, "burst", as_rational(self.burst))
        if self.rate < 0 or self.burst < 0:
            raise ValueError("token bucket needs rate, burst >= 0")

    def curve(self, horizon):
        return PwFunction.token_bucket(self.rate, self.burst, horizon)

    def shifted(self, delay):
        return TokenBucket(self.rate, self.burst + self.rate * as_rational(delay))

    @property
    def long_term_rate(self):
        return self.rate

    def to_json(self):
        return {"kind": self.kind, "rate_bps": str(self.rate), "burst_bits": str(self.burst)}


@dataclass(frozen=True)
class GroupedTokenBucket(ArrivalSpec):
    """``min(link_rate * t + l_max, burst + rate * t)`` for ``t > 0``."""

    link_rate: Fraction
    l_max: Fraction
    rate: Fraction
    burst: Fraction
    kind = "grouped-token-bucket"

    def __post_init__(self):
        for name in ("link_rate", "l_max", "rate", "burst"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))
        if self.link_rate <= self.rate:
            raise ValueError("link rate must exceed the token rate")

    def curve(self, horizon):
        line = PwFunction.token_bucket(self.link_rate, self.l_max, horizon)
        return line.minimum(PwFunction.token_bucket(self.rate, self.burst, horizon))

    def shifted(self, delay):
        d = as_rational(delay)
        return GroupedTokenBucket(self.link_rate, self.l_max + self.link_rate * d,
                                  self.rate, self.burst + self.rate * d)

    @property
    def long_term_rate(self):
        return self.rate

    def to_json(self):
        return {"kind": self.kind, "link_rate_bps": str(self.link_rate),
                "l_max_bits": str(self.l_max), "rate_bps": str(self.rate),
                "burst_bits": str(self.burst)}


@dataclass(frozen=True)
class Stair(ArrivalSpec):
    """``height * ceil((t + shift) / period)`` for ``t > 0``."""

    height: Fraction
    period: Fraction
    shift: Fraction = Fraction(0)
    kind = "stair"

    def __post_init__(self):
        for name in ("height", "period", "shift"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))
        if self.period <= 0 or self.height < 0 or self.shift < 0:
            raise ValueError("stair needs period > 0, height >= 0, shift >= 0")

    def curve(self, horizon):
        horizon = as_rational(horizon)
        base = PwFunction.stair(self.height, self.period, horizon + self.shift)
        if self.shift == 0:
            return base
        return base.shift_left(self.shift, horizon)

    def shifted(self, delay):
        return Stair(self.height, self.period, self.shift + as_rational(delay))

    @property
    def long_term_rate(self):
        return self.height / self.period

    def to_json(self):
        return {"kind": self.kind, "height_bits": str(self.height),
                "period_s": str(self.period), "shift_s": str(self.shift)}


class CurveArrival(ArrivalSpec):
    """Arrival curve given by a builder ``horizon -> PwFunction``."""

    kind = "curve"

    def __init__(self, builder: Callable[[Fraction], PwFunction], rate, shift=0, label="curve"):
        self._builder = builder
        self._rate = as_rational(rate)
        self._shift = as_rational(shift)
        self.label = label

    def curve(self, horizon):
        horizon = as_rational(horizon)
        base = self._builder(horizon + self._shift)
        if self._shift == 0:
            return base.restrict(horizon)
        return base.shift_left(self._shift, horizon)

    def shifted(self, delay):
        return CurveArrival(self._builder, self._rate, self._shift + as_rational(delay), self.label)

    @property
    def long_term_rate(self):
        return self._rate

    def to_json(self):
        return {"kind": self.kind, "label": self.label, "shift_s": str(self._shift)}


def min_arrival(a: ArrivalSpec, b: ArrivalSpec) -> ArrivalSpec:
    """Pointwise minimum of two arrival curves."""
    return CurveArrival(lambda h: a.curve(h).minimum(b.curve(h)),
                        min(a.long_term_rate, b.long_term_rate), label="min")


def arrival_from_json(obj: dict) -> ArrivalSpec:
    kind = obj.get("kind")
    if kind == "token-bucket":
        return TokenBucket(obj["rate_bps"], obj["burst_bits"])
    if kind == "grouped-token-bucket":
        return GroupedTokenBucket(obj["link_rate_bps"], obj["l_max_bits"],
                                  obj["rate_bps"], obj["burst_bits"])
    if kind == "stair":
        return Stair(obj["height_bits"], obj["period_s"], obj.get("shift_s", 0))
    raise ValueError("unknown arrival kind %r" % (kind,))
