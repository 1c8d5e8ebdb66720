"""Exact piecewise-linear functions and the min-plus / max-plus operators.

All breakpoints, values and slopes are :class:`fractions.Fraction`.  A
function lives on a finite horizon ``[0, H]`` and may be discontinuous at any
breakpoint: the value at a breakpoint, the right limit and the left limit are
independent quantities.

Internally every operator works on a *piece list*: an ordered sequence of
points ``(t, v)`` and open segments ``(a, b, r, s)`` where the segment takes
the value ``r + s * (t - a)`` on ``(a, b)``.  A full function alternates points
and segments from 0 to ``H``; partial functions (with gaps) appear while
computing envelopes.
"""

from __future__ import annotations

import bisect
import math
from fractions import Fraction
from typing import Iterable, Sequence

from ._rational import as_rational

UNDEFINED = "undefined"
PLUS_INFINITY = "plus-infinity-beyond-horizon"
_TAILS = (UNDEFINED, PLUS_INFINITY)

ZERO = Fraction(0)


class HorizonError(ValueError):
    """Raised when an operation needs values beyond a function's horizon."""


class CurveError(ValueError):
    """Raised when an operand violates a precondition (monotonicity, ...)."""


# ---------------------------------------------------------------------------
# piece list helpers

def _is_point(piece) -> bool:
    return len(piece) == 2


def _seg_at(seg, x):
    a, _b, r, s = seg
    return r + s * (x - a)


def _seg_left(seg):
    a, b, r, s = seg
    return r + s * (b - a)


def _normalize(pieces):
    """Merge a point with its neighbour segments when nothing changes there."""
    out = []
    for p in pieces:
        if (not _is_point(p) and len(out) >= 2 and _is_point(out[-1])
                and not _is_point(out[-2])):
            prev = out[-2]
            t, v = out[-1]
            if (prev[1] == t and p[0] == t and prev[3] == p[3]
                    and _seg_left(prev) == v and p[2] == v):
                out.pop()
                out[-1] = (prev[0], p[1], prev[2], prev[3])
                continue
        out.append(p)
    return out


def _endpoints(pieces):
    pts = []
    for p in pieces:
        if _is_point(p):
            pts.append(p[0])
        else:
            pts.append(p[0])
            pts.append(p[1])
    return pts


class _Lookup:
    """Sequential lookup of a piece list at increasing abscissae."""

    __slots__ = ("points", "segs", "k")

    def __init__(self, pieces):
        self.points = {p[0]: p[1] for p in pieces if _is_point(p)}
        self.segs = [p for p in pieces if not _is_point(p)]
        self.k = 0

    def _advance(self, x):
        segs = self.segs
        while self.k < len(segs) and segs[self.k][1] <= x:
            self.k += 1

    def value(self, x):
        v = self.points.get(x)
        if v is not None:
            return v
        self._advance(x)
        if self.k < len(self.segs):
            seg = self.segs[self.k]
            if seg[0] < x < seg[1]:
                return _seg_at(seg, x)
        return None

    def line(self, x0, x1):
        """(value at x0 from the right, slope) of the segment spanning (x0, x1)."""
        self._advance(x0)
        if self.k < len(self.segs):
            seg = self.segs[self.k]
            if seg[0] <= x0 and x1 <= seg[1]:
                return _seg_at(seg, x0), seg[3]
        return None


def _combine(f_pieces, g_pieces, op, partial=False):
    """Pointwise combination of two piece lists.

    ``op`` is one of ``"add"``, ``"sub"``, ``"min"``, ``"max"``.  With
    ``partial`` an undefined operand is the identity of ``min``/``max``.
    """
    grid = sorted(set(_endpoints(f_pieces)) | set(_endpoints(g_pieces)))
    lf, lg = _Lookup(f_pieces), _Lookup(g_pieces)
    out = []
    n = len(grid)
    for idx, x in enumerate(grid):
        a, b = lf.value(x), lg.value(x)
        v = _combine_values(a, b, op, partial)
        if v is not None:
            out.append((x, v))
        if idx + 1 == n:
            break
        x1 = grid[idx + 1]
        la, lb = lf.line(x, x1), lg.line(x, x1)
        out.extend(_combine_lines(x, x1, la, lb, op, partial))
    return _normalize(out)


def _combine_values(a, b, op, partial):
    if a is None or b is None:
        if not partial:
            if a is None and b is None:
                return None
            raise HorizonError("operands are not defined on the same domain")
        return a if b is None else b
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "min":
        return a if a <= b else b
    return a if a >= b else b


def _combine_lines(x0, x1, la, lb, op, partial):
    if la is None or lb is None:
        if la is None and lb is None:
            return []
        if not partial:
            raise HorizonError("operands are not defined on the same domain")
        r, s = la if lb is None else lb
        return [(x0, x1, r, s)]
    ra, sa = la
    rb, sb = lb
    if op == "add":
        return [(x0, x1, ra + rb, sa + sb)]
    if op == "sub":
        return [(x0, x1, ra - rb, sa - sb)]
    want_a = (lambda d: d < 0) if op == "min" else (lambda d: d > 0)
    d0 = ra - rb
    d1 = d0 + (sa - sb) * (x1 - x0)
    if (d0 < 0 < d1) or (d1 < 0 < d0):
        xc = x0 + (-d0) / (sa - sb)
        vc = ra + sa * (xc - x0)
        first = (ra, sa) if want_a(d0) else (rb, sb)
        second = (vc, sa) if want_a(d1) else (vc, sb)
        return [(x0, xc, first[0], first[1]), (xc, vc), (xc, x1, second[0], second[1])]
    if d0 == 0:
        pick_a = want_a(d1) or d1 == 0
    else:
        pick_a = want_a(d0)
    return [(x0, x1, ra, sa) if pick_a else (x0, x1, rb, sb)]


def _envelope(lists, op):
    """Lower (``min``) or upper (``max``) envelope of many partial piece lists."""
    lists = [p for p in lists if p]
    if not lists:
        return []
    while len(lists) > 1:
        nxt = []
        for k in range(0, len(lists) - 1, 2):
            nxt.append(_combine(lists[k], lists[k + 1], op, partial=True))
        if len(lists) % 2:
            nxt.append(lists[-1])
        lists = nxt
    return lists[0]


def _clip(pieces, lo, hi):
    """Restrict a piece list to ``[lo, hi]``."""
    out = []
    for p in pieces:
        if _is_point(p):
            if lo <= p[0] <= hi:
                out.append(p)
            continue
        a, b, r, s = p
        if b <= lo or a >= hi:
            continue
        if lo == hi:
            out.append((lo, r + s * (lo - a)))
            continue
        na = a if a >= lo else lo
        nb = b if b <= hi else hi
        nr = r + s * (na - a)
        if a < lo:
            out.append((lo, nr))
        out.append((na, nb, nr, s))
        if b > hi:
            out.append((hi, nr + s * (hi - na)))
    out.sort(key=lambda p: (p[0], 0 if _is_point(p) else 1))
    return out


# ---------------------------------------------------------------------------
# the function type

class PwFunction:
    """Exact piecewise-linear function on ``[0, horizon]``.

    Attributes are stored in canonical form (no redundant breakpoints), so two
    functions are equal iff they agree everywhere on their common horizon and
    their horizons and tails coincide.

    Args:
        ts: breakpoints ``0 = t_0 < ... < t_k = horizon``.
        values: ``f(t_m)`` for every breakpoint.
        right_limits: ``f(t_m+)`` for ``m < k``.
        slopes: slope on ``(t_m, t_{m+1})`` for ``m < k``.
        tail: behaviour beyond the horizon, ``"undefined"`` or
            ``"plus-infinity-beyond-horizon"``.
    """

    __slots__ = ("_ts", "_vs", "_rs", "_ss", "_tail", "_hash")

    def __init__(self, ts, values, right_limits, slopes, tail=UNDEFINED):
        ts = [as_rational(t) for t in ts]
        vs = [as_rational(v) for v in values]
        rs = [as_rational(v) for v in right_limits]
        ss = [as_rational(v) for v in slopes]
        if not ts or ts[0] != 0:
            raise CurveError("breakpoints must start at 0")
        if len(vs) != len(ts) or len(rs) != len(ts) - 1 or len(ss) != len(ts) - 1:
            raise CurveError("inconsistent breakpoint arrays")
        if any(ts[m] >= ts[m + 1] for m in range(len(ts) - 1)):
            raise CurveError("breakpoints must be strictly increasing")
        pieces = []
        for m in range(len(ts) - 1):
            pieces.append((ts[m], vs[m]))
            pieces.append((ts[m], ts[m + 1], rs[m], ss[m]))
        pieces.append((ts[-1], vs[-1]))
        self._load(_normalize(pieces), tail)

    # construction from pieces (internal fast path)
    @classmethod
    def _from_pieces(cls, pieces, tail=UNDEFINED, horizon=None):
        pieces = list(pieces)
        if not pieces or not _is_point(pieces[0]) or pieces[0][0] != 0:
            raise HorizonError("result is not defined at 0")
        expect_point = True
        cursor = ZERO
        for p in pieces:
            if _is_point(p) != expect_point:
                raise HorizonError("result has a gap near t=%s" % cursor)
            if expect_point:
                if p[0] != cursor:
                    raise HorizonError("result has a gap near t=%s" % cursor)
            else:
                if p[0] != cursor or p[1] <= p[0]:
                    raise HorizonError("result has a gap near t=%s" % cursor)
                cursor = p[1]
            expect_point = not expect_point
        if expect_point:
            raise HorizonError("result does not end with a point")
        if horizon is not None and cursor != horizon:
            raise HorizonError("result covers [0, %s], expected [0, %s]" % (cursor, horizon))
        obj = cls.__new__(cls)
        obj._load(_normalize(pieces), tail)
        return obj

    def _load(self, pieces, tail):
        if tail not in _TAILS:
            raise CurveError("unknown tail policy %r" % (tail,))
        self._ts = tuple(p[0] for p in pieces if _is_point(p))
        self._vs = tuple(p[1] for p in pieces if _is_point(p))
        segs = [p for p in pieces if not _is_point(p)]
        self._rs = tuple(p[2] for p in segs)
        self._ss = tuple(p[3] for p in segs)
        self._tail = tail
        self._hash = None

    def _pieces(self):
        ts, vs, rs, ss = self._ts, self._vs, self._rs, self._ss
        out = []
        for m in range(len(ss)):
            out.append((ts[m], vs[m]))
            out.append((ts[m], ts[m + 1], rs[m], ss[m]))
        out.append((ts[-1], vs[-1]))
        return out

    # -- basic accessors
    @property
    def horizon(self) -> Fraction:
        return self._ts[-1]

    @property
    def tail(self) -> str:
        return self._tail

    @property
    def breakpoints(self) -> tuple:
        return self._ts

    @property
    def segments(self) -> list:
        """``(t_start, value_at_start, right_limit_at_start, slope)`` per segment.

        The final entry describes the horizon point itself (slope 0).
        """
        out = [(self._ts[m], self._vs[m], self._rs[m], self._ss[m])
               for m in range(len(self._ss))]
        out.append((self._ts[-1], self._vs[-1], self._vs[-1], ZERO))
        return out

    def __len__(self):
        return len(self._ts)

    def _locate(self, t):
        return bisect.bisect_right(self._ts, t) - 1

    def __call__(self, t):
        t = as_rational(t)
        if t < 0:
            raise HorizonError("negative argument %s" % t)
        if t > self.horizon:
            if self._tail == PLUS_INFINITY:
                return math.inf
            raise HorizonError("t=%s beyond horizon %s" % (t, self.horizon))
        m = self._locate(t)
        if self._ts[m] == t:
            return self._vs[m]
        return self._rs[m] + self._ss[m] * (t - self._ts[m])

    def right_limit(self, t):
        t = as_rational(t)
        if t < 0 or t >= self.horizon:
            raise HorizonError("right limit undefined at %s" % t)
        m = self._locate(t)
        if self._ts[m] == t:
            return self._rs[m]
        return self._rs[m] + self._ss[m] * (t - self._ts[m])

    def left_limit(self, t):
        t = as_rational(t)
        if t <= 0 or t > self.horizon:
            raise HorizonError("left limit undefined at %s" % t)
        m = bisect.bisect_left(self._ts, t) - 1
        return self._rs[m] + self._ss[m] * (t - self._ts[m])

    def slope_after(self, t):
        m = self._locate(as_rational(t))
        return self._ss[min(m, len(self._ss) - 1)] if self._ss else ZERO

    def values_and_limits(self):
        """All values whose infimum/supremum give inf/sup of the function."""
        out = list(self._vs)
        for m in range(len(self._ss)):
            out.append(self._rs[m])
            out.append(self._rs[m] + self._ss[m] * (self._ts[m + 1] - self._ts[m]))
        return out

    def sup(self):
        return max(self.values_and_limits())

    def inf(self):
        return min(self.values_and_limits())

    # -- comparisons
    def __eq__(self, other):
        if not isinstance(other, PwFunction):
            return NotImplemented
        return (self._ts == other._ts and self._vs == other._vs and self._rs == other._rs
                and self._ss == other._ss and self._tail == other._tail)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._ts, self._vs, self._rs, self._ss, self._tail))
        return self._hash

    def same_values(self, other) -> bool:
        """Equality ignoring the tail policy."""
        return (self._ts == other._ts and self._vs == other._vs and self._rs == other._rs
                and self._ss == other._ss)

    def __le__(self, other):
        """Pointwise ``self <= other`` on the common horizon (exact)."""
        h = min(self.horizon, other.horizon)
        diff = other.restrict(h) - self.restrict(h)
        return diff.inf() >= 0

    def __ge__(self, other):
        return other.__le__(self)

    def __repr__(self):
        if len(self._ts) <= 6:
            body = ", ".join("(%s, %s, %s, %s)" % seg for seg in self.segments)
        else:
            body = "%d breakpoints" % len(self._ts)
        return "PwFunction([%s], horizon=%s)" % (body, self.horizon)

    # -- structural helpers
    def restrict(self, horizon) -> "PwFunction":
        horizon = as_rational(horizon)
        if horizon == self.horizon:
            return self
        if horizon > self.horizon or horizon < 0:
            raise HorizonError("cannot restrict horizon %s to %s" % (self.horizon, horizon))
        return PwFunction._from_pieces(_clip(self._pieces(), ZERO, horizon), self._tail)

    def with_tail(self, tail) -> "PwFunction":
        obj = PwFunction._from_pieces(self._pieces(), tail)
        return obj

    def shift_left(self, d, horizon=None, zero_at_origin=True) -> "PwFunction":
        """``t -> f(t + d)`` on ``[0, horizon]``; the value at 0 is forced to 0."""
        d = as_rational(d)
        if d < 0:
            raise CurveError("shift must be non-negative")
        if horizon is None:
            horizon = self.horizon - d
        horizon = as_rational(horizon)
        if horizon + d > self.horizon:
            raise HorizonError("shift needs the function on [0, %s]" % (horizon + d))
        moved = []
        for p in _clip(self._pieces(), d, d + horizon):
            if _is_point(p):
                moved.append((p[0] - d, p[1]))
            else:
                moved.append((p[0] - d, p[1] - d, p[2], p[3]))
        if zero_at_origin:
            moved[0] = (ZERO, ZERO)
        return PwFunction._from_pieces(moved, self._tail)

    # -- arithmetic
    def _binary(self, other, op):
        if isinstance(other, PwFunction):
            if other.horizon != self.horizon:
                raise HorizonError("horizon mismatch: %s vs %s" % (self.horizon, other.horizon))
            tail = self._tail if self._tail == other._tail else UNDEFINED
            return PwFunction._from_pieces(_combine(self._pieces(), other._pieces(), op), tail)
        c = as_rational(other)
        return self._binary(PwFunction.constant(c, self.horizon), op)

    def __add__(self, other):
        return self._binary(other, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "sub")

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        pieces = [(p[0], -p[1]) if _is_point(p) else (p[0], p[1], -p[2], -p[3])
                  for p in self._pieces()]
        return PwFunction._from_pieces(pieces, UNDEFINED)

    def scale(self, k) -> "PwFunction":
        """``k * f`` for a non-negative constant ``k``."""
        k = as_rational(k)
        pieces = [(p[0], k * p[1]) if _is_point(p) else (p[0], p[1], k * p[2], k * p[3])
                  for p in self._pieces()]
        return PwFunction._from_pieces(pieces, self._tail)

    __mul__ = scale
    __rmul__ = scale

    def scale_time(self, k) -> "PwFunction":
        """``t -> f(k t)`` on ``[0, horizon / k]`` for ``k > 0``."""
        k = as_rational(k)
        if k <= 0:
            raise CurveError("time scale must be positive")
        pieces = [(p[0] / k, p[1]) if _is_point(p) else (p[0] / k, p[1] / k, p[2], p[3] * k)
                  for p in self._pieces()]
        return PwFunction._from_pieces(pieces, self._tail)

    def minimum(self, other) -> "PwFunction":
        return self._binary(other, "min")

    def maximum(self, other) -> "PwFunction":
        return self._binary(other, "max")

    # -- predicates
    def is_nondecreasing(self) -> bool:
        vs, rs, ss, ts = self._vs, self._rs, self._ss, self._ts
        for m in range(len(ss)):
            left = rs[m] + ss[m] * (ts[m + 1] - ts[m])
            if ss[m] < 0 or rs[m] < vs[m] or vs[m + 1] < left:
                return False
        return True

    def is_nonnegative(self) -> bool:
        return self.inf() >= 0

    def is_continuous(self) -> bool:
        ts, vs, rs, ss = self._ts, self._vs, self._rs, self._ss
        for m in range(len(ss)):
            if rs[m] != vs[m] or vs[m + 1] != rs[m] + ss[m] * (ts[m + 1] - ts[m]):
                return False
        return True

    # -- constructors
    @staticmethod
    def constant(c, horizon) -> "PwFunction":
        c, horizon = as_rational(c), as_rational(horizon)
        if horizon == 0:
            return PwFunction._from_pieces([(ZERO, c)])
        return PwFunction._from_pieces([(ZERO, c), (ZERO, horizon, c, ZERO), (horizon, c)])

    @staticmethod
    def zero(horizon) -> "PwFunction":
        return PwFunction.constant(0, horizon)

    @staticmethod
    def affine(rate, offset, horizon) -> "PwFunction":
        """``t -> offset + rate * t`` including at 0."""
        rate, offset, horizon = as_rational(rate), as_rational(offset), as_rational(horizon)
        if horizon == 0:
            return PwFunction._from_pieces([(ZERO, offset)])
        return PwFunction._from_pieces([(ZERO, offset), (ZERO, horizon, offset, rate),
                                        (horizon, offset + rate * horizon)])

    @staticmethod
    def identity(horizon) -> "PwFunction":
        return PwFunction.affine(1, 0, horizon)

    @staticmethod
    def rate_latency(rate, latency, horizon) -> "PwFunction":
        """``rate * [t - latency]^+``."""
        rate, latency, horizon = as_rational(rate), as_rational(latency), as_rational(horizon)
        if rate < 0 or latency < 0:
            raise CurveError("rate and latency must be non-negative")
        if latency == 0 or horizon <= latency:
            if latency == 0:
                return PwFunction.affine(rate, 0, horizon)
            return PwFunction.zero(horizon)
        return PwFunction._from_pieces([
            (ZERO, ZERO), (ZERO, latency, ZERO, ZERO), (latency, ZERO),
            (latency, horizon, ZERO, rate), (horizon, rate * (horizon - latency))])

    @staticmethod
    def token_bucket(rate, burst, horizon) -> "PwFunction":
        """``burst + rate * t`` for ``t > 0`` and 0 at ``t = 0``."""
        rate, burst, horizon = as_rational(rate), as_rational(burst), as_rational(horizon)
        if horizon == 0:
            return PwFunction._from_pieces([(ZERO, ZERO)])
        return PwFunction._from_pieces([(ZERO, ZERO), (ZERO, horizon, burst, rate),
                                        (horizon, burst + rate * horizon)])

    @staticmethod
    def stair(height, period, horizon) -> "PwFunction":
        """``height * ceil(t / period)``: left-continuous staircase."""
        a, p, horizon = as_rational(height), as_rational(period), as_rational(horizon)
        if p <= 0:
            raise CurveError("period must be positive")
        pieces = [(ZERO, ZERO)]
        k = 0
        while k * p < horizon:
            end = min((k + 1) * p, horizon)
            pieces.append((k * p, end, (k + 1) * a, ZERO))
            pieces.append((end, (k + 1) * a))
            k += 1
        return PwFunction._from_pieces(pieces)

    @staticmethod
    def from_points(points: Sequence, horizon=None) -> "PwFunction":
        """Continuous interpolation of ``(t, value)`` pairs starting at ``t = 0``."""
        pts = [(as_rational(t), as_rational(v)) for t, v in points]
        if horizon is not None:
            horizon = as_rational(horizon)
            if horizon > pts[-1][0]:
                pts.append((horizon, pts[-1][1]))
        pieces = [pts[0]]
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            pieces.append((t0, t1, v0, (v1 - v0) / (t1 - t0)))
            pieces.append((t1, v1))
        out = PwFunction._from_pieces(pieces)
        return out if horizon is None else out.restrict(horizon)

    @staticmethod
    def from_segments(segments: Iterable, horizon) -> "PwFunction":
        """Build from ``(t_start, value, right_limit, slope)`` tuples.

        The value at the horizon is the left limit of the last segment unless a
        segment starts exactly at the horizon.
        """
        segs = [tuple(as_rational(x) for x in seg) for seg in segments]
        horizon = as_rational(horizon)
        ts, vs, rs, ss = [], [], [], []
        for k, (t, v, r, s) in enumerate(segs):
            if t == horizon:
                vs_end = v
                break
            ts.append(t)
            vs.append(v)
            rs.append(r)
            ss.append(s)
        else:
            t, _v, r, s = segs[-1]
            vs_end = r + s * (horizon - t)
        ts.append(horizon)
        vs.append(vs_end)
        return PwFunction(ts, vs, rs, ss)


def max_pw(functions: Iterable[PwFunction]) -> PwFunction:
    functions = list(functions)
    out = functions[0]
    for f in functions[1:]:
        out = out.maximum(f)
    return out


def min_pw(functions: Iterable[PwFunction]) -> PwFunction:
    functions = list(functions)
    out = functions[0]
    for f in functions[1:]:
        out = out.minimum(f)
    return out


def sum_pw(functions: Iterable[PwFunction], horizon=None) -> PwFunction:
    functions = list(functions)
    if not functions:
        return PwFunction.zero(horizon)
    out = functions[0]
    for f in functions[1:]:
        out = out + f
    return out


# ---------------------------------------------------------------------------
# convolutions

def _conv_pair(p, q, op):
    """Contribution of one piece of each operand to a (min|max)-plus convolution."""
    if _is_point(p) and _is_point(q):
        return [(p[0] + q[0], p[1] + q[1])]
    if _is_point(p) or _is_point(q):
        pt, sg = (p, q) if _is_point(p) else (q, p)
        t, v = pt
        a, b, r, s = sg
        return [(t + a, t + b, v + r, s)]
    # two open segments: the faster (max) or slower (min) slope comes first
    first, second = (p, q) if (p[3] <= q[3]) == (op == "min") else (q, p)
    start = p[0] + q[0]
    end = p[1] + q[1]
    v0 = p[2] + q[2]
    if first[3] == second[3]:
        return [(start, end, v0, first[3])]
    kink = start + (first[1] - first[0])
    vk = v0 + first[3] * (first[1] - first[0])
    return [(start, kink, v0, first[3]), (kink, vk), (kink, end, vk, second[3])]


def _convolve(f: PwFunction, g: PwFunction, op: str) -> PwFunction:
    if f.horizon != g.horizon:
        raise HorizonError("convolution operands must share a horizon")
    h = f.horizon
    fp = f._pieces()
    gp = g._pieces()
    contribs = []
    for p in fp:
        p0 = p[0]
        for q in gp:
            if p0 + q[0] > h:
                break
            contribs.append(_clip(_conv_pair(p, q, op), ZERO, h))
    tail = PLUS_INFINITY if (f.tail == PLUS_INFINITY and g.tail == PLUS_INFINITY) else UNDEFINED
    return PwFunction._from_pieces(_envelope(contribs, op), tail, horizon=h)


def min_plus_convolution(f: PwFunction, g: PwFunction) -> PwFunction:
    """``(f ⊗ g)(t) = inf_{0 <= s <= t} f(t - s) + g(s)`` on the common horizon."""
    return _convolve(f, g, "min")


def max_plus_convolution(f: PwFunction, g: PwFunction) -> PwFunction:
    """``sup_{0 <= s <= t} f(t - s) + g(s)`` on the common horizon."""
    return _convolve(f, g, "max")


def super_additive_closure(f: PwFunction, max_rounds: int = 64) -> PwFunction:
    """Smallest super-additive majorant ``sup_n f^n``, with ``f^0 = 0``.

    Computed by repeated squaring ``g <- max(g, g ⊗̄ g)`` until a fixpoint.
    Requires ``f(0) = 0`` and ``f(0+) = 0``; otherwise the closure diverges.
    """
    if f(0) != 0:
        raise CurveError("super-additive closure needs f(0) = 0")
    if f.horizon > 0 and f.right_limit(0) > 0:
        raise CurveError("super-additive closure diverges when f(0+) > 0")
    g = f.maximum(PwFunction.zero(f.horizon))
    for _ in range(max_rounds):
        nxt = g.maximum(max_plus_convolution(g, g))
        if nxt.same_values(g):
            return g
        g = nxt
    raise CurveError("super-additive closure did not converge in %d rounds" % max_rounds)


def _deconv_pair(p, q):
    """Contribution of a piece ``p`` of f and ``q`` of g to ``sup f(t+s) - g(s)``."""
    if _is_point(p) and _is_point(q):
        return [(p[0] - q[0], p[1] - q[1])]
    if _is_point(q):
        a0, a1, ra, sa = p
        b, vb = q
        return [(a0 - b, a1 - b, ra - vb, sa)]
    b0, b1, rb, sb = q
    g_left = rb + sb * (b1 - b0)
    if _is_point(p):
        a, va = p
        return [(a - b1, a - b0, va - g_left, sb)]
    a0, a1, ra, sa = p
    if sa >= sb:
        kink = a1 - b1
        f_left = ra + sa * (a1 - a0)
        vk = f_left - g_left
        return [(a0 - b1, kink, ra - g_left, sa), (kink, vk), (kink, a1 - b0, vk, sb)]
    kink = a0 - b0
    vk = ra - rb
    return [(a0 - b1, kink, ra - g_left, sb), (kink, vk), (kink, a1 - b0, vk, sa)]


def min_plus_deconvolution(f: PwFunction, g: PwFunction, horizon=None, s_max=None) -> PwFunction:
    """``(f ⊘ g)(t) = sup_{0 <= s <= s_max} f(t + s) - g(s)`` for ``t`` in ``[0, horizon]``.

    ``s_max`` defaults to the horizon of ``g``.  When ``g`` has the plus-infinity
    tail and ``s_max`` exceeds its horizon, the sup is taken over ``g``'s
    horizon only.  ``f`` must be defined on ``[0, horizon + s_max]``.
    """
    s_max = g.horizon if s_max is None else as_rational(s_max)
    if s_max > g.horizon:
        if g.tail != PLUS_INFINITY:
            raise HorizonError("g is undefined beyond %s (s_max=%s)" % (g.horizon, s_max))
        s_max = g.horizon
    if horizon is None:
        horizon = f.horizon - s_max
    horizon = as_rational(horizon)
    if horizon < 0 or horizon + s_max > f.horizon:
        raise HorizonError("f must be defined on [0, %s]" % (horizon + s_max))
    fp = _clip(f._pieces(), ZERO, horizon + s_max)
    gp = _clip(g._pieces(), ZERO, s_max)
    contribs = []
    for q in gp:
        q_lo = q[0]
        q_hi = q[0] if _is_point(q) else q[1]
        for p in fp:
            p_lo = p[0]
            p_hi = p[0] if _is_point(p) else p[1]
            if p_hi - q_lo < 0:
                continue
            if p_lo - q_hi > horizon:
                break
            contribs.append(_clip(_deconv_pair(p, q), ZERO, horizon))
    return PwFunction._from_pieces(_envelope(contribs, "max"), UNDEFINED, horizon=horizon)


# ---------------------------------------------------------------------------
# closures, inverses, composition

def _require_nondecreasing(f, what):
    if not f.is_nondecreasing():
        raise CurveError("%s must be wide-sense increasing" % what)


def nondecreasing_closure(f: PwFunction, floor=None) -> PwFunction:
    """``t -> sup_{s <= t} f(s)``; with ``floor`` the running sup starts there."""
    out = []
    best = None if floor is None else as_rational(floor)
    for p in f._pieces():
        if _is_point(p):
            t, v = p
            best = v if best is None or v > best else best
            out.append((t, best))
            continue
        a, b, r, s = p
        left = r + s * (b - a)
        if s <= 0:
            level = r if r > best else best
            out.append((a, b, level, ZERO))
            best = level
        elif r >= best:
            out.append((a, b, r, s))
            best = left
        elif left <= best:
            out.append((a, b, best, ZERO))
        else:
            xc = a + (best - r) / s
            out.extend([(a, xc, best, ZERO), (xc, best), (xc, b, best, s)])
            best = left
    return PwFunction._from_pieces(out, f.tail)


def positive_part(f: PwFunction) -> PwFunction:
    """``[f]^+ = max(f, 0)``."""
    return f.maximum(PwFunction.zero(f.horizon))


def positive_nondecreasing_closure(f: PwFunction) -> PwFunction:
    """``[f]^+_↑(t) = max(0, sup_{s <= t} f(s))``."""
    return nondecreasing_closure(f, floor=0)


def lower_pseudo_inverse(f: PwFunction) -> PwFunction:
    """``f↓(y) = inf{x | f(x) >= y}`` for ``y`` in ``[0, f(H)]`` (left-continuous)."""
    _require_nondecreasing(f, "operand of the lower pseudo-inverse")
    if f(0) < 0:
        raise CurveError("lower pseudo-inverse needs f(0) >= 0")
    # intervals (y_lo, y_hi] carrying x = x0 + k (y - y_lo)
    intervals = []
    y = ZERO

    def push(y_hi, x0, k):
        nonlocal y
        if y_hi > y:
            intervals.append((y, y_hi, x0, k))
            y = y_hi

    for p in f._pieces():
        if _is_point(p):
            push(p[1], p[0], ZERO)
        else:
            a, b, r, s = p
            push(r, a, ZERO)
            if s > 0:
                push(r + s * (b - a), a, 1 / s)
    pieces = [(ZERO, ZERO)]
    for lo, hi, x0, k in intervals:
        pieces.append((lo, hi, x0, k))
        pieces.append((hi, x0 + k * (hi - lo)))
    return PwFunction._from_pieces(pieces)


def upper_pseudo_inverse(f: PwFunction) -> PwFunction:
    """``f↑(y) = sup{x | f(x) <= y}`` for ``y`` in ``[0, f(H)]`` (right-continuous).

    The represented function is assumed to increase strictly beyond its
    horizon, so ``f↑(f(H)) = H``.  Arguments below ``f(0)`` map to 0.
    """
    _require_nondecreasing(f, "operand of the upper pseudo-inverse")
    end = f(f.horizon)
    if end < 0:
        raise CurveError("upper pseudo-inverse needs f(H) >= 0")
    # intervals [y_lo, y_hi) carrying x = x0 + k (y - y_lo)
    intervals = []
    y = ZERO

    def push(y_hi, x_ref, y_ref, k):
        nonlocal y
        if y_hi > y:
            intervals.append((y, y_hi, x_ref + k * (y - y_ref), k))
            y = y_hi

    for p in f._pieces():
        if _is_point(p):
            push(p[1], p[0], p[1], ZERO)
        else:
            a, b, r, s = p
            push(r, a, r, ZERO)
            if s > 0:
                push(r + s * (b - a), a, r, 1 / s)
    pieces = []
    for lo, hi, x0, k in intervals:
        pieces.append((lo, x0))
        pieces.append((lo, hi, x0, k))
    pieces.append((end, f.horizon))
    return PwFunction._from_pieces(pieces)


def compose(outer: PwFunction, inner: PwFunction) -> PwFunction:
    """``t -> outer(inner(t))`` for a wide-sense increasing ``inner``."""
    _require_nondecreasing(inner, "inner function of a composition")
    top = inner(inner.horizon)
    if inner(0) < 0:
        raise CurveError("inner function must be non-negative")
    if top > outer.horizon:
        raise HorizonError("outer function needed on [0, %s] but horizon is %s"
                           % (top, outer.horizon))
    ots = outer._ts
    ovs, ors, oss = outer._vs, outer._rs, outer._ss
    out = []
    for p in inner._pieces():
        if _is_point(p):
            out.append((p[0], outer(p[1])))
            continue
        a, b, r, s = p
        if s == 0:
            out.append((a, b, outer(r), ZERO))
            continue
        y_end = r + s * (b - a)
        m = bisect.bisect_right(ots, r) - 1
        t_lo = a
        y_lo = r
        while True:
            seg_start = ots[m]
            nxt = ots[m + 1] if m + 1 < len(ots) else None
            o_r = ors[m] + oss[m] * (y_lo - seg_start) if m < len(oss) else ovs[m]
            o_s = oss[m] if m < len(oss) else ZERO
            if nxt is None or nxt >= y_end:
                out.append((t_lo, b, o_r, o_s * s))
                break
            t_b = a + (nxt - r) / s
            out.append((t_lo, t_b, o_r, o_s * s))
            out.append((t_b, ovs[m + 1]))
            t_lo, y_lo = t_b, nxt
            m += 1
    return PwFunction._from_pieces(out, UNDEFINED)


# ---------------------------------------------------------------------------
# deviations and horizons

def horizontal_deviation(alpha: PwFunction, beta: PwFunction, t_max=None) -> Fraction:
    """``sup_{0 <= t <= t_max} inf{d >= 0 | alpha(t) <= beta(t + d)}``."""
    t_max = alpha.horizon if t_max is None else as_rational(t_max)
    a = alpha.restrict(t_max)
    _require_nondecreasing(beta, "service curve")
    _require_nondecreasing(a, "arrival curve")
    need = a(a.horizon)
    if beta(beta.horizon) < need:
        raise HorizonError("service curve does not reach %s within its horizon" % need)
    inv = lower_pseudo_inverse(beta)
    inv = inv.restrict(max(need, ZERO)) if need < inv.horizon else inv
    reach = compose(inv, a) - PwFunction.identity(a.horizon)
    return max(reach.sup(), ZERO)


def vertical_deviation(alpha: PwFunction, beta: PwFunction) -> Fraction:
    """``sup_t alpha(t) - beta(t)`` on the common horizon."""
    h = min(alpha.horizon, beta.horizon)
    return max((alpha.restrict(h) - beta.restrict(h)).sup(), ZERO)


def sufficient_horizon(alpha: PwFunction, beta: PwFunction) -> Fraction:
    """``inf{s > 0 | alpha(s) <= beta(s)}``.

    When the inequality already holds on ``(0, e)`` the infimum is 0; the first
    positive point where it holds at that start is returned instead, so the
    result can serve as a horizon.
    """
    h = min(alpha.horizon, beta.horizon)
    d = beta.restrict(h) - alpha.restrict(h)
    ts, vs, rs, ss = d._ts, d._vs, d._rs, d._ss
    for m in range(len(ss)):
        a, b = ts[m], ts[m + 1]
        if a > 0 and vs[m] >= 0:
            return a
        r, s = rs[m], ss[m]
        left = r + s * (b - a)
        if r >= 0:
            if a > 0:
                return a
            # holds right after 0: move to the first positive point where it holds
            if left >= 0 and vs[m + 1] >= 0:
                return b
            if s < 0 and left < 0:
                return a + r / (-s)
            return (a + b) / 2
        if s > 0 and left >= 0:
            return a + (-r) / s
    if len(ts) > 1 and vs[-1] >= 0:
        return ts[-1]
    raise HorizonError("alpha stays above beta on [0, %s]" % h)
