"""Strict service curves of a DRR subsystem.

Flows are indexed from 0.  Every quantity is exact; amounts are in bits and
times in seconds, though nothing here depends on the units.  The interference
of flow ``j`` on flow ``i`` while ``i`` receives ``x`` bits is bounded by the
staircase :func:`phi`; its total, :func:`psi`, is inverted into the service
pattern :func:`gamma` and composed with the aggregate service curve.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from ._rational import as_rational, to_decimal_str
from .arrivals import ArrivalSpec, GroupedTokenBucket, Stair, TokenBucket
from .minplus import (
    CurveError, HorizonError, PwFunction, compose, horizontal_deviation,
    lower_pseudo_inverse, sufficient_horizon, super_additive_closure, upper_pseudo_inverse,
)

ZERO = Fraction(0)
HORIZON_CAP_ENV = "DRRCALC_HORIZON_CAP_S"
DEFAULT_HORIZON_CAP = Fraction(10)


class ConfigError(ValueError):
    """Invalid DRR subsystem description."""


class UnstableError(ValueError):
    """A flow's long-term rate exceeds what DRR can guarantee it."""


@dataclass(frozen=True)
class DrrConfig:
    """A DRR subsystem.

    The aggregate strict service curve is rate-latency ``beta_{rate, latency}``
    unless ``service_curve`` is given, in which case that curve is used (it
    must reach far enough for the requested horizons).

    Args:
        quanta: quantum of every flow.
        l_max: maximum packet size of every flow.
        rate: aggregate rate ``c``; also the maximal rate for the maximum
            service curve and the comparator.
        latency: aggregate latency ``T``.
        epsilon: smallest unit of information (1 bit by default).
    """

    quanta: tuple
    l_max: tuple
    rate: Optional[Fraction] = None
    latency: Fraction = ZERO
    epsilon: Fraction = Fraction(1)
    service_curve: Optional[PwFunction] = field(default=None, compare=False)

    def __post_init__(self):
        q = tuple(as_rational(x) for x in self.quanta)
        lm = tuple(as_rational(x) for x in self.l_max)
        object.__setattr__(self, "quanta", q)
        object.__setattr__(self, "l_max", lm)
        object.__setattr__(self, "epsilon", as_rational(self.epsilon))
        object.__setattr__(self, "latency", as_rational(self.latency))
        if self.rate is not None:
            object.__setattr__(self, "rate", as_rational(self.rate))
        if len(q) == 0 or len(q) != len(lm):
            raise ConfigError("quanta and l_max must be non-empty and of equal length")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        for i, (qi, li) in enumerate(zip(q, lm)):
            if qi <= 0:
                raise ConfigError("quantum of flow %d must be positive" % i)
            if li < self.epsilon:
                raise ConfigError("l_max of flow %d is below epsilon" % i)
            if li > qi:
                raise ConfigError("flow %d: l_max exceeds the quantum" % i)
        if self.service_curve is None:
            if self.rate is None or self.rate <= 0:
                raise ConfigError("a positive aggregate rate is required")
            if self.latency < 0:
                raise ConfigError("latency must be non-negative")
        elif not self.service_curve.is_nondecreasing():
            raise ConfigError("aggregate service curve must be wide-sense increasing")

    @property
    def n(self) -> int:
        return len(self.quanta)

    @property
    def q_tot(self) -> Fraction:
        return sum(self.quanta, ZERO)

    def d_max(self, i) -> Fraction:
        return self.l_max[i] - self.epsilon

    def others(self, i) -> list:
        return [j for j in range(self.n) if j != i]

    @property
    def is_rate_latency(self) -> bool:
        return self.service_curve is None

    def beta(self, horizon) -> PwFunction:
        """Aggregate strict service curve on ``[0, horizon]``."""
        horizon = as_rational(horizon)
        if self.service_curve is None:
            return PwFunction.rate_latency(self.rate, self.latency, horizon)
        if self.service_curve.horizon < horizon:
            raise HorizonError("aggregate service curve known only up to %s"
                               % self.service_curve.horizon)
        return self.service_curve.restrict(horizon)

    def max_guaranteed_rate(self, i) -> Fraction:
        """Long-term rate DRR guarantees flow ``i``: ``c Q_i / Q_tot``."""
        if self.rate is None:
            raise ConfigError("needs the aggregate rate")
        return self.rate * self.quanta[i] / self.q_tot


def _subset(cfg, i, subset):
    if subset is None:
        return cfg.others(i)
    subset = sorted(set(subset))
    if i in subset or any(j < 0 or j >= cfg.n for j in subset):
        raise ConfigError("interferer subset must be drawn from the other flows")
    return subset


# ---------------------------------------------------------------------------
# interference staircases

def phi_value(cfg: DrrConfig, i, j, x) -> Fraction:
    """``floor((x + d_i) / Q_i) Q_j + Q_j + d_j``."""
    qi, qj = cfg.quanta[i], cfg.quanta[j]
    k = (as_rational(x) + cfg.d_max(i)) // qi
    return k * qj + qj + cfg.d_max(j)


def psi_value(cfg: DrrConfig, i, x, subset=None) -> Fraction:
    x = as_rational(x)
    return x + sum((phi_value(cfg, i, j, x) for j in _subset(cfg, i, subset)), ZERO)


def psi_left_value(cfg: DrrConfig, i, x, subset=None) -> Fraction:
    """Left limit ``psi_i(x-)`` (equal to ``psi_i(x)`` away from steps)."""
    x = as_rational(x)
    qi, di = cfg.quanta[i], cfg.d_max(i)
    k = -((-(x + di)) // qi) - 1  # ceil((x + d_i) / Q_i) - 1
    k = max(k, 0) if x > 0 else 0
    return x + sum((k * cfg.quanta[j] + cfg.quanta[j] + cfg.d_max(j))
                   for j in _subset(cfg, i, subset))


def _staircase(cfg, i, x_max, slope, step, base):
    """``slope * x + floor((x + d_i)/Q_i) * step + base`` on ``[0, x_max]``."""
    x_max = as_rational(x_max)
    qi, di = cfg.quanta[i], cfg.d_max(i)
    pieces = [(ZERO, base)]
    start, level = ZERO, base
    k = 1
    while True:
        nxt = k * qi - di
        end = min(nxt, x_max)
        if end > start:
            pieces.append((start, end, level, slope))
        left = level + slope * (end - start)
        if nxt > x_max:
            if end > start:
                pieces.append((end, left))
            break
        level = left + step
        pieces.append((end, level))
        start = end
        if end == x_max:
            break
        k += 1
    return PwFunction._from_pieces(pieces)


def phi(cfg: DrrConfig, i, j, x_max) -> PwFunction:
    """Interference staircase of ``j`` on ``i`` on ``[0, x_max]`` (right-continuous)."""
    if i == j:
        raise ConfigError("phi needs two distinct flows")
    qj = cfg.quanta[j]
    return _staircase(cfg, i, x_max, ZERO, qj, qj + cfg.d_max(j))


def psi(cfg: DrrConfig, i, x_max, subset=None) -> PwFunction:
    """``x + sum_{j in subset} phi_{i,j}(x)`` (all other flows by default)."""
    js = _subset(cfg, i, subset)
    step = sum((cfg.quanta[j] for j in js), ZERO)
    base = sum((cfg.quanta[j] + cfg.d_max(j) for j in js), ZERO)
    return _staircase(cfg, i, x_max, Fraction(1), step, base)


def smoothed_stair(a, b, horizon) -> PwFunction:
    """``(lambda_1 ⊗ nu_{a,b})``: slope 1 for ``a``, flat until ``b``, repeating."""
    a, b, horizon = as_rational(a), as_rational(b), as_rational(horizon)
    if not 0 < a <= b:
        raise CurveError("smoothed stair needs 0 < a <= b")
    if a == b:
        return PwFunction.identity(horizon)
    pts = [(ZERO, ZERO)]
    k = 0
    while pts[-1][0] < horizon:
        pts.append((k * b + a, (k + 1) * a))
        pts.append(((k + 1) * b, (k + 1) * a))
        k += 1
    return _points_on(pts, horizon)


def _points_on(pts, horizon):
    """Continuous interpolation of increasing points, cut at ``horizon``."""
    clean = [pts[0]]
    for t, v in pts[1:]:
        if t > clean[-1][0]:
            clean.append((t, v))
    out = []
    for k, (t, v) in enumerate(clean):
        if t >= horizon:
            if k == 0:
                return PwFunction.constant(v, horizon)
            t0, v0 = clean[k - 1]
            out.append((horizon, v0 + (v - v0) * (horizon - t0) / (t - t0)))
            break
        out.append((t, v))
    else:
        out.append((horizon, out[-1][1]))
    if len(out) == 1:
        return PwFunction.constant(out[0][1], horizon)
    return PwFunction.from_points(out)


def gamma_subset(cfg: DrrConfig, i, subset, y_max) -> PwFunction:
    """Service pattern of ``i`` against the interferers in ``subset``.

    Lower pseudo-inverse of :func:`psi` restricted to ``subset``; the period of
    the repeating part is ``Q_i + sum_{j in subset} Q_j``.
    """
    js = _subset(cfg, i, subset)
    y_max = as_rational(y_max)
    qi, di = cfg.quanta[i], cfg.d_max(i)
    step = sum((cfg.quanta[j] for j in js), ZERO)
    base = sum((cfg.quanta[j] + cfg.d_max(j) for j in js), ZERO)
    first = qi - di
    pts = [(ZERO, ZERO), (base, ZERO), (base + first, first)]
    start = base + first + step  # = psi(Q_i - d_i)
    level = first
    while pts[-1][0] < y_max:
        pts.append((start, level))
        pts.append((start + qi, level + qi))
        start += qi + step
        level += qi
    return _points_on(pts, y_max)


def gamma(cfg: DrrConfig, i, y_max) -> PwFunction:
    return gamma_subset(cfg, i, None, y_max)


def gamma_by_formula(cfg: DrrConfig, i, y_max, subset=None) -> PwFunction:
    """Same curve assembled from the generic operators, for cross-checks."""
    js = _subset(cfg, i, subset)
    y_max = as_rational(y_max)
    qi, di = cfg.quanta[i], cfg.d_max(i)
    q_tot = qi + sum((cfg.quanta[j] for j in js), ZERO)
    base = sum((cfg.quanta[j] + cfg.d_max(j) for j in js), ZERO)
    ident = PwFunction.identity(y_max)
    shifted = (ident - psi_value(cfg, i, qi - di, js)).maximum(PwFunction.zero(y_max))
    stair_part = compose(smoothed_stair(qi, q_tot, y_max), shifted)
    head = (ident - base).maximum(PwFunction.zero(y_max)).minimum(PwFunction.constant(qi - di, y_max))
    return stair_part + head


# ---------------------------------------------------------------------------
# strict service curves for the flow of interest

def _compose_with_beta(cfg, pattern_fn, horizon):
    beta = cfg.beta(horizon)
    top = beta(beta.horizon)
    return compose(pattern_fn(top), beta)


def beta0(cfg: DrrConfig, i, horizon, closure=False) -> PwFunction:
    """``gamma_i ∘ beta`` on ``[0, horizon]``.

    The result is super-additive when ``beta`` is rate-latency.  For a general
    aggregate curve ``closure=True`` replaces it by its super-additive closure,
    which is still a strict service curve.
    """
    curve = _compose_with_beta(cfg, lambda y: gamma(cfg, i, y), horizon)
    return super_additive_closure(curve) if closure else curve


def phi_max_rate_params(cfg, i, j):
    """``(slope, offset)`` of ``(Q_j/Q_i)(x + d_i) + Q_j + d_j``."""
    qi, qj = cfg.quanta[i], cfg.quanta[j]
    return qj / qi, qj * cfg.d_max(i) / qi + qj + cfg.d_max(j)


def phi_min_latency_params(cfg, i, j):
    """``(slope, offset)`` of ``Q_j/(Q_i - d_i) x + Q_j + d_j``."""
    qi, qj = cfg.quanta[i], cfg.quanta[j]
    return qj / (qi - cfg.d_max(i)), qj + cfg.d_max(j)


def phi_max_rate(cfg, i, j, x_max) -> PwFunction:
    s, o = phi_max_rate_params(cfg, i, j)
    return PwFunction.affine(s, o, x_max)


def phi_min_latency(cfg, i, j, x_max) -> PwFunction:
    s, o = phi_min_latency_params(cfg, i, j)
    return PwFunction.affine(s, o, x_max)


def phi_concave(cfg, i, j, x_max) -> PwFunction:
    return phi_max_rate(cfg, i, j, x_max).minimum(phi_min_latency(cfg, i, j, x_max))


def gamma_max_rate_params(cfg, i, subset=None):
    """``(R, T)`` of the rate-latency pattern obtained from the max-rate bound."""
    js = _subset(cfg, i, subset)
    q_tot = cfg.quanta[i] + sum((cfg.quanta[j] for j in js), ZERO)
    return cfg.quanta[i] / q_tot, sum((phi_max_rate_params(cfg, i, j)[1] for j in js), ZERO)


def gamma_min_latency_params(cfg, i, subset=None):
    js = _subset(cfg, i, subset)
    qi, di = cfg.quanta[i], cfg.d_max(i)
    q_tot = qi + sum((cfg.quanta[j] for j in js), ZERO)
    return (qi - di) / (q_tot - di), sum((phi_min_latency_params(cfg, i, j)[1] for j in js), ZERO)


def gamma_max_rate(cfg, i, y_max, subset=None) -> PwFunction:
    r, t = gamma_max_rate_params(cfg, i, subset)
    return PwFunction.rate_latency(r, t, y_max)


def gamma_min_latency(cfg, i, y_max, subset=None) -> PwFunction:
    r, t = gamma_min_latency_params(cfg, i, subset)
    return PwFunction.rate_latency(r, t, y_max)


def gamma_convex(cfg, i, y_max, subset=None) -> PwFunction:
    return gamma_max_rate(cfg, i, y_max, subset).maximum(gamma_min_latency(cfg, i, y_max, subset))


def boyer_curve(cfg: DrrConfig, i, horizon) -> PwFunction:
    """Rate-latency curve of the earlier DRR analysis: ``gamma^maxRate ∘ beta``."""
    return _compose_with_beta(cfg, lambda y: gamma_max_rate(cfg, i, y), horizon)


def boyer_params(cfg: DrrConfig, i):
    """``(R_i, T_i)`` as printed for the earlier analysis (curve ``beta_{R c, T + T_i / c}``)."""
    others = cfg.others(i)
    di, qi = cfg.d_max(i), cfg.quanta[i]
    t = (sum((cfg.d_max(j) for j in others), ZERO)
         + (1 + di / qi) * sum((cfg.quanta[j] for j in others), ZERO))
    return qi / cfg.q_tot, t


def convex_curve(cfg: DrrConfig, i, horizon, subset=None) -> PwFunction:
    return _compose_with_beta(cfg, lambda y: gamma_convex(cfg, i, y, subset), horizon)


def lower_bound_from_phi(cfg: DrrConfig, i, phi_primes: Mapping, horizon) -> PwFunction:
    """Service curve built from upper bounds ``phi'_{i,j} >= phi_{i,j}``.

    ``phi_primes`` maps each other flow to a wide-sense increasing
    :class:`PwFunction` (or a builder ``x_max -> PwFunction``) covering the
    service-domain range ``[0, beta(horizon)]``.
    """
    beta = cfg.beta(horizon)
    x_max = beta(beta.horizon)
    total = PwFunction.identity(x_max)
    for j in cfg.others(i):
        if j not in phi_primes:
            raise ConfigError("missing phi' for flow %d" % j)
        fj = phi_primes[j]
        fj = fj(x_max) if callable(fj) and not isinstance(fj, PwFunction) else fj
        if fj.horizon < x_max:
            raise HorizonError("phi' for flow %d must cover [0, %s]" % (j, x_max))
        fj = fj.restrict(x_max)
        if not fj.is_nondecreasing():
            raise CurveError("phi' for flow %d is not wide-sense increasing" % j)
        if not phi(cfg, i, j, x_max) <= fj:
            raise CurveError("phi' for flow %d does not dominate phi" % j)
        total = total + fj
    pattern = lower_pseudo_inverse(total)
    return compose(pattern.restrict(x_max), beta)


# ---------------------------------------------------------------------------
# maximum service curve of an interferer

def psi_bar_value(cfg, i, j, x) -> Fraction:
    """``x + ceil((x - (Q_j + d_j)) / Q_j) Q_i - d_i``."""
    x = as_rational(x)
    qi, qj = cfg.quanta[i], cfg.quanta[j]
    k = -((-(x - qj - cfg.d_max(j))) // qj)
    return x + k * qi - cfg.d_max(i)


def psi_bar(cfg, i, j, x_max) -> PwFunction:
    """Left-continuous staircase bound on total service versus ``j``'s service."""
    x_max = as_rational(x_max)
    qi, qj, di = cfg.quanta[i], cfg.quanta[j], cfg.d_max(i)
    edge0 = qj + cfg.d_max(j)
    pieces = [(ZERO, psi_bar_value(cfg, i, j, 0))]
    cur = ZERO
    while cur < x_max:
        nxt = edge0 + qj * ((cur - edge0) // qj + 1)
        k = -((-(nxt - edge0)) // qj)  # ceiling term on (cur, nxt]
        end = min(nxt, x_max)
        pieces.append((cur, end, cur + k * qi - di, Fraction(1)))
        pieces.append((end, end + k * qi - di))
        cur = end
    return PwFunction._from_pieces(pieces)


def psi_bar_upper_inverse(cfg, i, j, y_max) -> PwFunction:
    """Closed form of the upper pseudo-inverse of :func:`psi_bar`."""
    y_max = as_rational(y_max)
    qi, qj, dj, di = cfg.quanta[i], cfg.quanta[j], cfg.d_max(j), cfg.d_max(i)
    ident = PwFunction.identity(y_max)
    shifted = (ident - psi_bar_value(cfg, i, j, qj + dj)).maximum(PwFunction.zero(y_max))
    stair_part = compose(smoothed_stair(qj, qi + qj, y_max), shifted)
    head = (ident + di).minimum(PwFunction.constant(qj + dj, y_max))
    return stair_part + head


def max_service_curve(cfg: DrrConfig, i, j, horizon, use_formula=False) -> PwFunction:
    """Maximal service curve ``min(ct, psi_bar^↑(ct))`` of ``j`` while ``i`` is backlogged."""
    if cfg.rate is None:
        raise ConfigError("maximum service curve needs the maximal rate c")
    horizon = as_rational(horizon)
    c = cfg.rate
    y_max = c * horizon
    line = PwFunction.identity(horizon).scale(c)
    if use_formula:
        inv = psi_bar_upper_inverse(cfg, i, j, y_max)
    else:
        x_max = y_max + cfg.quanta[i] + cfg.d_max(i) + cfg.quanta[j]
        inv = upper_pseudo_inverse(psi_bar(cfg, i, j, x_max))
        inv = inv.restrict(y_max)
    return line.minimum(compose(inv, line))


# ---------------------------------------------------------------------------
# delay bounds

def horizon_cap() -> Fraction:
    raw = os.environ.get(HORIZON_CAP_ENV)
    return as_rational(raw) if raw else DEFAULT_HORIZON_CAP


def initial_horizon_guess(cfg: DrrConfig) -> Fraction:
    if cfg.rate is not None:
        return cfg.latency + 2 * cfg.q_tot / cfg.rate
    return cfg.service_curve.horizon / 8


def find_horizon(alpha: ArrivalSpec, curve_builder, start, cap=None) -> Fraction:
    """Smallest doubling of ``start`` on which ``alpha`` meets the built curve.

    Returns the sufficient horizon ``inf{s > 0 | alpha(s) <= beta(s)}``.
    """
    cap = horizon_cap() if cap is None else as_rational(cap)
    h = as_rational(start)
    while True:
        try:
            return sufficient_horizon(alpha.curve(h), curve_builder(h))
        except HorizonError:
            if h >= cap:
                raise UnstableError("no sufficient horizon below the cap of %s s" % cap)
            h = min(2 * h, cap)


def delay_bound(alpha: ArrivalSpec, curve_builder, start, cap=None) -> Fraction:
    """``h(alpha, beta)`` with ``beta`` rebuilt on a sufficient horizon."""
    t_star = find_horizon(alpha, curve_builder, start, cap)
    beta = curve_builder(t_star)
    return horizontal_deviation(alpha.curve(t_star), beta)


def check_stable(cfg: DrrConfig, arrivals: Sequence[ArrivalSpec]):
    """Reject flows whose long-term rate reaches their guaranteed share ``c Q_i / Q_tot``."""
    if cfg.rate is None:
        return
    for i, a in enumerate(arrivals):
        share = cfg.max_guaranteed_rate(i)
        if a.long_term_rate >= share:
            raise UnstableError("flow %d: long-term rate %s is not below c Q_i / Q_tot = %s"
                                % (i, to_decimal_str(a.long_term_rate, 6), to_decimal_str(share, 6)))


def _check_rate(cfg, i, rate):
    if rate > cfg.max_guaranteed_rate(i):
        raise UnstableError("flow %d rate %s exceeds c Q_i / Q_tot = %s"
                            % (i, rate, cfg.max_guaranteed_rate(i)))


def closed_form_delay(cfg: DrrConfig, i, arrival: ArrivalSpec) -> Fraction:
    """Delay bound of ``beta0`` in closed form for rate-latency aggregates.

    Covers token-bucket, grouped token-bucket (link rate at least ``c``) and
    stair arrival curves.  Values coincide with :func:`horizontal_deviation`
    on ``beta0``; where a curve value sits exactly on a step of ``psi`` the
    left limit of ``psi`` is used.
    """
    if not cfg.is_rate_latency:
        raise ConfigError("closed forms need a rate-latency aggregate")
    c, lat = cfg.rate, cfg.latency
    qi, di = cfg.quanta[i], cfg.d_max(i)
    _check_rate(cfg, i, arrival.long_term_rate)

    def psi_(x):
        return psi_value(cfg, i, x)

    def to_next_step(x):
        return qi - (x + di) % qi

    if isinstance(arrival, TokenBucket):
        r, b = arrival.rate, arrival.burst
        if r == 0:
            return lat + psi_left_value(cfg, i, b) / c
        tau = to_next_step(b) / r
        return lat + max(psi_(b) / c, psi_(b + r * tau) / c - tau)
    if isinstance(arrival, GroupedTokenBucket):
        lc, lm, r, b = arrival.link_rate, arrival.l_max, arrival.rate, arrival.burst
        if lc < c:
            raise ConfigError("grouped closed form needs a link rate of at least c")
        if b <= lm:
            return closed_form_delay(cfg, i, TokenBucket(r, b))
        tau = (b - lm) / (lc - r)
        at_tau = lc * tau + lm
        first = psi_(at_tau) / c - tau
        if r == 0:
            return lat + first
        nxt = tau + to_next_step(at_tau) / r
        return lat + max(first, psi_(at_tau + r * (nxt - tau)) / c - nxt)
    if isinstance(arrival, Stair):
        if arrival.shift != 0:
            raise ConfigError("closed form covers unshifted stairs only")
        a, per = arrival.height, arrival.period
        gap = qi * (-((-(a + di)) // qi)) - (a + di)  # room left before the next step
        k = gap // a + 1
        tau = k * per
        return lat + max(psi_left_value(cfg, i, a) / c,
                         psi_left_value(cfg, i, (k + 1) * a) / c - tau)
    raise ConfigError("no closed form for %s" % type(arrival).__name__)


def beta0_delay(cfg: DrrConfig, i, arrival: ArrivalSpec, cap=None) -> Fraction:
    """``h(alpha_i, beta0_i)`` computed on curves."""
    return delay_bound(arrival, lambda h: beta0(cfg, i, h), initial_horizon_guess(cfg), cap)


def boyer_delay(cfg: DrrConfig, i, arrival: ArrivalSpec, cap=None) -> Fraction:
    return delay_bound(arrival, lambda h: boyer_curve(cfg, i, h), initial_horizon_guess(cfg), cap)


def convex_delay(cfg: DrrConfig, i, arrival: ArrivalSpec, cap=None) -> Fraction:
    return delay_bound(arrival, lambda h: convex_curve(cfg, i, h), initial_horizon_guess(cfg), cap)


def soni_delay(cfg: DrrConfig, i, arrivals: Sequence[ArrivalSpec], cap=None) -> Fraction:
    """Comparator from an earlier DRR analysis; it is known to be optimistic.

    ``D_B - C`` with ``D_B`` the rate-latency bound and
    ``C = sum_{j != i} [S_j(D_B) - alpha_j(D_B)]^+ / c``.
    """
    if not cfg.is_rate_latency or cfg.latency != 0:
        raise ConfigError("the comparator assumes a constant-rate server")
    c = cfg.rate
    d_b = boyer_delay(cfg, i, arrivals[i], cap)
    others = cfg.others(i)
    small = sum((cfg.quanta[j] + cfg.d_max(j) for j in others), ZERO) / c
    big = small + (cfg.quanta[i] - cfg.d_max(i) + sum((cfg.quanta[j] for j in others), ZERO)) / c
    correction = ZERO
    for j in others:
        s_j = ZERO
        if d_b >= small:
            s_j += cfg.quanta[j] + cfg.d_max(j)
        if d_b >= big:
            s_j += cfg.quanta[j] * (1 + (c * (d_b - big)) // cfg.q_tot)
        a_j = arrivals[j].curve(d_b)(d_b) if d_b > 0 else ZERO
        correction += max(s_j - a_j, ZERO)
    return d_b - correction / c


def subsets(items: Iterable, cap=None) -> list:
    """All subsets of ``items``, largest first; ``cap`` bounds the item count."""
    items = list(items)
    if cap is not None and len(items) > cap:
        raise ConfigError("%d interferers exceed the subset enumeration cap of %d"
                          % (len(items), cap))
    out = []
    for k in range(len(items), -1, -1):
        out.extend(combinations(items, k))
    return out
