"""Iterative refinement of per-flow strict service curves.

Each mapping turns a set of strict service curves (one per flow) into a
better set by bounding the output of every interfering flow with
``alpha_j ⊘ beta_j``.  All work happens on a common horizon ``t*`` after which
every arrival curve sits below its service curve; arrival curves are
materialised on ``[0, 2 t*]`` so the deconvolutions are exact on ``[0, t*]``.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from ._rational import as_rational, to_decimal_str
from .arrivals import ArrivalSpec
from .drr import (
    ConfigError, DrrConfig, UnstableError, beta0, check_stable, convex_curve, find_horizon,
    gamma, gamma_convex, gamma_max_rate, gamma_min_latency, gamma_subset,
    initial_horizon_guess, max_service_curve, phi, phi_max_rate, phi_min_latency,
    subsets,
)
from .minplus import (
    PwFunction, compose, horizontal_deviation, max_pw, min_plus_convolution,
    min_plus_deconvolution, nondecreasing_closure, positive_nondecreasing_closure,
    positive_part, sufficient_horizon, sum_pw,
)

log = logging.getLogger(__name__)

METHODS = ("full", "simple", "convex-full", "convex-simple", "simple-max-service")
INITS = ("beta0", "convex", "external")
DEFAULT_SUBSET_CAP = 20
DEFAULT_DELAY_EPSILON = Fraction(1, 4_000_000)  # 0.25 us


class InvariantError(RuntimeError):
    """A refinement step broke monotonicity or the aggregate bound."""


@dataclass(frozen=True)
class HorizonPolicy:
    t_star: Fraction

    def __post_init__(self):
        object.__setattr__(self, "t_star", as_rational(self.t_star))
        if self.t_star <= 0:
            raise ValueError("t_star must be positive")


@dataclass(frozen=True)
class CurveSet:
    curves: tuple
    iteration: int
    method: str
    init: str

    def __getitem__(self, i) -> PwFunction:
        return self.curves[i]

    def __len__(self):
        return len(self.curves)

    def same_curves(self, other: "CurveSet") -> bool:
        return all(a == b for a, b in zip(self.curves, other.curves))


@dataclass(frozen=True)
class StopRule:
    """When to stop iterating.

    ``stationary`` stops once a step reproduces the previous set exactly;
    ``delay-threshold`` once no flow's delay bound improves by
    ``delay_epsilon`` or more; ``max-iterations`` after ``max_iter`` steps.
    ``max_iter`` caps the other two modes as well.

    A positive ``tolerance`` (bits) relaxes stationarity to "no curve moved by
    ``tolerance`` or more", optionally only on ``[0, window]``.  The default is
    exact equality on the whole horizon.
    """

    mode: str = "stationary"
    delay_epsilon: Fraction = DEFAULT_DELAY_EPSILON
    max_iter: int = 100
    tolerance: Fraction = Fraction(0)
    window: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "delay_epsilon", as_rational(self.delay_epsilon))
        object.__setattr__(self, "tolerance", as_rational(self.tolerance))
        if self.window is not None:
            object.__setattr__(self, "window", as_rational(self.window))
            if self.window <= 0:
                raise ValueError("window must be positive")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.mode not in ("stationary", "delay-threshold", "max-iterations"):
            raise ValueError("unknown stop mode %r" % (self.mode,))
        if self.delay_epsilon <= 0:
            raise ValueError("delay_epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")


# ---------------------------------------------------------------------------
# horizon

def system_horizon(cfg: DrrConfig, arrivals: Sequence[ArrivalSpec],
                   lower_bound: Callable[[int, Fraction], PwFunction], cap=None) -> HorizonPolicy:
    """``t* = max_j inf{s > 0 | alpha_j(s) <= beta_j(s)}`` for lower bounds ``beta_j``."""
    start = initial_horizon_guess(cfg)
    best = Fraction(0)
    for j, a in enumerate(arrivals):
        try:
            t_j = find_horizon(a, lambda h, j=j: lower_bound(j, h), start, cap)
        except UnstableError as exc:
            raise UnstableError("flow %d: %s" % (j, exc)) from None
        best = max(best, t_j)
    return HorizonPolicy(best)


# ---------------------------------------------------------------------------
# mappings

class _Context:
    """Shared per-iteration data: aggregate curve and output bounds."""

    def __init__(self, cfg, arrivals, policy: HorizonPolicy):
        if len(arrivals) != cfg.n:
            raise ConfigError("need one arrival curve per flow")
        self.cfg = cfg
        self.arrivals = list(arrivals)
        self.t = policy.t_star
        self.beta = cfg.beta(self.t)
        self.alpha_wide = [a.curve(2 * self.t) for a in self.arrivals]
        self._max_service = {}

    def output_bound(self, old: CurveSet, j) -> PwFunction:
        """``alpha_j ⊘ beta_j`` on ``[0, t*]``, sup index limited to ``t*``."""
        return min_plus_deconvolution(self.alpha_wide[j], old[j], horizon=self.t, s_max=self.t)

    def max_service_output_bound(self, old: CurveSet, i, j) -> PwFunction:
        key = (i, j)
        if key not in self._max_service:
            ms = max_service_curve(self.cfg, i, j, 2 * self.t)
            self._max_service[key] = min_plus_convolution(self.alpha_wide[j], ms)
        return min_plus_deconvolution(self._max_service[key], old[j], horizon=self.t, s_max=self.t)


def _full(ctx: _Context, old: CurveSet, i, outs, pattern, cap) -> PwFunction:
    cfg = ctx.cfg
    others = cfg.others(i)
    terms = [old[i]]
    for js in subsets(others, cap):
        rest = [outs[j] for j in others if j not in js]
        inner = ctx.beta if not rest else ctx.beta - sum_pw(rest)
        inner = positive_nondecreasing_closure(inner)
        terms.append(compose(pattern(js, inner(inner.horizon)), inner))
    return max_pw(terms)


def _simple(ctx: _Context, old: CurveSet, i, outs, phi_fn, pattern) -> PwFunction:
    cfg = ctx.cfg
    own = old[i]
    x_max = own(own.horizon)
    delta = PwFunction.zero(ctx.t)
    for j in cfg.others(i):
        interference = compose(phi_fn(j, x_max), own)
        delta = delta + positive_part(interference - outs[j])
    inner = nondecreasing_closure(ctx.beta + delta)
    return compose(pattern(inner(inner.horizon)), inner)


def full_mapping(cfg, arrivals, old: CurveSet, i, policy: HorizonPolicy,
                 cap=DEFAULT_SUBSET_CAP, _ctx=None, _outs=None) -> PwFunction:
    """``max(beta_i, max_J gamma^J_i ∘ [beta - sum_{j not in J} alpha_j ⊘ beta_j]^+_↑)``."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    outs = _outs or {j: ctx.output_bound(old, j) for j in cfg.others(i)}
    return _full(ctx, old, i, outs, lambda js, y: gamma_subset(cfg, i, js, y), cap)


def convex_full_mapping(cfg, arrivals, old: CurveSet, i, policy: HorizonPolicy,
                        cap=DEFAULT_SUBSET_CAP, _ctx=None, _outs=None) -> PwFunction:
    """Full mapping with each ``gamma^J_i`` replaced by its convex lower bound."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    outs = _outs or {j: ctx.output_bound(old, j) for j in cfg.others(i)}
    return _full(ctx, old, i, outs, lambda js, y: gamma_convex(cfg, i, y, js), cap)


def simple_mapping(cfg, arrivals, old: CurveSet, i, policy: HorizonPolicy,
                   _ctx=None, _outs=None) -> PwFunction:
    """``max(beta_i, gamma_i ∘ (beta + delta_i)_↑)`` with
    ``delta_i = sum_j [phi_{i,j} ∘ beta_i - alpha_j ⊘ beta_j]^+``."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    outs = _outs or {j: ctx.output_bound(old, j) for j in cfg.others(i)}
    new = _simple(ctx, old, i, outs, lambda j, x: phi(cfg, i, j, x),
                  lambda y: gamma(cfg, i, y))
    return old[i].maximum(new)


def convex_simple_mapping(cfg, arrivals, old: CurveSet, i, policy: HorizonPolicy,
                          _ctx=None, _outs=None) -> PwFunction:
    """Maximum of the simple mapping run with each affine bound on ``phi``."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    outs = _outs or {j: ctx.output_bound(old, j) for j in cfg.others(i)}
    by_latency = _simple(ctx, old, i, outs, lambda j, x: phi_min_latency(cfg, i, j, x),
                         lambda y: gamma_min_latency(cfg, i, y))
    by_rate = _simple(ctx, old, i, outs, lambda j, x: phi_max_rate(cfg, i, j, x),
                      lambda y: gamma_max_rate(cfg, i, y))
    return max_pw([old[i], by_latency, by_rate])


def max_service_mapping(cfg, arrivals, old: CurveSet, i, policy: HorizonPolicy,
                        _ctx=None) -> PwFunction:
    """Simple mapping whose output bounds use ``(alpha_j ⊗ gamma_{i,j}) ⊘ beta_j``,
    ``gamma_{i,j}`` being the maximal service of ``j`` while ``i`` is backlogged."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    outs = {j: ctx.max_service_output_bound(old, i, j) for j in cfg.others(i)}
    return simple_mapping(cfg, arrivals, old, i, policy, _ctx=ctx, _outs=outs)


_MAPPINGS = {
    "full": full_mapping,
    "simple": simple_mapping,
    "convex-full": convex_full_mapping,
    "convex-simple": convex_simple_mapping,
}


# ---------------------------------------------------------------------------
# iteration

@dataclass
class Refinement:
    """Outcome of :func:`iterate`."""

    sets: list
    delays: list  # per iteration, per flow
    policy: HorizonPolicy
    stop_reason: str
    log_lines: list = field(default_factory=list)

    @property
    def final(self) -> CurveSet:
        return self.sets[-1]

    @property
    def iterations(self) -> int:
        return len(self.sets) - 1


def initial_curves(cfg: DrrConfig, init: str, horizon, external=None) -> list:
    """Starting curves: ``beta0``, the convex curve, or ``max(external, base)``.

    With ``init="external"`` the base is ``beta0``; pass a ``(kind, curves)``
    pair such as ``("convex", curves)`` to pick the convex one instead.
    """
    horizon = as_rational(horizon)
    base_kind = init
    if init == "external":
        if external is None:
            raise ConfigError("init=external needs curves")
        base_kind, external = external if isinstance(external, tuple) else ("beta0", external)
    builder = beta0 if base_kind == "beta0" else convex_curve
    if base_kind not in ("beta0", "convex"):
        raise ConfigError("unknown init %r" % (init,))
    base = [builder(cfg, i, horizon) for i in range(cfg.n)]
    if external is None:
        return base
    if len(external) != cfg.n:
        raise ConfigError("need one external curve per flow")
    out = []
    for i, (b, e) in enumerate(zip(base, external)):
        if e.horizon < horizon:
            raise ConfigError("external curve for flow %d ends at %s < t* = %s"
                              % (i, e.horizon, horizon))
        out.append(b.maximum(e.restrict(horizon)))
    return out


def default_init(method: str) -> str:
    return "convex" if method.startswith("convex") else "beta0"


def _lower_bound_builder(cfg, init):
    builder = convex_curve if init == "convex" else beta0
    return lambda i, h: builder(cfg, i, h)


def curve_change(old: PwFunction, new: PwFunction, window=None) -> Fraction:
    """``sup |new - old|`` on ``[0, window]`` (whole horizon by default)."""
    h = min(old.horizon, new.horizon)
    if window is not None:
        h = min(h, window)
    d = new.restrict(h) - old.restrict(h)
    return max(d.sup(), -d.inf())


def _stationary(old: CurveSet, new: CurveSet, stop: StopRule) -> bool:
    if stop.tolerance == 0 and stop.window is None:
        return new.same_curves(old)
    for a, b in zip(old.curves, new.curves):
        moved = curve_change(a, b, stop.window)
        if moved > 0 and moved >= stop.tolerance:
            return False
    return True


def _check_step(old: CurveSet, new: list, beta: PwFunction, method: str):
    for i, (a, b) in enumerate(zip(old.curves, new)):
        if not a <= b:
            raise InvariantError("%s: curve of flow %d decreased at iteration %d"
                                 % (method, i, old.iteration + 1))
        if not b <= beta:
            raise InvariantError("%s: curve of flow %d exceeds the aggregate curve"
                                 % (method, i))


def step(cfg, arrivals, old: CurveSet, method: str, policy: HorizonPolicy,
         cap=DEFAULT_SUBSET_CAP, _ctx=None) -> list:
    """One application of ``method`` to every flow."""
    ctx = _ctx or _Context(cfg, arrivals, policy)
    if method == "simple-max-service":
        return [max_service_mapping(cfg, arrivals, old, i, policy, _ctx=ctx) for i in range(cfg.n)]
    if method not in _MAPPINGS:
        raise ConfigError("unknown method %r" % (method,))
    if method in ("full", "convex-full") and cfg.n - 1 > cap:
        raise ConfigError("%d interferers exceed the subset cap of %d; use the simple mapping"
                          % (cfg.n - 1, cap))
    outs = {j: ctx.output_bound(old, j) for j in range(cfg.n)}
    fn = _MAPPINGS[method]
    kwargs = {"cap": cap} if method in ("full", "convex-full") else {}
    return [fn(cfg, arrivals, old, i, policy, _ctx=ctx, _outs=outs, **kwargs) for i in range(cfg.n)]


def delays_of(arrivals, curves, t_star) -> list:
    """Delay bound of every flow.

    The window stops at the flow's own first crossing ``alpha <= curve``,
    which bounds its backlogged periods; later overshoots of a staircase
    arrival curve cannot belong to the same backlogged period.
    """
    out = []
    for a, c in zip(arrivals, curves):
        alpha = a.curve(t_star)
        out.append(horizontal_deviation(alpha, c, t_max=sufficient_horizon(alpha, c)))
    return out


def iterate(cfg: DrrConfig, arrivals: Sequence[ArrivalSpec], method: str = "full",
            stop: Optional[StopRule] = None, init: Optional[str] = None, external=None,
            policy: Optional[HorizonPolicy] = None, cap=DEFAULT_SUBSET_CAP,
            dump_dir=None, cap_horizon=None) -> Refinement:
    """Apply ``method`` repeatedly starting from ``init`` until ``stop`` fires.

    Every set in the returned sequence is a valid collection of strict service
    curves; a stationary repeat is not appended.
    """
    if method not in METHODS:
        raise ConfigError("unknown method %r" % (method,))
    stop = stop or StopRule()
    init = init or default_init(method)
    if init not in INITS:
        raise ConfigError("unknown init %r" % (init,))
    base_kind = init
    if init == "external" and isinstance(external, tuple):
        base_kind = external[0]
    elif init == "external":
        base_kind = "beta0"
    if policy is None:
        if cfg.is_rate_latency:
            # both possible bases grow at c Q_j / Q_tot in the long run
            check_stable(cfg, arrivals)
        policy = system_horizon(cfg, arrivals, _lower_bound_builder(cfg, base_kind), cap_horizon)
    t = policy.t_star
    ctx = _Context(cfg, arrivals, policy)
    current = CurveSet(tuple(initial_curves(cfg, init, t, external)), 0, method, init)
    sets = [current]
    delays = [delays_of(arrivals, current.curves, t)]
    lines = []

    def note(m, ds, decision):
        line = "iteration %d: %s -> %s" % (
            m, " ".join("flow%d=%ss" % (i, to_decimal_str(d, 9)) for i, d in enumerate(ds)), decision)
        lines.append(line)
        log.info(line)

    if dump_dir is not None:
        dump_curve_set(current, dump_dir)
    reason = "max-iterations"
    if stop.max_iter == 0:
        note(0, delays[0], "stop (max-iterations)")
    else:
        note(0, delays[0], "continue")
    while len(sets) - 1 < stop.max_iter:
        new = step(cfg, arrivals, current, method, policy, cap, _ctx=ctx)
        _check_step(current, new, ctx.beta, method)
        nxt = CurveSet(tuple(new), current.iteration + 1, method, init)
        if _stationary(current, nxt, stop):
            reason = "stationary"
            note(nxt.iteration, delays[-1], "stop (stationary)")
            break
        ds = delays_of(arrivals, nxt.curves, t)
        if any(b > a for a, b in zip(delays[-1], ds)):
            raise InvariantError("%s: a delay bound increased at iteration %d"
                                 % (method, nxt.iteration))
        sets.append(nxt)
        delays.append(ds)
        current = nxt
        if dump_dir is not None:
            dump_curve_set(current, dump_dir)
        if stop.mode == "delay-threshold" and all(
                a - b < stop.delay_epsilon for a, b in zip(delays[-2], ds)):
            reason = "delay-threshold"
            note(nxt.iteration, ds, "stop (delay-threshold)")
            break
        if len(sets) - 1 >= stop.max_iter:
            note(nxt.iteration, ds, "stop (max-iterations)")
            break
        note(nxt.iteration, ds, "continue")
    return Refinement(sets, delays, policy, reason, lines)


def dump_curve_set(cs: CurveSet, directory) -> list:
    """Write ``iter<m>_flow<i>.csv`` files (``t,value,right_limit,slope``)."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, f in enumerate(cs.curves):
        path = os.path.join(directory, "iter%d_flow%d.csv" % (cs.iteration, i))
        write_curve_csv(f, path)
        paths.append(path)
    return paths


def write_curve_csv(f: PwFunction, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "right_limit", "slope"])
        for seg in f.segments:
            w.writerow([str(x) for x in seg])


def read_curve_csv(path) -> PwFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    ts = [Fraction(r[0]) for r in rows]
    vs = [Fraction(r[1]) for r in rows]
    rs = [Fraction(r[2]) for r in rows[:-1]]
    ss = [Fraction(r[3]) for r in rows[:-1]]
    return PwFunction(ts, vs, rs, ss)
