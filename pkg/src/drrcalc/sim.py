"""Exact packet-level DRR simulator.

The scheduler replays the classic deficit round-robin loop: on each visit a
queue earns its quantum, sends head-of-line packets while the deficit covers
them and forfeits the deficit when it empties.  The server output is a fluid
process given by a :class:`ServiceModel`; a packet is transmitted when the
cumulative service offered since the start of the busy period has grown by
its size.  All times, sizes and deficits are exact rationals.

Simultaneous arrivals are ordered by an integer ``rank``.  At an instant the
simulator first completes the packet in service, then enqueues arrivals of
rank <= 0, then lets the scheduler decide; every later rank group is
enqueued and followed by another decision.  This realises "shortly before"
and "shortly after" orderings without inventing a numeric offset.
"""

from __future__ import annotations

import bisect
import csv
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import groupby
from math import floor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._rational import as_rational, rational_json
from .arrivals import ArrivalSpec, GroupedTokenBucket, Stair, TokenBucket
from .drr import DrrConfig, beta0, beta0_delay, boyer_delay, soni_delay
from .minplus import PwFunction, sum_pw

ZERO = Fraction(0)


class SimulationError(ValueError):
    """Malformed input to the simulator."""


@dataclass(frozen=True)
class PacketEvent:
    flow: int
    size: Fraction
    arrival_time: Fraction
    rank: int = 0

    def __post_init__(self):
        object.__setattr__(self, "size", as_rational(self.size))
        object.__setattr__(self, "arrival_time", as_rational(self.arrival_time))


# -- service models

class _Capacity:
    """Continuous non-decreasing service offered since a busy-period start."""

    def __init__(self, points, tail_slope):
        self.ts = [p[0] for p in points]
        self.ys = [p[1] for p in points]
        self.tail = as_rational(tail_slope)

    def value(self, t):
        if t <= self.ts[0]:
            return self.ys[0]
        m = bisect.bisect_right(self.ts, t) - 1
        if m == len(self.ts) - 1:
            return self.ys[-1] + self.tail * (t - self.ts[-1])
        t0, t1 = self.ts[m], self.ts[m + 1]
        y0, y1 = self.ys[m], self.ys[m + 1]
        return y0 + (y1 - y0) * (t - t0) / (t1 - t0)

    def first_reach(self, y):
        k = bisect.bisect_left(self.ys, y)
        if k == 0:
            return self.ts[0]
        if k < len(self.ys):
            t0, y0 = self.ts[k - 1], self.ys[k - 1]
            return t0 + (y - y0) * (self.ts[k] - t0) / (self.ys[k] - y0)
        if self.tail <= 0:
            raise SimulationError("service model stalls at %s bits" % self.ys[-1])
        return self.ts[-1] + (y - self.ys[-1]) / self.tail

    def kinks_between(self, t0, t1):
        lo = bisect.bisect_right(self.ts, t0)
        hi = bisect.bisect_left(self.ts, t1)
        return self.ts[lo:hi]


def _check_service_curve(curve: PwFunction):
    if not curve.is_continuous() or not curve.is_nondecreasing() or curve(0) != 0:
        raise SimulationError("service curve must be continuous, non-decreasing and 0 at 0")


def _curve_points(curve: PwFunction, start, offset=ZERO):
    return [(start + t, offset + v) for t, v in zip(curve.breakpoints, (curve(t) for t in curve.breakpoints))]


def _last_slope(curve: PwFunction):
    return curve.segments[-2][3] if len(curve) > 1 else ZERO


class ServiceModel:
    kind = "abstract"

    def capacity(self, start) -> _Capacity:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRate(ServiceModel):
    rate: Fraction
    kind = "constant-rate"

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rational(self.rate))
        if self.rate <= 0:
            raise SimulationError("rate must be positive")

    def capacity(self, start):
        return _Capacity([(start, ZERO)], self.rate)

    def to_json(self):
        return {"kind": self.kind, "rate_bps": rational_json(self.rate)}


@dataclass(frozen=True)
class GuaranteedCurve(ServiceModel):
    """Every busy period receives exactly ``curve`` (extended at its last slope)."""

    curve: PwFunction
    kind = "guaranteed-curve"

    def __post_init__(self):
        _check_service_curve(self.curve)

    def capacity(self, start):
        return _Capacity(_curve_points(self.curve, start), _last_slope(self.curve))

    def to_json(self):
        return {"kind": self.kind, "breakpoints": len(self.curve)}


@dataclass(frozen=True)
class TwoPhase(ServiceModel):
    """Rate ``rate`` until ``switch``, then exactly ``curve`` measured from ``switch``.

    A busy period starting at or after ``switch`` receives ``curve``.
    """

    rate: Fraction
    switch: Fraction
    curve: PwFunction
    kind = "two-phase"

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rational(self.rate))
        object.__setattr__(self, "switch", as_rational(self.switch))
        _check_service_curve(self.curve)
        steepest = max((seg[3] for seg in self.curve.segments), default=ZERO)
        if self.rate < steepest:
            raise SimulationError("rate %s is below the slope %s of the curve" % (self.rate, steepest))

    def capacity(self, start):
        start = as_rational(start)
        if start >= self.switch:
            return _Capacity(_curve_points(self.curve, start), _last_slope(self.curve))
        base = self.rate * (self.switch - start)
        pts = [(start, ZERO)] + _curve_points(self.curve, self.switch, base)
        return _Capacity(pts, _last_slope(self.curve))

    def to_json(self):
        return {"kind": self.kind, "rate_bps": rational_json(self.rate),
                "switch_s": rational_json(self.switch), "breakpoints": len(self.curve)}


# -- trajectory

@dataclass(frozen=True)
class Transmission:
    flow: int
    size: Fraction
    arrival: Fraction
    start: Fraction
    end: Fraction
    y_start: Fraction
    capacity: _Capacity = field(repr=False, compare=False)


@dataclass(frozen=True)
class Visit:
    """One emission opportunity: ``served`` bits, deficit left at its end."""

    flow: int
    start: Fraction
    end: Fraction
    served: Fraction
    residual: Fraction
    backlogged_after: bool


@dataclass
class Trajectory:
    cfg: DrrConfig
    events: list
    transmissions: list
    visits: list
    periods: list
    log: list
    end: Fraction

    def departures(self, flow=None):
        return [(x.end, x.flow, x.size) for x in self.transmissions
                if x.end <= self.end and (flow is None or x.flow == flow)]

    def output(self, flow) -> PwFunction:
        """Cumulative output ``D_flow`` on ``[0, end]``."""
        pts = [(ZERO, ZERO)]
        done = ZERO
        for x in self.transmissions:
            if x.flow != flow or x.start >= self.end:
                continue
            stop = min(x.end, self.end)
            if x.start > pts[-1][0]:
                pts.append((x.start, done))
            for u in x.capacity.kinks_between(x.start, stop):
                pts.append((u, done + x.capacity.value(u) - x.y_start))
            part = x.size if stop == x.end else x.capacity.value(stop) - x.y_start
            pts.append((stop, done + part))
            done += part
        if self.end == 0:
            return PwFunction.zero(0)
        return PwFunction.from_points(pts, self.end)

    def aggregate_output(self) -> PwFunction:
        return sum_pw([self.output(i) for i in range(self.cfg.n)], self.end)

    def backlogged_periods(self, flow=None):
        """Maximal intervals ``[start, end]`` during which the flow (or system) is backlogged."""
        if flow is not None:
            return [(a, b) for f, a, b in self.periods if f == flow]
        spans = sorted((a, b) for _f, a, b in self.periods)
        merged = []
        for a, b in spans:
            if merged and a < merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return merged

    def packet_delay(self, flow, k):
        """Delay of the ``k``-th packet (0-based) of ``flow``."""
        own = [x for x in self.transmissions if x.flow == flow]
        return own[k].end - own[k].arrival

    def write_csv(self, path, params: Optional[dict] = None):
        """CSV ``time,flow,event,size,deficit_after`` plus a JSON sidecar."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "flow", "event", "size", "deficit_after"])
            for t, flow, event, size, deficit in self.log:
                w.writerow([str(t), flow, event, str(size), str(deficit)])
        side = {"quanta_bits": [rational_json(q) for q in self.cfg.quanta],
                "l_max_bits": [rational_json(v) for v in self.cfg.l_max],
                "epsilon_bits": rational_json(self.cfg.epsilon),
                "end_s": rational_json(self.end),
                "packets": len(self.events)}
        if params:
            side["params"] = params
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
        return path


def simulate(cfg: DrrConfig, events: Sequence[PacketEvent], model: ServiceModel, t_end=None) -> Trajectory:
    n = cfg.n
    for ev in events:
        if not 0 <= ev.flow < n:
            raise SimulationError("unknown flow %r" % (ev.flow,))
        if ev.size < cfg.epsilon or ev.size > cfg.l_max[ev.flow]:
            raise SimulationError("packet of %s bits violates the size bounds of flow %d"
                                  % (ev.size, ev.flow))
        if ev.arrival_time < 0:
            raise SimulationError("negative arrival time")
    events = sorted(events, key=lambda ev: (ev.arrival_time, ev.rank))
    limit = as_rational(t_end) if t_end is not None else None

    queues = [deque() for _ in range(n)]
    deficit = [ZERO] * n
    opened = [None] * n
    periods, visits, log, transmissions = [], [], [], []
    st = {"cur": None, "ptr": 0, "cap": None, "tx": None, "visit": None}

    def close_visit(t):
        f, start, served = st["visit"]
        visits.append(Visit(f, start, t, served, deficit[f], bool(queues[f])))
        st["visit"] = None

    def start_send(t, f):
        ev = queues[f].popleft()
        if st["cap"] is None:
            st["cap"] = model.capacity(t)
        cap = st["cap"]
        y0 = cap.value(t)
        deficit[f] -= ev.size
        st["tx"] = Transmission(f, ev.size, ev.arrival_time, t, cap.first_reach(y0 + ev.size), y0, cap)
        g, start, served = st["visit"]
        st["visit"] = (g, start, served + ev.size)

    def decide(t):
        if st["tx"] is not None:
            return
        cur = st["cur"]
        if cur is not None:
            q = queues[cur]
            if q and q[0].size <= deficit[cur]:
                start_send(t, cur)
                return
            if not q:
                deficit[cur] = ZERO
            close_visit(t)
            st["ptr"] = (cur + 1) % n
            st["cur"] = None
        for k in range(n):
            j = (st["ptr"] + k) % n
            if queues[j]:
                deficit[j] += cfg.quanta[j]
                st["cur"] = j
                st["visit"] = (j, t, ZERO)
                # l_max <= Q, so the head always fits
                start_send(t, j)
                return
        st["cap"] = None

    def close_periods(t):
        for f in range(n):
            if opened[f] is not None and not queues[f] and (st["tx"] is None or st["tx"].flow != f):
                periods.append((f, opened[f], t))
                opened[f] = None

    def enqueue(t, group):
        for ev in group:
            if opened[ev.flow] is None:
                opened[ev.flow] = t
            queues[ev.flow].append(ev)
            log.append((t, ev.flow, "arrive", ev.size, deficit[ev.flow]))

    k = 0
    now = ZERO
    while True:
        nxt = []
        if st["tx"] is not None:
            nxt.append(st["tx"].end)
        if k < len(events):
            nxt.append(events[k].arrival_time)
        if not nxt:
            break
        t = min(nxt)
        if limit is not None and t > limit:
            break
        now = t
        tx = st["tx"]
        if tx is not None and tx.end == t:
            transmissions.append(tx)
            st["tx"] = None
            log.append((t, tx.flow, "depart", tx.size, deficit[tx.flow]))
        j = k
        while j < len(events) and events[j].arrival_time == t:
            j += 1
        batch = events[k:j]
        k = j
        groups = [list(g) for _r, g in groupby(batch, key=lambda ev: ev.rank)]
        while groups and groups[0][0].rank <= 0:
            enqueue(t, groups.pop(0))
        decide(t)
        close_periods(t)
        for g in groups:
            enqueue(t, g)
            decide(t)
    end = limit if limit is not None else now
    if st["tx"] is not None:
        transmissions.append(st["tx"])
    for f in range(n):
        if opened[f] is not None:
            periods.append((f, opened[f], end))
    periods.sort(key=lambda p: (p[1], p[0]))
    return Trajectory(cfg, list(events), transmissions, visits, periods, log, end)


# -- traffic generation

def _random_size(rng, cap, eps):
    units = int(cap // eps)
    return eps * rng.randint(1, units) if units >= 1 else None


def conforming_events(arrivals: Sequence[ArrivalSpec], l_max: Sequence, epsilon, rng, max_packets=200,
                      greedy=Fraction(1, 2), t_max=None, max_rank=0) -> list:
    """Random packet arrivals that respect every flow's arrival curve.

    Packet sizes are random multiples of epsilon up to ``l_max``.  Each packet
    is sent as early as the curve allows with probability ``greedy`` and
    after a random extra gap otherwise.  Token buckets are tracked exactly;
    a grouped token bucket also spaces packets by their transmission time
    on the input link; a stair emits at most one packet per period.
    Arrivals of the flows are interleaved until ``max_packets`` in total.
    """
    eps = as_rational(epsilon)
    l_max = [as_rational(x) for x in l_max]
    n = len(arrivals)
    state = []
    for i, a in enumerate(arrivals):
        if isinstance(a, (TokenBucket, GroupedTokenBucket)):
            cap = min(l_max[i], a.burst)
            if isinstance(a, GroupedTokenBucket):
                cap = min(cap, a.l_max)
            state.append({"kind": "bucket", "time": ZERO, "tokens": a.burst, "cap": cap})
        elif isinstance(a, Stair):
            state.append({"kind": "stair", "time": None, "cap": min(l_max[i], a.height)})
        else:
            raise SimulationError("no traffic generator for arrival kind %r" % a.kind)
    pending = [None] * n

    def draw(i):
        a, st = arrivals[i], state[i]
        size = _random_size(rng, st["cap"], eps)
        if size is None:
            return None
        unit = size / max(a.long_term_rate, Fraction(1, 10**12))
        extra = ZERO if rng.random() < greedy else unit * Fraction(rng.randint(1, 1000), 500)
        if st["kind"] == "stair":
            t = ZERO if st["time"] is None else st["time"] + a.period
            return t + extra, size
        t = st["time"]
        if st["tokens"] < size:
            if a.rate == 0:
                return None
            t += (size - st["tokens"]) / a.rate
        if isinstance(a, GroupedTokenBucket) and st.get("sent"):
            t = max(t, st["time"] + size / a.link_rate)
        return t + extra, size

    def commit(i, t, size):
        a, st = arrivals[i], state[i]
        if st["kind"] == "bucket":
            st["tokens"] = min(a.burst, st["tokens"] + a.rate * (t - st["time"])) - size
            st["sent"] = True
        st["time"] = t

    for i in range(n):
        pending[i] = draw(i)
    out = []
    while len(out) < max_packets:
        live = [i for i in range(n) if pending[i] is not None
                and (t_max is None or pending[i][0] <= t_max)]
        if not live:
            break
        i = min(live, key=lambda j: (pending[j][0], j))
        t, size = pending[i]
        commit(i, t, size)
        out.append(PacketEvent(i, size, t, rng.randint(0, max_rank) if max_rank else 0))
        pending[i] = draw(i)
    return sorted(out, key=lambda ev: (ev.arrival_time, ev.rank))


# -- scenarios

@dataclass
class ScenarioResult:
    delay: Optional[Fraction]
    increments: dict
    trajectory: Trajectory
    details: dict = field(default_factory=dict)


def token_bucket_packets(flow, rate, burst, size, count, rank=0):
    """Greedy packets of ``size`` bits: the k-th arrives when the bucket allows it."""
    out = []
    for k in range(count):
        need = (k + 1) * size - burst
        t = ZERO if need <= 0 else need / rate
        out.append(PacketEvent(flow, size, t, rank))
    return out


def counterexample_config(l, c, epsilon):
    l, c = as_rational(l), as_rational(c)
    cfg = DrrConfig(quanta=(100 * l, 5 * l, 10 * l), l_max=(l, l, l), rate=c, epsilon=epsilon)
    arrivals = [TokenBucket(Fraction(86, 100) * c, l),
                TokenBucket(Fraction(401, 10000) * c, l),
                TokenBucket(0, 20 * l)]
    return cfg, arrivals


def counterexample_scenario(l, c, epsilon) -> ScenarioResult:
    """Trajectory on which flow 0 exceeds the Soni et al. bound.

    Flow 2 arrives first with 20 packets, flow 0 shortly after with 63 and
    flow 1 last with 4; the packet of interest is flow 0's last packet.
    """
    l, c = as_rational(l), as_rational(c)
    cfg, arrivals = counterexample_config(l, c, epsilon)
    events = (token_bucket_packets(2, arrivals[2].rate, arrivals[2].burst, l, 20, rank=0)
              + token_bucket_packets(0, arrivals[0].rate, arrivals[0].burst, l, 63, rank=1)
              + token_bucket_packets(1, arrivals[1].rate, arrivals[1].burst, l, 4, rank=2))
    traj = simulate(cfg, events, ConstantRate(c))
    delay = traj.packet_delay(0, 62)
    bounds = {"boyer": boyer_delay(cfg, 0, arrivals[0]),
              "soni": soni_delay(cfg, 0, arrivals),
              "strict_curve": beta0_delay(cfg, 0, arrivals[0])}
    first_visit = next(v for v in traj.visits if v.flow == 2)
    return ScenarioResult(delay, {"flow2_first_visit_end": first_visit.end}, traj, bounds)


def _split_amount(q, l_max):
    n_full, l_mod = divmod(q, l_max)
    return int(n_full), l_mod


def _packets(sizes, flow, t, rank):
    return [PacketEvent(flow, s, t, rank) for s in sizes if s > 0]


def tightness_scenario(cfg: DrrConfig, i, tau, K=None) -> ScenarioResult:
    """Adversarial trajectory on which flow ``i`` receives exactly ``beta0`` over ``tau``.

    Flows are relabeled internally in quantum order; the increment refers to
    the original flow ``i``.  ``K`` defaults to the steepest slope of the
    aggregate curve.
    """
    tau = as_rational(tau)
    n = cfg.n
    if n < 2:
        raise SimulationError("the construction needs at least two flows")
    for j in range(n):
        if cfg.quanta[j] % cfg.epsilon or cfg.l_max[j] % cfg.epsilon:
            raise SimulationError("flow %d: the construction needs quantum and l_max to be "
                                  "multiples of epsilon" % j)
    order = sorted(range(n), key=lambda j: (cfg.quanta[j], j))
    rel = DrrConfig(quanta=tuple(cfg.quanta[j] for j in order),
                    l_max=tuple(cfg.l_max[j] for j in order),
                    rate=cfg.rate, latency=cfg.latency, epsilon=cfg.epsilon,
                    service_curve=cfg.service_curve)
    me = order.index(i)
    eps = rel.epsilon
    reach = tau + (rel.latency if rel.is_rate_latency else ZERO) + 1
    aggregate = rel.beta(reach if rel.is_rate_latency else rel.service_curve.horizon)
    steepest = max(seg[3] for seg in aggregate.segments)
    K = steepest if K is None else as_rational(K)
    target = beta0(rel, me, tau)(tau)
    rounds = floor((target + rel.d_max(me)) / rel.quanta[me])
    s = sum((rel.quanta[j] - rel.d_max(j) for j in rel.others(me)), ZERO) / K
    first = (me + 1) % n

    events = []
    for j in rel.others(me):
        n_j, l_mod = _split_amount(rel.quanta[j], rel.l_max[j])
        lm = rel.l_max[j]
        sizes = [lm] * (n_j - 1) + [l_mod + eps]
        if l_mod == 0:
            sizes += [lm] * n_j + [lm - eps]
        else:
            sizes += [lm] * (n_j + 1) + [l_mod - eps]
        # one block per flow-i visit after the first, so interferers stay backlogged
        sizes += ([lm] * n_j + [l_mod]) * rounds
        events += _packets(sizes, j, ZERO, 0 if j == first else 1)
    n_i, l_mod = _split_amount(rel.quanta[me], rel.l_max[me])
    lm = rel.l_max[me]
    sizes = [lm] * (n_i - 1) + [l_mod + eps] + ([lm] * n_i + [l_mod]) * rounds
    events += _packets(sizes, me, s, 1)

    model = TwoPhase(K, s, aggregate)
    traj = simulate(rel, events, model, t_end=s + tau)
    d_me = traj.output(me)
    increment = d_me(s + tau) - d_me(s)
    after = [v for v in traj.visits if v.start >= s]
    first_service = {}
    for v in after:
        if v.flow != me and order[v.flow] not in first_service:
            first_service[order[v.flow]] = v.served
    own = [v.served for v in after if v.flow == me]
    cumulative = []
    acc = ZERO
    for x in own:
        acc += x
        cumulative.append(acc)
    details = {"s": s, "K": K, "beta0": target, "rounds": rounds, "order": order,
               "first_service_after_s": first_service, "own_service_after_s": cumulative}
    return ScenarioResult(None, {"flow": increment}, traj, details)


# -- conformance oracle

@dataclass
class Violation:
    start: Fraction
    end: Fraction
    served: Fraction
    required: Fraction


@dataclass
class ConformanceReport:
    flow: Optional[int]
    passed: bool
    violation: Optional[Violation]
    periods: int
    vertices: int
    window: Fraction

    def __bool__(self):
        return self.passed


def _float_right_values(curve: PwFunction, xs):
    ts = np.array([float(t) for t in curve.breakpoints])
    segs = curve.segments
    rs = np.array([float(seg[2]) for seg in segs[:-1]] or [0.0])
    ss = np.array([float(seg[3]) for seg in segs[:-1]] or [0.0])
    idx = np.clip(np.searchsorted(ts, xs, side="right") - 1, 0, max(len(rs) - 1, 0))
    out = rs[idx] + ss[idx] * (xs - ts[idx])
    out[xs >= ts[-1]] = float(curve(curve.horizon))
    return out


def conformance_check(cfg: DrrConfig, trajectory: Trajectory, curve: PwFunction, flow=None) -> ConformanceReport:
    """Check ``D(t) - D(s) >= curve(t - s)`` on every backlogged ``(s, t]``.

    ``flow=None`` checks the aggregate output against the system backlog.  Only
    intervals no longer than the curve's horizon are examined.  Candidate
    ``(s, t)`` vertices are the kinks of ``D`` paired with each other and with
    kinks of the curve; they are screened in floating point and every close
    call is settled exactly, so the verdict is exact.  Where the curve jumps,
    the right limit is required (it is the limit of nearby intervals).
    """
    out = trajectory.output(flow) if flow is not None else trajectory.aggregate_output()
    window = curve.horizon
    dts = np.array([float(t) for t in out.breakpoints])
    dvs = np.array([float(out(t)) for t in out.breakpoints])
    kinks = out.breakpoints
    u_all = [u for u in curve.breakpoints if u > 0]
    scale = max(float(abs(out(out.horizon))), float(abs(curve(window))), 1.0)
    tol = 1e-7 * scale
    periods = trajectory.backlogged_periods(flow)
    best = None
    vertices = 0
    for b, e in periods:
        if e <= b:
            continue
        lo = bisect.bisect_right(kinks, b)
        hi = bisect.bisect_left(kinks, e)
        ks = [b] + list(kinks[lo:hi]) + [e]
        kf = np.array([float(x) for x in ks])
        span = min(e - b, window)
        us = [u for u in u_all if u <= span]
        uf = np.array([float(u) for u in us])
        # kink pairs, then kink +/- curve kink
        si, ti = np.triu_indices(len(ks), 1)
        ss_list, ts_list = [kf[si]], [kf[ti]]
        kind, ref_a, ref_b = [np.zeros(len(si), dtype=np.int8)], [si], [ti]
        if len(uf):
            a, u = np.meshgrid(np.arange(len(ks)), np.arange(len(uf)), indexing="ij")
            a, u = a.ravel(), u.ravel()
            for code, s_f, t_f in ((1, kf[a], kf[a] + uf[u]), (2, kf[a] - uf[u], kf[a])):
                ss_list.append(s_f)
                ts_list.append(t_f)
                kind.append(np.full(len(a), code, dtype=np.int8))
                ref_a.append(a)
                ref_b.append(u)
        S, T = np.concatenate(ss_list), np.concatenate(ts_list)
        KIND, RA, RB = np.concatenate(kind), np.concatenate(ref_a), np.concatenate(ref_b)
        fb, fe, fw = float(b), float(e), float(window)
        keep = (S >= fb) & (T <= fe) & (T > S) & (T - S <= fw * (1 + 1e-12))
        S, T, KIND, RA, RB = S[keep], T[keep], KIND[keep], RA[keep], RB[keep]
        vertices += len(S)
        gap = np.interp(T, dts, dvs) - np.interp(S, dts, dvs) - _float_right_values(curve, T - S)
        for m in np.nonzero(gap < tol)[0]:
            if KIND[m] == 0:
                s_ex, t_ex = ks[RA[m]], ks[RB[m]]
            elif KIND[m] == 1:
                s_ex, t_ex = ks[RA[m]], ks[RA[m]] + us[RB[m]]
            else:
                s_ex, t_ex = ks[RA[m]] - us[RB[m]], ks[RA[m]]
            if s_ex < b or t_ex > e or t_ex <= s_ex or t_ex - s_ex > window:
                continue
            x = t_ex - s_ex
            interior = s_ex > b or t_ex < e
            need = curve.right_limit(x) if interior and x < window else curve(x)
            got = out(t_ex) - out(s_ex)
            if got < need and (best is None or (s_ex, t_ex) < (best.start, best.end)):
                best = Violation(s_ex, t_ex, got, need)
    return ConformanceReport(flow, best is None, best, len(periods), vertices, window)
