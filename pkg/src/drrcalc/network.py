"""Feed-forward networks of DRR output ports.

A node is one output port: a rate-latency server ``beta_{rate, latency}``
running DRR over the traffic classes that use it.  Within a class the
arbitration is FIFO, so the class delay at a node is also the per-flow delay
of each member flow.  Nodes are analyzed in topological order; a flow's
arrival curve at the next hop is its curve at the previous hop shifted by
the delay bound of its class there.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Optional

from ._rational import as_rational, rational_json, truncate
from .arrivals import ArrivalSpec, CurveArrival, GroupedTokenBucket, Stair, TokenBucket
from .drr import (
    ConfigError, DrrConfig, UnstableError, beta0, beta0_delay, boyer_curve, boyer_delay,
    check_stable, convex_curve, convex_delay, find_horizon, initial_horizon_guess, soni_delay,
)
from .minplus import PwFunction, min_plus_convolution, min_plus_deconvolution, sufficient_horizon, sum_pw
from .refine import DEFAULT_DELAY_EPSILON, METHODS as REFINE_METHODS, StopRule, iterate

ZERO = Fraction(0)
BASIC_METHODS = ("boyer", "beta0", "convex", "soni")
ANALYSIS_METHODS = BASIC_METHODS + tuple(m for m in REFINE_METHODS if m != "simple-max-service")
PROPAGATIONS = ("shift", "deconvolution")


@dataclass(frozen=True)
class Node:
    id: str
    rate: Fraction
    latency: Fraction
    quanta: dict
    epsilon: Fraction = Fraction(1)

    def beta(self, horizon) -> PwFunction:
        return PwFunction.rate_latency(self.rate, self.latency, horizon)


@dataclass(frozen=True)
class FlowSpec:
    id: str
    path: tuple
    arrival: ArrivalSpec
    l_max: Fraction
    classes: dict

    def class_at(self, node_id):
        return self.classes[node_id]


@dataclass
class Network:
    nodes: dict
    links: set
    flows: list
    options: dict = field(default_factory=dict)
    approximate: bool = False
    name: str = ""

    def order(self) -> list:
        """Nodes in a topological order of the flow-induced precedence graph."""
        graph = {n: set() for n in self.nodes}
        for f in self.flows:
            for a, b in zip(f.path, f.path[1:]):
                graph[b].add(a)
        try:
            return list(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise ConfigError("cyclic dependency between nodes %s; only feed-forward "
                              "networks are supported" % (exc.args[1],)) from None


def node_aggregate_beta(node: Node, horizon) -> PwFunction:
    return node.beta(horizon)


# -- config parsing

_OFFSET_KEYS = ("offset", "offset_s", "offsets")


def _reject_offsets(obj, where):
    for key in _OFFSET_KEYS:
        if key in obj:
            raise ConfigError("%s: offset-based arrival constraints are not supported; "
                              "remove the %r field" % (where, key))


def _rat(obj, key, where, positive=False, default=None):
    if key not in obj:
        if default is not None:
            return as_rational(default)
        raise ConfigError("%s: missing %r" % (where, key))
    try:
        x = as_rational(obj[key])
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError("%s: %r is not a number" % (where, key)) from None
    if x < 0 or (positive and x == 0):
        raise ConfigError("%s: %r must be %s" % (where, key, "positive" if positive else ">= 0"))
    return x


def parse_arrival(obj: dict, l_max, where) -> ArrivalSpec:
    _reject_offsets(obj, where)
    kind = obj.get("kind")
    if kind == "token-bucket":
        return TokenBucket(_rat(obj, "rate_bps", where, True), _rat(obj, "burst_bits", where, True))
    if kind == "stair":
        return Stair(_rat(obj, "a_bits", where, True), _rat(obj, "period_s", where, True))
    if kind == "periodic":
        # at most one packet of l_max per period
        period = _rat(obj, "period_s", where, True)
        return TokenBucket(l_max / period, l_max)
    if kind == "grouped-token-bucket":
        link = _rat(obj, "link_rate_bps", where, True)
        rate = _rat(obj, "rate_bps", where, True)
        if link <= rate:
            raise ConfigError("%s: link rate must exceed the token rate" % where)
        return GroupedTokenBucket(link, _rat(obj, "l_max_bits", where, True, l_max),
                                  rate, _rat(obj, "burst_bits", where, True))
    raise ConfigError("%s: unknown arrival kind %r" % (where, kind))


def network_from_dict(data: dict) -> Network:
    if not isinstance(data, dict):
        raise ConfigError("network config must be a JSON object")
    nodes = {}
    for k, obj in enumerate(data.get("nodes") or []):
        where = "node %s" % obj.get("id", k)
        if "id" not in obj:
            raise ConfigError("%s: missing 'id'" % where)
        nid = str(obj["id"])
        if nid in nodes:
            raise ConfigError("duplicate node id %r" % nid)
        quanta = obj.get("quanta_bits")
        if not isinstance(quanta, dict) or not quanta:
            raise ConfigError("%s: 'quanta_bits' must map classes to quanta" % where)
        nodes[nid] = Node(nid, _rat(obj, "rate_bps", where, True), _rat(obj, "latency_s", where, default=0),
                          {str(c): _rat(quanta, c, where, True) for c in quanta},
                          _rat(obj, "epsilon_bits", where, True, data.get("options", {}).get("epsilon_bits", 1)))
    if not nodes:
        raise ConfigError("network has no nodes")
    links = set()
    for link in data.get("links") or []:
        if len(link) != 2 or any(str(x) not in nodes for x in link):
            raise ConfigError("link %r must join two known nodes" % (link,))
        links.add((str(link[0]), str(link[1])))
    flows, seen = [], set()
    for k, obj in enumerate(data.get("flows") or []):
        where = "flow %s" % obj.get("id", k)
        _reject_offsets(obj, where)
        fid = str(obj.get("id", k))
        if fid in seen:
            raise ConfigError("duplicate flow id %r" % fid)
        seen.add(fid)
        path = tuple(str(x) for x in obj.get("path") or [])
        if not path:
            raise ConfigError("%s: empty path" % where)
        for a, b in zip(path, path[1:]):
            if (a, b) not in links:
                raise ConfigError("%s: no link from %r to %r" % (where, a, b))
        if len(set(path)) != len(path):
            raise ConfigError("%s: path revisits a node" % where)
        l_max = _rat(obj, "l_max_bits", where, True)
        if "classes" in obj:
            classes = {str(n): str(c) for n, c in obj["classes"].items()}
        elif "class" in obj:
            classes = {n: str(obj["class"]) for n in path}
        else:
            raise ConfigError("%s: missing 'class'" % where)
        for n in path:
            if n not in nodes:
                raise ConfigError("%s: unknown node %r" % (where, n))
            if classes.get(n) not in nodes[n].quanta:
                raise ConfigError("%s: class %r has no quantum at node %r" % (where, classes.get(n), n))
        if "arrival" not in obj:
            raise ConfigError("%s: missing 'arrival'" % where)
        arrival = parse_arrival(obj["arrival"], l_max, where)
        flows.append(FlowSpec(fid, path, arrival, l_max, classes))
    if not flows:
        raise ConfigError("network has no flows")
    net = Network(nodes, links, flows, dict(data.get("options") or {}),
                  bool(data.get("approximate", False)), str(data.get("name", "")))
    net.order()
    return net


def load_network(path) -> Network:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc.strerror)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (path, exc)) from None
    return network_from_dict(data)


# -- arrival curves at a node

def propagate(arrival: ArrivalSpec, hop_delay) -> ArrivalSpec:
    """Arrival curve after a hop with delay bound ``hop_delay``: ``alpha(t + d)``."""
    d = as_rational(hop_delay)
    if d < 0:
        raise ValueError("hop delay must be non-negative")
    return arrival if d == 0 else arrival.shifted(d)


def _cached(builder):
    return lru_cache(maxsize=8)(builder)


def class_arrival_spec(members, grouping=False) -> ArrivalSpec:
    """Arrival curve of a class from ``(arrival, input_link_rate, l_max)`` members.

    ``input_link_rate`` is ``None`` for flows entering the network here.  With
    grouping, members sharing an input link are summed and convolved with
    ``link_rate * t + l_max`` of that link before the sum across links.
    """
    specs = [m[0] for m in members]
    rate = sum((s.long_term_rate for s in specs), ZERO)
    if not grouping or all(m[1] is None for m in members):
        if all(isinstance(s, TokenBucket) for s in specs):
            return TokenBucket(rate, sum((s.burst for s in specs), ZERO))
        return CurveArrival(_cached(lambda h: sum_pw([s.curve(h) for s in specs], h)), rate, label="class")
    by_link = {}
    for spec, link, l_max in members:
        by_link.setdefault(link if link is not None else ("source", id(spec)), []).append((spec, link, l_max))
    parts = []
    for key, group in by_link.items():
        link = group[0][1]
        if link is None:
            parts.extend(g[0] for g in group)
            continue
        link_rate, _node = link
        l_link = max(g[2] for g in group)
        inner = [g[0] for g in group]

        def shaped(h, inner=inner, link_rate=link_rate, l_link=l_link):
            total = sum_pw([s.curve(h) for s in inner], h)
            return min_plus_convolution(total, PwFunction.token_bucket(link_rate, l_link, h))
        parts.append(CurveArrival(_cached(shaped), sum((s.long_term_rate for s in inner), ZERO), label="grouped"))
    return CurveArrival(_cached(lambda h: sum_pw([p.curve(h) for p in parts], h)), rate, label="class")


def class_arrival(members, horizon, grouping=False) -> PwFunction:
    return class_arrival_spec(members, grouping).curve(horizon)


# -- analysis

@dataclass
class NodeResult:
    node: str
    classes: tuple
    delays: dict
    iterations: Optional[int]
    t_star: Optional[Fraction]
    log: tuple = ()
    # (cfg, arrivals, curve builders) for callers that need the curves themselves
    detail: Optional[tuple] = field(default=None, repr=False, compare=False)


@dataclass
class AnalysisReport:
    method: str
    nodes: dict
    flows: dict
    options: dict
    approximate: bool
    name: str = ""

    def end_to_end(self, flow_id) -> Fraction:
        return sum((d for _n, d in self.flows[flow_id]), ZERO)

    @property
    def known_incorrect(self) -> bool:
        # the comparator can undercut real delays (see the counterexample command)
        return self.method == "soni"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "known_incorrect": self.known_incorrect,
            "method": self.method,
            "approximate": self.approximate,
            "options": self.options,
            "nodes": {nid: {"iterations": r.iterations,
                            "t_star_s": None if r.t_star is None else rational_json(r.t_star),
                            "classes": {c: rational_json(d) for c, d in r.delays.items()}}
                      for nid, r in self.nodes.items()},
            "flows": {fid: {"hops": [{"node": n, "delay_s": rational_json(d)} for n, d in hops],
                            "end_to_end_s": rational_json(self.end_to_end(fid))}
                      for fid, hops in self.flows.items()},
        }


def format_delay(x: Fraction) -> str:
    """Table style: microseconds below 1 ms, milliseconds otherwise, truncated to 2 decimals."""
    if x < Fraction(1, 1000):
        return "%s us" % _two_decimals(x * 10**6)
    return "%s ms" % _two_decimals(x * 1000)


def _two_decimals(x: Fraction) -> str:
    t = truncate(x, 2)
    whole, frac = divmod(t * 100, 100)
    return "%d.%02d" % (whole, frac)


def format_table(report: AnalysisReport) -> str:
    lines = ["method: %s%s%s" % (report.method,
                                 "  (approximate config)" if report.approximate else "",
                                 "  (known to underestimate; comparison only)" if report.known_incorrect else "")]
    width = max([len("node")] + [len(n) for n in report.nodes])
    for nid, res in report.nodes.items():
        cells = "  ".join("%s=%s" % (c, format_delay(d)) for c, d in res.delays.items())
        extra = "" if res.iterations is None else "  [%d iterations]" % res.iterations
        lines.append("%-*s  %s%s" % (width, nid, cells, extra))
    if any(len(h) > 1 for h in report.flows.values()):
        lines.append("end-to-end:")
        for fid in report.flows:
            lines.append("  %s  %s" % (fid, format_delay(report.end_to_end(fid))))
    return "\n".join(lines) + "\n"


def _stop_rule(options) -> StopRule:
    mode = options.get("stop", "delay-threshold")
    eps = options.get("delay_epsilon_s")
    return StopRule(mode=mode,
                    delay_epsilon=DEFAULT_DELAY_EPSILON if eps is None else as_rational(eps),
                    max_iter=int(options.get("iterations", 100)),
                    tolerance=as_rational(options.get("stationary_tolerance_bits", 0)))


def _class_curves(cfg, method, ref):
    """Builders of the per-class strict service curves used by a method."""
    if ref is not None:
        return [lambda h, c=c: c.restrict(min(h, c.horizon)) for c in ref.final]
    fn = {"beta0": beta0, "boyer": boyer_curve, "convex": convex_curve}.get(method)
    if fn is None:
        return None
    return [lambda h, i=i: fn(cfg, i, h) for i in range(cfg.n)]


def _deconvolved(arrival: ArrivalSpec, curve: PwFunction) -> ArrivalSpec:
    """``alpha ⊘ beta`` with the sup limited to the busy-period bound."""
    t_i = sufficient_horizon(arrival.curve(curve.horizon), curve)
    c = curve.restrict(t_i)

    def build(h):
        return min_plus_deconvolution(arrival.curve(h + t_i), c, horizon=h, s_max=t_i)
    return CurveArrival(_cached(build), arrival.long_term_rate, label="output")


def _safe_name(text):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)


def analyze_node(node: Node, members: dict, method: str, options: dict):
    """Delay bound of every class at ``node``; ``members`` maps class -> member list."""
    classes = tuple(c for c in node.quanta if c in members)
    cfg = DrrConfig(quanta=tuple(node.quanta[c] for c in classes),
                    l_max=tuple(max(m[2] for m in members[c]) for c in classes),
                    rate=node.rate, latency=node.latency, epsilon=node.epsilon)
    grouping = bool(options.get("grouping", False))
    arrivals = [class_arrival_spec(members[c], grouping) for c in classes]
    try:
        check_stable(cfg, arrivals)
    except UnstableError as exc:
        raise UnstableError("node %s: %s" % (node.id, exc)) from None
    ref = None
    if method == "beta0":
        delays = [beta0_delay(cfg, i, a) for i, a in enumerate(arrivals)]
    elif method == "boyer":
        delays = [boyer_delay(cfg, i, a) for i, a in enumerate(arrivals)]
    elif method == "convex":
        delays = [convex_delay(cfg, i, a) for i, a in enumerate(arrivals)]
    elif method == "soni":
        # the comparator is stated for a constant-rate server; add the latency
        flat = DrrConfig(cfg.quanta, cfg.l_max, rate=cfg.rate, epsilon=cfg.epsilon)
        delays = [soni_delay(flat, i, arrivals) + cfg.latency for i in range(cfg.n)]
    elif method in REFINE_METHODS:
        dump = options.get("dump_dir")
        ref = iterate(cfg, arrivals, method, stop=_stop_rule(options),
                      dump_dir=None if dump is None else Path(dump) / _safe_name(node.id))
        delays = list(ref.delays[-1])
    else:
        raise ConfigError("unknown method %r (choose from %s)" % (method, ", ".join(ANALYSIS_METHODS)))
    result = NodeResult(node.id, classes, dict(zip(classes, delays)),
                        None if ref is None else ref.iterations,
                        None if ref is None else ref.policy.t_star,
                        () if ref is None else tuple(ref.log_lines))
    return result, cfg, arrivals, _class_curves(cfg, method, ref)


def analyze(network: Network, method: Optional[str] = None, options: Optional[dict] = None) -> AnalysisReport:
    opts = dict(network.options)
    opts.update(options or {})
    method = method or opts.get("method", "full")
    propagation = opts.get("propagation", "shift")
    if propagation not in PROPAGATIONS:
        raise ConfigError("unknown propagation %r" % (propagation,))
    current = {f.id: f.arrival for f in network.flows}
    prev = {}
    hops = {f.id: [] for f in network.flows}
    results = {}
    for nid in network.order():
        node = network.nodes[nid]
        here = [f for f in network.flows if nid in f.path]
        if not here:
            continue
        members = {}
        for f in here:
            up = prev.get((f.id, nid))
            link = None if up is None else (network.nodes[up].rate, up)
            members.setdefault(f.class_at(nid), []).append((current[f.id], link, f.l_max))
        res, cfg, arrivals, builders = analyze_node(node, members, method, opts)
        res.detail = (cfg, arrivals, builders)
        results[nid] = res
        for f in here:
            c = f.class_at(nid)
            d = res.delays[c]
            hops[f.id].append((nid, d))
            k = f.path.index(nid)
            if k + 1 < len(f.path):
                out = propagate(current[f.id], d)
                if propagation == "deconvolution" and builders is not None and len(members[c]) == 1:
                    i = res.classes.index(c)
                    t = res.t_star if res.t_star is not None else busy_bound(arrivals[i], builders[i], cfg)
                    dec = _deconvolved(current[f.id], builders[i](t))
                    shifted = out
                    out = CurveArrival(_cached(lambda h, a=shifted, b=dec: a.curve(h).minimum(b.curve(h))),
                                       shifted.long_term_rate, label="output")
                current[f.id] = out
                prev[(f.id, f.path[k + 1])] = nid
    return AnalysisReport(method, results, hops, opts, network.approximate, network.name)


def busy_bound(arrival, builder, cfg):
    """Horizon by which ``arrival`` meets the curve built by ``builder``."""
    return find_horizon(arrival, builder, initial_horizon_guess(cfg))


# -- generators

def industrial_network(seed: int = 2023, paths: int = 60) -> dict:
    """Synthetic industrial-style network config: 8 switches, 3 classes.

    Switches form a chain ``S1 -> ... -> S8`` so that every path of at most
    four switches is feed-forward.  Each path is a unicast flow from an end
    system at its first switch to an end-system port of its last switch.
    The mix follows the published class parameters (packet sizes, minimum
    inter-arrival times between 2 and 128 ms); paths are drawn with the
    given seed and make no claim to match any published topology.
    """
    rng = random.Random(seed)
    byte = 8
    quanta = {"critical": 3070 * byte, "multimedia": 1535 * byte, "best-effort": 1535 * byte}
    l_max = {"critical": 150 * byte, "multimedia": 500 * byte, "best-effort": 1535 * byte}
    periods = {"critical": [4, 8, 16, 32, 64, 128], "multimedia": [2, 4, 8, 16, 32, 64, 128],
               "best-effort": [2, 4, 8, 16, 32, 64, 128]}
    weights = [("critical", 128), ("multimedia", 500), ("best-effort", 266)]
    hop_weights = [1797, 2787, 1537, 291]
    nodes, links = {}, set()

    def port(name):
        nodes.setdefault(name, {"id": name, "rate_bps": 100_000_000, "latency_s": "0.000016",
                                "quanta_bits": dict(quanta)})
        return name

    flows = []
    for k in range(paths):
        cls = rng.choices([w[0] for w in weights], [w[1] for w in weights])[0]
        hops = rng.choices([1, 2, 3, 4], hop_weights)[0]
        first = rng.randint(1, 9 - hops)
        sw = list(range(first, first + hops))
        path = [port("S%d->S%d" % (s, s + 1)) for s in sw[:-1]]
        path.append(port("S%d->ES%d" % (sw[-1], rng.randint(1, 6))))
        for a, b in zip(path, path[1:]):
            links.add((a, b))
        flows.append({"id": "f%d" % k, "path": path, "class": cls,
                      "arrival": {"kind": "periodic", "period_s": str(Fraction(rng.choice(periods[cls]), 1000))},
                      "l_max_bits": l_max[cls]})
    return {"name": "industrial-seed-%d" % seed, "approximate": True,
            "nodes": [nodes[n] for n in sorted(nodes)], "links": sorted([list(l) for l in links]),
            "flows": flows, "options": {"grouping": True}}
