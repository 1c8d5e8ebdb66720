"""Command-line front-end: ``drrcalc {analyze,curves,simulate,counterexample,tightness}``.

Exit status: 0 on success, 2 on a bad config or request, 3 when a class is
unstable (no finite horizon), 4 when a refinement invariant breaks.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from fractions import Fraction
from pathlib import Path

from ._rational import as_rational, rational_json, to_decimal_str
from .drr import ConfigError, UnstableError
from .minplus import HorizonError
from .network import ANALYSIS_METHODS, Network, analyze, analyze_node, busy_bound, format_table, load_network
from .refine import InvariantError, write_curve_csv
from .sim import (
    ConstantRate, GuaranteedCurve, PacketEvent, SimulationError, conformance_check,
    conforming_events, counterexample_scenario, simulate, tightness_scenario,
)

EXIT_CONFIG, EXIT_UNSTABLE, EXIT_INVARIANT = 2, 3, 4


def _us(x: Fraction) -> str:
    return "%s us" % to_decimal_str(x * 10**6, 3)


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _analysis_options(args) -> dict:
    opts = {}
    if args.iterations is not None:
        opts["iterations"] = args.iterations
    if args.delay_epsilon_us is not None:
        opts["delay_epsilon_s"] = str(as_rational(args.delay_epsilon_us) / 10**6)
    if args.grouping is not None:
        opts["grouping"] = args.grouping
    if args.stop is not None:
        opts["stop"] = args.stop
    if args.stationary_tolerance_bits is not None:
        opts["stationary_tolerance_bits"] = str(as_rational(args.stationary_tolerance_bits))
    if args.propagation is not None:
        opts["propagation"] = args.propagation
    return opts


def _pick_node(network: Network, node_id):
    if node_id is None:
        if len(network.nodes) != 1:
            raise ConfigError("config has %d nodes; choose one with --node" % len(network.nodes))
        return next(iter(network.nodes.values()))
    if node_id not in network.nodes:
        raise ConfigError("unknown node %r" % (node_id,))
    return network.nodes[node_id]


def _entry_members(network: Network, node):
    """Flows at ``node`` grouped by class; every flow must enter the network there."""
    flows = [f for f in network.flows if node.id in f.path]
    if not flows:
        raise ConfigError("no flow crosses node %r" % (node.id,))
    late = [f.id for f in flows if f.path[0] != node.id]
    if late:
        raise ConfigError("node %r is not the first hop of %s; simulate and tightness need "
                          "source arrival curves" % (node.id, ", ".join(late)))
    members = {}
    for f in flows:
        members.setdefault(f.class_at(node.id), []).append(f)
    return {c: members[c] for c in node.quanta if c in members}


def _node_setup(network: Network, node, method="beta0", options=None):
    members = _entry_members(network, node)
    specs = {c: [(f.arrival, None, f.l_max) for f in fs] for c, fs in members.items()}
    res, cfg, arrivals, builders = analyze_node(node, specs, method, dict(options or {}))
    return members, res, cfg, arrivals, builders


# -- commands

def cmd_analyze(args) -> int:
    network = load_network(args.config)
    opts = _analysis_options(args)
    if args.dump_curves is not None:
        opts["dump_dir"] = str(args.dump_curves)
    report = analyze(network, args.method, opts)
    table = format_table(report)
    sys.stdout.write(table)
    if args.out is not None:
        out = Path(args.out)
        _write_json(out / "report.json", report.to_json())
        (out / "table.txt").write_text(table)
        lines = []
        for nid, res in report.nodes.items():
            lines += ["[%s] %s" % (nid, line) for line in res.log]
        if lines:
            (out / "refinement.log").write_text("\n".join(lines) + "\n")
    return 0


def cmd_curves(args) -> int:
    network = load_network(args.config)
    node = _pick_node(network, args.node)
    report = analyze(network, args.method, _analysis_options(args))
    res = report.nodes.get(node.id)
    if res is None:
        raise ConfigError("no flow crosses node %r" % (node.id,))
    cfg, arrivals, builders = res.detail
    if builders is None:
        raise ConfigError("method %r yields no service curve" % (args.method,))
    if args.horizon_s is not None:
        horizon = as_rational(args.horizon_s)
    elif res.t_star is not None:
        horizon = res.t_star
    else:
        horizon = max(busy_bound(a, b, cfg) for a, b in zip(arrivals, builders))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for c, build in zip(res.classes, builders):
        path = out / ("%s_%s.csv" % (args.method, c))
        write_curve_csv(build(horizon), path)
        print(path)
    return 0


def cmd_simulate(args) -> int:
    network = load_network(args.config)
    node = _pick_node(network, args.node)
    members, res, cfg, arrivals, builders = _node_setup(network, node, args.method,
                                                        dict(network.options, **_analysis_options(args)))
    classes = list(res.classes)
    flows = [(classes.index(c), f) for c, fs in members.items() for f in fs]
    rng = random.Random(args.seed)
    raw = conforming_events([f.arrival for _c, f in flows], [f.l_max for _c, f in flows],
                            cfg.epsilon, rng, max_packets=args.packets)
    events = [PacketEvent(flows[e.flow][0], e.size, e.arrival_time, e.rank) for e in raw]
    if args.model == "constant":
        model = ConstantRate(cfg.rate)
    else:
        end = max((e.arrival_time for e in events), default=Fraction(0))
        horizon = end + sum(e.size for e in events) / cfg.rate + cfg.latency + 1
        model = GuaranteedCurve(cfg.beta(horizon))
    traj = simulate(cfg, events, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = {"config": str(args.config), "node": node.id, "seed": args.seed,
              "packets": args.packets, "model": args.model, "method": args.method,
              "classes": classes}
    traj.write_csv(out / "trajectory.csv", params)
    summary = {"node": node.id, "classes": {}}
    failed = False
    for i, c in enumerate(classes):
        own = [x for x in traj.transmissions if x.flow == i]
        worst = max((x.end - x.arrival for x in own), default=Fraction(0))
        rep = conformance_check(cfg, traj, builders[i](max(traj.end, Fraction(1, 10**9))), flow=i)
        failed |= not rep.passed
        summary["classes"][c] = {"packets": len(own), "max_delay_s": rational_json(worst),
                                 "bound_s": rational_json(res.delays[c]),
                                 "conforms_to_%s" % args.method: rep.passed}
        print("%s: %d packets, max delay %s (bound %s), %s curve %s"
              % (c, len(own), _us(worst), _us(res.delays[c]), args.method,
                 "respected" if rep.passed else "VIOLATED"))
    _write_json(out / "summary.json", summary)
    return 4 if failed else 0


def cmd_counterexample(args) -> int:
    l = as_rational(args.l_bytes) * 8
    c = as_rational(args.c_mbps) * 10**6
    result = counterexample_scenario(l, c, as_rational(args.epsilon_bits))
    d = result.details
    print("Boyer bound:        %s" % _us(d["boyer"]))
    print("Soni bound:         %s" % _us(d["soni"]))
    print("strict-curve bound: %s" % _us(d["strict_curve"]))
    print("simulated delay:    %s" % _us(result.delay))
    if result.delay > d["soni"]:
        print("VIOLATION: simulated delay exceeds the Soni bound")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result.trajectory.write_csv(out / "counterexample.csv",
                                    {"l_bytes": str(args.l_bytes), "c_mbps": str(args.c_mbps),
                                     "epsilon_bits": str(args.epsilon_bits)})
        _write_json(out / "counterexample.json",
                    {k: rational_json(v) for k, v in
                     {"boyer_s": d["boyer"], "soni_s": d["soni"], "strict_curve_s": d["strict_curve"],
                      "simulated_s": result.delay}.items()})
    return 0


def _resolve_flow(network, node, classes, token):
    if token in classes:
        return classes.index(token)
    for f in network.flows:
        if f.id == token and node.id in f.path:
            return classes.index(f.class_at(node.id))
    try:
        k = int(token)
    except ValueError:
        raise ConfigError("unknown flow or class %r" % (token,)) from None
    if not 0 <= k < len(classes):
        raise ConfigError("flow index %d out of range (0..%d)" % (k, len(classes) - 1))
    return k


def cmd_tightness(args) -> int:
    network = load_network(args.config)
    node = _pick_node(network, args.node)
    _members, res, cfg, _arr, _b = _node_setup(network, node)
    classes = list(res.classes)
    i = _resolve_flow(network, node, classes, args.flow)
    tau = as_rational(args.tau)
    if tau <= 0:
        raise ConfigError("--tau must be positive")
    result = tightness_scenario(cfg, i, tau)
    got, want = result.increments["flow"], result.details["beta0"]
    print("class %s, tau = %s s" % (classes[i], to_decimal_str(tau, 12)))
    print("service in [s, s+tau]: %s bits" % to_decimal_str(got, 6))
    print("beta0(tau):            %s bits" % to_decimal_str(want, 6))
    print("EQUAL" if got == want else "DIFFERENT")
    return 0 if got == want else 4


# -- parser

def _add_analysis_flags(p):
    p.add_argument("--iterations", type=int, help="iteration cap for refinement methods")
    p.add_argument("--delay-epsilon-us", help="stop once no delay improves by this much")
    p.add_argument("--stop", choices=("stationary", "delay-threshold", "max-iterations"))
    p.add_argument("--stationary-tolerance-bits", help="treat curve moves below this as stationary")
    p.add_argument("--grouping", action=argparse.BooleanOptionalAction, default=None,
                   help="apply the link-rate grouping bound to class arrivals")
    p.add_argument("--propagation", choices=("shift", "deconvolution"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drrcalc", description="Worst-case delay bounds for DRR")
    parser.add_argument("-v", "--verbose", action="store_true", help="log refinement progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="delay bounds for every node and flow")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--method", choices=ANALYSIS_METHODS)
    p.add_argument("--dump-curves", type=Path, metavar="DIR",
                   help="write per-iteration curve CSVs of refinement methods under DIR")
    p.add_argument("--out", type=Path, help="directory for report.json, table.txt, refinement.log")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("curves", help="write the strict service curves of one node as CSV")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--node")
    p.add_argument("--method", choices=[m for m in ANALYSIS_METHODS if m != "soni"], default="beta0")
    p.add_argument("--horizon-s", help="curve horizon (default: the analysis horizon)")
    p.add_argument("--out", type=Path, required=True)
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", help="simulate conforming traffic at one entry node")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--node")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--packets", type=int, default=200, help="packets per flow")
    p.add_argument("--model", choices=("constant", "guaranteed"), default="constant",
                   help="server capacity: the link rate, or exactly the aggregate curve")
    p.add_argument("--method", choices=[m for m in ANALYSIS_METHODS if m != "soni"], default="beta0",
                   help="curve the trajectory is checked against")
    p.add_argument("--out", type=Path, required=True)
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counterexample", help="three-flow trajectory that beats the Soni bound")
    p.add_argument("--l-bytes", default="100")
    p.add_argument("--c-mbps", default="100")
    p.add_argument("--epsilon-bits", default="8", help="smallest unit of information (default 1 byte)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("tightness", help="check that beta0 is attained by an adversarial trajectory")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--node")
    p.add_argument("--flow", required=True, help="class name, flow id or class index")
    p.add_argument("--tau", required=True, help="interval length in seconds")
    p.set_defaults(func=cmd_tightness)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (UnstableError, HorizonError) as exc:
        print("drrcalc: unstable: %s" % exc, file=sys.stderr)
        return EXIT_UNSTABLE
    except InvariantError as exc:
        print("drrcalc: invariant violated: %s" % exc, file=sys.stderr)
        return EXIT_INVARIANT
    except json.JSONDecodeError as exc:
        print("drrcalc: bad JSON: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, SimulationError, ValueError, OSError) as exc:
        print("drrcalc: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
