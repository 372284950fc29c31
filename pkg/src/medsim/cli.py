"""Command line front end: graph generation, one-shot routing, oracle solves,
single runs, and paired sweeps emitting plot-ready CSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

from . import oracle as oracle_mod
from . import sim
from .road_graph import GraphError, grid_doc, load_graph
from .routing import EvRequest, RouteAssignment, Stranded, find_shortest_path

SWEEP_HEADER = "mode,level,ev_count,seed,mean_travel_s,mean_wait_s,med_share,stranded"


def _atomic_write(path: str, text: str):
    """Write the whole artifact or nothing."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".medsim-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _ints(text: str):
    return [int(x) for x in text.split(",") if x != ""]


def _default_seed(value):
    if value is not None:
        return value
    env = os.environ.get("MEDSIM_SEED")
    return int(env) if env else None


def assignment_to_dict(a: RouteAssignment) -> dict:
    return {
        "ev": a.ev, "source": a.source, "dest": a.dest,
        "capacity_kwh": a.capacity_kwh, "energy_start_kwh": a.energy_start_kwh,
        "legs": list(a.legs),
        "x_arcs": [list(arc) for arc in a.x_arcs],
        "y_arcs": [list(arc) for arc in a.y_arcs],
        "z_visits": [{"node": v.node, "leg_index": v.leg_index, "wait_s": v.wait_s,
                      "charge_s": v.charge_s, "arrive_kwh": v.arrive_kwh}
                     for v in a.z_visits],
        "q_points": [{"meet_node": p.meet_node, "detach_node": p.detach_node,
                      "leg_index": p.leg_index, "wait_s": p.wait_s,
                      "attach_s": p.attach_s,
                      "segments": [list(arc) for arc in p.segments],
                      "booking_keys": [list(k) for k in p.booking_keys],
                      "gain_kwh": p.gain_kwh, "dispensed_kwh": p.dispensed_kwh}
                     for p in a.q_points],
        "energy_trace": list(a.energy_trace),
        "total_time_s": a.total_time_s,
        "depart_s": a.depart_s,
    }


def cmd_gen_grid(args) -> int:
    try:
        doc = grid_doc(args.rows, args.cols, args.arc_len, args.speed,
                       scs=_ints(args.scs) if args.scs else (),
                       med_cycle=_ints(args.med_cycle) if args.med_cycle else ())
        load_graph(doc, vehicle=sim.DEFAULT_VEHICLE)  # full validation round trip
    except (GraphError, ValueError) as exc:
        print(f"gen-grid: {exc}", file=sys.stderr)
        return 2
    _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


def _load_scenario(args, **extra) -> sim.Scenario:
    with open(args.scenario, encoding="utf-8") as fh:
        doc = json.load(fh)
    overrides = dict(extra)
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "level", None):
        overrides["level"] = args.level
    seed = _default_seed(getattr(args, "seed", None))
    if seed is not None:
        overrides["seed"] = seed
    if getattr(args, "evs", None) is not None:
        overrides["ev_count"] = args.evs
    return sim.Scenario.from_json(doc, **overrides)


def cmd_route(args) -> int:
    scenario = _load_scenario(args)
    g = load_graph(scenario.graph, vehicle=scenario.vehicle,
                   visit_limit=scenario.visit_limit)
    infra = sim.build_infrastructure(scenario, g)
    capacity = args.capacity if args.capacity is not None else scenario.vehicle.capacity_kwh
    request = EvRequest("cli", args.source, args.dest, capacity, args.energy)
    med_allowed = scenario.mode == "SCS_MED"

    def gate(kind, node):
        return med_allowed or kind != "med"

    try:
        a = find_shortest_path(g, request, infra, now=args.now, gate=gate)
        out = {"stranded": False, "assignment": assignment_to_dict(a)}
    except Stranded as exc:
        out = {"stranded": True, "reason": str(exc)}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_oracle(args) -> int:
    with open(args.instance, encoding="utf-8") as fh:
        doc = json.load(fh)
    inst = oracle_mod.instance_from_json(doc)
    sol = oracle_mod.solve_exact(inst)
    out = {
        "feasible": sol.feasible,
        "objective_s": sol.objective_s if sol.feasible else None,
        "explored": sol.explored,
        "assignment": assignment_to_dict(sol.best) if sol.best else None,
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    scenario = _load_scenario(args)
    metrics = sim.run(scenario)
    if metrics.violations:
        print("run: invariant violations detected:", file=sys.stderr)
        for v in metrics.violations[:20]:
            print(f"  {v}", file=sys.stderr)
        return 1
    if args.out_csv:
        _atomic_write(args.out_csv, metrics.to_csv())
    agg_text = json.dumps(metrics.aggregates(), indent=2, sort_keys=True) + "\n"
    if args.out_json:
        _atomic_write(args.out_json, agg_text)
    if not args.out_csv and not args.out_json:
        sys.stdout.write(agg_text)
    return 0


def _sweep_cell(doc: dict, overrides: dict) -> dict:
    metrics = sim.run(sim.Scenario.from_json(doc, **overrides), keep_assignments=False)
    if metrics.violations:
        raise RuntimeError(
            f"invariant violations in cell {overrides}: {metrics.violations[:3]}")
    return metrics.aggregates()


def cmd_sweep(args) -> int:
    with open(args.scenario, encoding="utf-8") as fh:
        doc = json.load(fh)
    modes = [m for m in args.modes.split(",") if m]
    levels = [l for l in args.levels.split(",") if l]
    ev_counts = _ints(args.evs)
    seeds = _ints(args.seeds)
    if not (modes and levels and ev_counts and seeds):
        print("sweep: modes, levels, evs, and seeds must be nonempty", file=sys.stderr)
        return 2
    cells = [dict(mode=m, level=l, ev_count=n, seed=s)
             for m in modes for l in levels for n in ev_counts for s in seeds]
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_sweep_cell, [doc] * len(cells), cells))
        else:
            rows = [_sweep_cell(doc, cell) for cell in cells]
    except Exception as exc:
        print(f"sweep: aborted, no output written: {exc}", file=sys.stderr)
        return 1
    rows.sort(key=lambda r: (r["mode"], r["level"], r["ev_count"], r["seed"]))
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(f"{r['mode']},{r['level']},{r['ev_count']},{r['seed']},"
                     f"{r['mean_travel_s']:.6f},{r['mean_wait_s']:.6f},"
                     f"{r['med_share']:.6f},{r['stranded']}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medsim",
                                description="EV routing with static and mobile chargers")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-grid", help="write a grid road-graph JSON")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--arc-len", type=float, default=2500.0)
    g.add_argument("--speed", type=float, default=15.0)
    g.add_argument("--scs", default="", help="comma separated station node ids")
    g.add_argument("--med-cycle", default="", help="comma separated cycle node ids")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_grid)

    r = sub.add_parser("route", help="route one EV against a fresh ledger snapshot")
    r.add_argument("--scenario", required=True)
    r.add_argument("--source", type=int, required=True)
    r.add_argument("--dest", type=int, required=True)
    r.add_argument("--energy", type=float, required=True)
    r.add_argument("--capacity", type=float)
    r.add_argument("--mode")
    r.add_argument("--now", type=float, default=0.0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_route)

    o = sub.add_parser("oracle", help="solve a small instance exactly")
    o.add_argument("--instance", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    u = sub.add_parser("run", help="simulate one scenario")
    u.add_argument("--scenario", required=True)
    u.add_argument("--mode")
    u.add_argument("--level")
    u.add_argument("--seed", type=int)
    u.add_argument("--evs", type=int)
    u.add_argument("--out-csv")
    u.add_argument("--out-json")
    u.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a mode/level/count/seed grid")
    s.add_argument("--scenario", required=True)
    s.add_argument("--modes", default="SCS,SCS_MED")
    s.add_argument("--levels", default="L1,L2,L3")
    s.add_argument("--evs", default="10,20,30,40,50,60,70,80,90,100")
    s.add_argument("--seeds", default="0,1,2,3,4")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, sim.CalibrationError, oracle_mod.OracleError) as exc:
        print(f"medsim: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"medsim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
