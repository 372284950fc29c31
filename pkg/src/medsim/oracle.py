"""Exhaustive single-EV solver used as the correctness oracle for the router.

The solver enumerates source-to-destination walks of the constrained
shortest-path formulation on small instances, with charging decisions at
station visits and contiguous attach runs along the mobile-charger cycle.
Repeat visits are bounded the way the dummy-node expansion bounds them:
every charger node may be charged at / attached to at most ``visit_limit``
times, and a base arc may be traversed at most as often as its expanded
copies allow. Waits are frozen inputs here; the formulation treats them as
data, not as queue dynamics.

Branch and bound with an admissible drive-time bound keeps the enumeration
exact while pruning hopeless prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .charging import CycleSegment, BookResult, scs_charge_time
from .energy import InductionParams, induced_energy
from .road_graph import RoadGraph
from .routing import (EvRequest, MedAttach, PathCache, RouteAssignment, ScsVisit,
                      objective_time)

INFINITE = math.inf
NODE_BOUND = 14
_TOL = 1e-9


class OracleError(Exception):
    """Instance outside the oracle's bounds; it refuses rather than truncates."""


# -- frozen infrastructure (waits as data, bookings always granted) -----------


class FrozenScs:
    """Station with a fixed queue wait, for static-ledger routing."""

    def __init__(self, node: int, rate_kw: float, wait_s: float = 0.0):
        self.node = node
        self.rate_kw = rate_kw
        self.fixed_wait_s = wait_s

    def wait_s(self, now, drive_s):
        return self.fixed_wait_s

    def charge_s(self, energy_kwh, capacity_kwh):
        return scs_charge_time(energy_kwh, capacity_kwh, self.rate_kw)

    def book(self, ev, start_s, end_s):
        return BookResult(True)


class FrozenMed:
    """Mobile charger with fixed per-point waits and no booking ledger."""

    def __init__(self, graph: RoadGraph, induction: InductionParams,
                 waits=None, battery_kwh: float = INFINITE):
        pts = graph.med_points
        if len(pts) < 2:
            raise ValueError("graph has no mobile-charger cycle")
        segs = []
        for k, i in enumerate(pts):
            j = pts[(k + 1) % len(pts)]
            attr = graph.arc(i, j)
            segs.append(CycleSegment(k, i, j, attr.drive_time_s, attr.energy_kwh,
                                     induced_energy(attr.drive_time_s, induction)))
        self.points = pts
        self.segments = tuple(segs)
        self.waits = dict(waits or {})
        self.battery_kwh = battery_kwh
        self.max_passes = max(1, len(graph.clones_of(pts[0])) + 1)

    def waiting(self, start_idx, ev_arrival_s, n_segments):
        return self.waits.get(self.points[start_idx], 0.0), 0

    def segment_keys(self, start_idx, pass_no, n_segments):
        u = len(self.segments)
        return tuple(((start_idx + k) % u, pass_no + (start_idx + k) // u)
                     for k in range(n_segments))

    def book_attach(self, ev, segment_keys, energy_kwh, start_s, end_s):
        return BookResult(True)


@dataclass
class OracleInstance:
    graph: RoadGraph
    request: EvRequest
    scs_waits: dict = field(default_factory=dict)
    scs_rates: dict = field(default_factory=dict)
    med_waits: dict = field(default_factory=dict)
    induction: InductionParams | None = None
    med_battery_kwh: float = INFINITE
    default_rate_kw: float = 19.2

    def __post_init__(self):
        g = self.graph
        if g.is_dummy(self.request.source) or g.is_dummy(self.request.dest):
            raise OracleError("request endpoints must be base nodes")
        if any(w < 0 for w in list(self.scs_waits.values()) + list(self.med_waits.values())):
            raise OracleError("waits must be nonnegative")

    def rate_of(self, node) -> float:
        return self.scs_rates.get(node, self.default_rate_kw)

    def frozen_infrastructure(self):
        from .charging import Infrastructure
        scs = [FrozenScs(n, self.rate_of(n), self.scs_waits.get(n, 0.0))
               for n in self.graph.scs_nodes]
        meds = []
        if self.graph.med_points:
            if self.induction is None:
                raise OracleError("instance has a mobile charger but no induction parameters")
            meds.append(FrozenMed(self.graph, self.induction, self.med_waits,
                                  self.med_battery_kwh))
        return Infrastructure(scs_units=scs, med_units=meds)


@dataclass
class OracleSolution:
    best: RouteAssignment | None
    objective_s: float
    explored: int
    feasible: bool


def _base_adjacency(g: RoadGraph):
    adj = {}
    for n in g.base_nodes:
        adj[n] = tuple((nbr, attr) for nbr, attr in g.neighbors(n)
                       if not g.is_dummy(nbr))
    return adj


def solve_exact(inst: OracleInstance, search_budget: int = 2_000_000) -> OracleSolution:
    """Global minimum-travel-time plan for one EV, or infeasibility.

    Depth-first enumeration over walks with per-visit charging and attach
    decisions; an admissible remaining-drive-time bound prunes branches that
    cannot beat the incumbent, so the returned objective is exact.
    """
    g = inst.graph
    if len(g.nodes) > NODE_BOUND:
        raise OracleError(
            f"{len(g.nodes)} nodes (dummies included) exceed the oracle "
            f"bound of {NODE_BOUND}; refusing rather than truncating")
    req = inst.request
    Q = req.capacity_kwh
    caches = PathCache(g)
    adj = _base_adjacency(g)
    scs_set = set(g.scs_nodes)
    med_set = set(g.med_points)
    visit_cap = {n: 1 + len(g.clones_of(n)) for n in list(scs_set) + list(med_set)}
    arc_cap = {}
    for n, out in adj.items():
        extra_n = len(g.clones_of(n))
        for nbr, _ in out:
            arc_cap[(n, nbr)] = (1 + extra_n) * (1 + len(g.clones_of(nbr)))

    med = None
    if med_set:
        if inst.induction is None:
            raise OracleError("instance has a mobile charger but no induction parameters")
        med = FrozenMed(g, inst.induction, inst.med_waits, inst.med_battery_kwh)
        med_idx = {p: k for k, p in enumerate(med.points)}

    lb_time = caches.rev(req.dest, "time")
    min_e_dest = caches.rev(req.dest, "energy")
    chargers = sorted(scs_set | med_set)
    min_e_charger = {c: caches.rev(c, "energy") for c in chargers}
    min_t_charger = {c: caches.rev(c, "time") for c in chargers}
    budgets = {c: ("scs" if c in scs_set else "med") for c in chargers}

    best = {"obj": INFINITE, "snap": None}
    explored = [0]
    used = {}
    charges = dict.fromkeys(scs_set, 0)
    attaches = dict.fromkeys(med_set, 0)
    walk = [req.source]
    trace = [req.energy_kwh]
    zs, qs = [], []

    def snapshot():
        return (list(walk), list(trace),
                [ScsVisit(*v) for v in zs],
                [MedAttach(*a) for a in qs])

    def lower_bound(node, eps):
        # admissible remaining drive time: straight to the destination when
        # the battery covers it, else via the nearest charger that is both
        # energy-reachable and still has visit budget (every completion must
        # touch one first); infinite means the branch is dead
        if eps + _TOL >= min_e_dest.get(node, INFINITE):
            return lb_time.get(node, INFINITE)
        bound = INFINITE
        for c in chargers:
            left = charges[c] if budgets[c] == "scs" else attaches[c]
            if left >= visit_cap[c]:
                continue
            if eps + _TOL < min_e_charger[c].get(node, INFINITE):
                continue
            t = min_t_charger[c].get(node, INFINITE) + lb_time.get(c, INFINITE)
            if t < bound:
                bound = t
        return bound

    def explore(node, eps, obj, may_charge):
        explored[0] += 1
        if explored[0] > search_budget:
            raise OracleError("search budget exceeded; instance too loose for the oracle")
        if node == req.dest:
            if obj < best["obj"] - 1e-12:
                best["obj"] = obj
                best["snap"] = snapshot()
            return
        if obj + lower_bound(node, eps) >= best["obj"] - 1e-12:
            return

        if may_charge and node in scs_set and charges[node] < visit_cap[node] \
                and eps < Q - 1e-12:
            wait = inst.scs_waits.get(node, 0.0)
            ct = scs_charge_time(eps, Q, inst.rate_of(node))
            charges[node] += 1
            zs.append((node, len(walk) - 1, wait, ct, eps))
            old = trace[-1]
            trace[-1] = Q
            explore(node, Q, obj + wait + ct, False)
            trace[-1] = old
            zs.pop()
            charges[node] -= 1

        if node in med_set and attaches[node] < visit_cap[node]:
            _explore_attach(node, eps, obj)

        for nbr, attr in adj[node]:
            key = (node, nbr)
            if used.get(key, 0) >= arc_cap[key]:
                continue
            if eps - attr.energy_kwh < -_TOL:
                continue
            used[key] = used.get(key, 0) + 1
            walk.append(nbr)
            trace.append(eps - attr.energy_kwh)
            explore(nbr, eps - attr.energy_kwh, obj + attr.drive_time_s, True)
            trace.pop()
            walk.pop()
            used[key] = used.get(key, 1) - 1

    def _explore_attach(node, eps, obj):
        start_idx = med_idx[node]
        u = len(med.segments)
        wait = inst.med_waits.get(node, 0.0)
        attaches[node] += 1
        meet_leg = len(walk) - 1
        occupied = []
        arcs, induced = [], []
        cur, dispensed, drive = eps, 0.0, 0.0
        for n_seg in range(1, med.max_passes * u + 1):
            seg = med.segments[(start_idx + n_seg - 1) % u]
            key = (seg.i, seg.j)
            if used.get(key, 0) >= arc_cap[key]:
                break
            dispensed += seg.induced_kwh
            if dispensed > inst.med_battery_kwh + _TOL:
                break
            cur = min(Q, cur - seg.energy_kwh + seg.induced_kwh)
            if cur < -_TOL:
                break
            drive += seg.drive_s
            used[key] = used.get(key, 0) + 1
            occupied.append(key)
            walk.append(seg.j)
            trace.append(cur)
            arcs.append(key)
            induced.append(seg.induced_kwh)
            detach = med.points[(start_idx + n_seg) % u]
            keys = med.segment_keys(start_idx, 0, n_seg)
            qs.append((node, detach, meet_leg, wait, drive, tuple(arcs),
                       tuple(induced), keys, cur - eps, dispensed))
            explore(detach, cur, obj + wait + drive, True)
            qs.pop()
        for key in occupied:
            used[key] -= 1
            walk.pop()
            trace.pop()
        attaches[node] -= 1

    if req.energy_kwh >= -_TOL:
        explore(req.source, req.energy_kwh, 0.0, True)

    if best["snap"] is None:
        return OracleSolution(None, INFINITE, explored[0], False)
    legs, tr, z_list, q_list = best["snap"]
    assignment = RouteAssignment(
        ev=req.ev, source=req.source, dest=req.dest, capacity_kwh=Q,
        energy_start_kwh=req.energy_kwh, legs=legs,
        x_arcs=list(zip(legs, legs[1:])),
        y_arcs=[arc for a in q_list for arc in a.segments],
        z_visits=z_list, q_points=q_list, energy_trace=tr,
        total_time_s=best["obj"])
    return OracleSolution(assignment, best["obj"], explored[0], True)


# -- constraint-by-constraint verification ------------------------------------


def verify(inst: OracleInstance, a: RouteAssignment, tol: float = 1e-6,
           check_waits: bool = True) -> str:
    """Check a plan against every formulation constraint; name the first broken one.

    Returns "ok" or "violated(<id>)" where the id is the constraint number:
    (2) flow conservation, (3) charging only on traversed arcs, (4) energy
    bookkeeping, (5) level never negative, (6) level never above capacity,
    (7) full charge at visited stations, (8) some charger or the destination
    stays within reach at every visited node, (9)-(11) decision domains.
    """
    g = inst.graph
    Q = a.capacity_kwh

    # (2) flow conservation along the walk
    if not a.legs or a.legs[0] != a.source or a.legs[-1] != a.dest:
        return "violated(2)"
    if a.x_arcs != list(zip(a.legs, a.legs[1:])):
        return "violated(2)"
    for i, j in a.x_arcs:
        if g.arc(i, j) is None:
            return "violated(2)"

    # (3) attach spans lie on the walk, contiguously, as cycle segments
    flat_y = [arc for att in a.q_points for arc in att.segments]
    if flat_y != list(a.y_arcs):
        return "violated(3)"
    cycle_arcs = set(g.med_cycle_segments()) if g.med_points else set()
    for att in a.q_points:
        span = a.x_arcs[att.leg_index:att.leg_index + len(att.segments)]
        if list(att.segments) != span:
            return "violated(3)"
        if any(arc not in cycle_arcs for arc in att.segments):
            return "violated(3)"

    # recompute the energy profile
    gain_at = {}
    for att in a.q_points:
        for off, e_in in enumerate(att.induced_per_segment):
            gain_at[att.leg_index + off] = e_in
    charge_at = {}
    for v in a.z_visits:
        if not (0 <= v.leg_index < len(a.legs)) or a.legs[v.leg_index] != v.node:
            return "violated(10)"
        charge_at.setdefault(v.leg_index, []).append(v)
    if len(a.energy_trace) != len(a.legs):
        return "violated(4)"
    eps = a.energy_start_kwh
    recomputed = []
    for k in range(len(a.legs)):
        if k > 0:
            arc = g.arc(a.legs[k - 1], a.legs[k])
            eps = min(Q, eps - arc.energy_kwh + gain_at.get(k - 1, 0.0))
        recomputed.append(eps)
        if eps < -_TOL:
            return "violated(5)"
        for v in charge_at.get(k, ()):
            if abs(v.arrive_kwh - eps) > tol:
                return "violated(4)"
            eps = Q
            recomputed[-1] = eps
        if eps > Q + _TOL:
            return "violated(6)"
        if abs(a.energy_trace[k] - eps) > tol:
            return "violated(4)"

    # (7) full charge at every visited station
    for v in a.z_visits:
        if abs(a.energy_trace[v.leg_index] - Q) > tol:
            return "violated(7)"
        expected = scs_charge_time(v.arrive_kwh, Q, inst.rate_of(g.base_of(v.node)))
        if abs(v.charge_s - expected) > tol:
            return "violated(4)"
        if check_waits and abs(v.wait_s - inst.scs_waits.get(g.base_of(v.node), 0.0)) > tol:
            return "violated(4)"
    if check_waits:
        for att in a.q_points:
            if abs(att.wait_s - inst.med_waits.get(g.base_of(att.meet_node), 0.0)) > tol:
                return "violated(4)"

    # (8) wherever the EV stands it can still reach the destination or a charger
    caches = PathCache(g)
    min_e_dest = caches.rev(a.dest, "energy")
    chargers = sorted(set(g.scs_nodes) | set(g.med_points))
    min_e_charger = {c: caches.rev(c, "energy") for c in chargers}
    for k, node in enumerate(a.legs):
        eps_here = recomputed[k]
        if eps_here + _TOL >= min_e_dest.get(node, INFINITE):
            continue
        if any(eps_here + _TOL >= min_e_charger[c].get(node, INFINITE) for c in chargers):
            continue
        return "violated(8)"

    # (9)-(11) decision domains: arc multiplicities and per-charger visit budgets
    scs_set = set(g.scs_nodes)
    med_set = set(g.med_points)
    counts = {}
    for arc in a.x_arcs:
        counts[arc] = counts.get(arc, 0) + 1
    for (i, j), n in counts.items():
        cap = (1 + len(g.clones_of(i))) * (1 + len(g.clones_of(j)))
        if n > cap:
            return "violated(9)"
    z_counts = {}
    for v in a.z_visits:
        b = g.base_of(v.node)
        if b not in scs_set:
            return "violated(10)"
        z_counts[b] = z_counts.get(b, 0) + 1
        if z_counts[b] > 1 + len(g.clones_of(b)):
            return "violated(10)"
    q_counts = {}
    for att in a.q_points:
        b = g.base_of(att.meet_node)
        if b not in med_set:
            return "violated(11)"
        q_counts[b] = q_counts.get(b, 0) + 1
        if q_counts[b] > 1 + len(g.clones_of(b)):
            return "violated(11)"

    if abs(a.total_time_s - objective_time(g, a)) > tol:
        return "violated(4)"
    return "ok"


# -- instance (de)serialization ------------------------------------------------


def instance_from_json(doc) -> OracleInstance:
    """Build an instance from the CLI's JSON schema."""
    from .energy import VehicleParams
    from .road_graph import load_graph

    vehicle = VehicleParams(**doc["vehicle"]) if "vehicle" in doc else None
    g = load_graph(doc["graph"], vehicle=vehicle, visit_limit=doc.get("visit_limit", 2))
    r = doc["request"]
    request = EvRequest(str(r.get("ev", "ev0")), r["source"], r["dest"],
                        float(r["capacity_kwh"]), float(r["energy_kwh"]))
    scs_waits, scs_rates = {}, {}
    for s in doc.get("scs", ()):
        scs_waits[s["node"]] = float(s.get("wait_s", 0.0))
        scs_rates[s["node"]] = float(s.get("rate_kw", 19.2))
    med = doc.get("med", {})
    med_waits = {int(k): float(v) for k, v in med.get("wait_s", {}).items()}
    induction = None
    if "c_ind" in med:
        induction = InductionParams(float(med["c_ind"]), float(med["p_ind_kw"]))
    return OracleInstance(g, request, scs_waits, scs_rates, med_waits, induction,
                          float(med.get("battery_kwh", INFINITE)))
