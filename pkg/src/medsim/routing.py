"""Shortest paths and energy-aware route construction.

The router mirrors the two-stage heuristic it reproduces: try the plain
time-shortest path first; when the battery cannot cover it, pick the best
reachable energy point (static station or mobile-charger cycle point), plan
the charge there, and continue, recursing from the exit point while the
remaining leg stays infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .road_graph import RoadGraph

INFINITE = math.inf
_EPS_TOL = 1e-9


class NoPath(Exception):
    """Target not reachable in the graph."""


class Stranded(Exception):
    """The EV cannot complete its trip with any reachable energy point."""


def _weight_fn(weight: str):
    if weight == "time":
        return lambda attr: attr.drive_time_s
    if weight == "energy":
        return lambda attr: attr.energy_kwh
    raise ValueError(f"unknown weight {weight!r}")


def _dijkstra_dist(adj, source, weight_of):
    dist = {source: 0.0}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, node = heappop(heap)
        if node in done:
            continue
        done.add(node)
        for nbr, attr in adj[node]:
            if nbr in done:
                continue
            nd = d + weight_of(attr)
            if nd < dist.get(nbr, INFINITE):
                dist[nbr] = nd
                heappush(heap, (nd, nbr))
    return dist


class PathCache:
    """Memoized single-source distance maps and path reconstructions.

    One instance per graph per run; routing repeatedly asks for distances
    from the same sources (EV positions) and to the same targets (chargers,
    destinations), so the maps are worth keeping.
    """

    def __init__(self, g: RoadGraph):
        self.g = g
        radj = {n: [] for n in g.nodes}
        for (i, j), attr in g.arcs.items():
            radj[j].append((i, attr))
        self._radj = {n: tuple(sorted(out, key=lambda e: e[0])) for n, out in radj.items()}
        self._fwd = {}
        self._rev = {}
        self._paths = {}

    def fwd(self, source, weight: str = "time"):
        """Distances from ``source`` to every reachable node."""
        key = (source, weight)
        if key not in self._fwd:
            self._fwd[key] = _dijkstra_dist(self.g._adj, source, _weight_fn(weight))
        return self._fwd[key]

    def rev(self, target, weight: str = "time"):
        """Distances from every node to ``target`` (Dijkstra on reversed arcs)."""
        key = (target, weight)
        if key not in self._rev:
            self._rev[key] = _dijkstra_dist(self._radj, target, _weight_fn(weight))
        return self._rev[key]

    def path(self, source, target, weight: str = "time"):
        """Minimum-cost path as a node tuple, ties broken lexicographically."""
        key = (source, target, weight)
        if key not in self._paths:
            self._paths[key] = _lex_path(self.g, source, target,
                                         self.rev(target, weight), _weight_fn(weight))
        return self._paths[key]


def _lex_path(g, source, target, rev_dist, weight_of):
    if source == target:
        return (source,)
    total = rev_dist.get(source)
    if total is None:
        raise NoPath(f"no path from {source} to {target}")
    path = [source]
    seen = {source}
    cur, remaining = source, total
    cap = len(g.nodes) + 1
    while cur != target:
        tol = 1e-9 * (1.0 + abs(total))
        nxt = None
        for nbr, attr in g.neighbors(cur):
            if nbr in seen and nbr != target:
                continue
            r = rev_dist.get(nbr)
            if r is None:
                continue
            if abs(weight_of(attr) + r - remaining) <= tol:
                nxt = (nbr, r)
                break
        if nxt is None or len(path) >= cap:
            raise NoPath(f"path reconstruction from {source} to {target} failed")
        cur, remaining = nxt
        path.append(cur)
        seen.add(cur)
    return tuple(path)


def dijkstra(g: RoadGraph, source, target, weight: str = "time"):
    """Minimum-cost path and its cost; deterministic lexicographic tie-break.

    The cost is re-summed along the returned path so that independent
    implementations walking the same arcs get bit-identical totals.
    """
    if source not in g.nodes or target not in g.nodes:
        raise NoPath("endpoint not in graph")
    if source == target:
        return [source], 0.0
    cache = PathCache(g)
    path = list(cache.path(source, target, weight))
    w = _weight_fn(weight)
    cost = 0.0
    for i, j in zip(path, path[1:]):
        cost += w(g.arc(i, j))
    return path, cost


def route_time(g: RoadGraph, path) -> float:
    t = 0.0
    for i, j in zip(path, path[1:]):
        t += g.arc(i, j).drive_time_s
    return t


def route_energy(g: RoadGraph, path) -> float:
    e = 0.0
    for i, j in zip(path, path[1:]):
        e += g.arc(i, j).energy_kwh
    return e


def route_feasible(g: RoadGraph, path, energy_start_kwh: float, gains=None) -> bool:
    """Energy feasibility of a path with the battery it starts on.

    ``gains`` credits inductive income: a mapping of arc index to kWh, or a
    single number credited only after the final arc (the conservative
    placement when the timing of the gain is unknown). Besides the overall
    balance, the running level must stay nonnegative at every intermediate
    node; a credit arriving after the battery has already run dry cannot
    rescue the route.
    """
    n_arcs = len(path) - 1
    if isinstance(gains, dict):
        gain_at = gains
    elif gains:
        gain_at = {n_arcs - 1: float(gains)}
    else:
        gain_at = {}
    eps = energy_start_kwh
    for k in range(n_arcs):
        attr = g.arc(path[k], path[k + 1])
        if attr is None:
            raise NoPath(f"path uses missing arc ({path[k]},{path[k + 1]})")
        eps = eps - attr.energy_kwh + gain_at.get(k, 0.0)
        if eps < -_EPS_TOL:
            return False
    return True


# -- requests and realized routes --------------------------------------------


@dataclass(frozen=True)
class EvRequest:
    ev: str
    source: int
    dest: int
    capacity_kwh: float
    energy_kwh: float

    def __post_init__(self):
        if self.source == self.dest:
            raise ValueError("source and destination must differ")
        if not 0.0 <= self.energy_kwh <= self.capacity_kwh:
            raise ValueError("initial energy must lie in [0, capacity]")


@dataclass
class ScsVisit:
    node: int
    leg_index: int
    wait_s: float
    charge_s: float
    arrive_kwh: float


@dataclass
class MedAttach:
    meet_node: int
    detach_node: int
    leg_index: int
    wait_s: float
    attach_s: float
    segments: tuple
    induced_per_segment: tuple
    booking_keys: tuple
    gain_kwh: float
    dispensed_kwh: float


@dataclass
class RouteAssignment:
    """One EV's realized plan: walk, charging stops, and energy profile.

    ``energy_trace`` holds the battery level at every node of ``legs`` right
    after whatever happens there (charging to full at a station visit,
    capped inductive gain along attached arcs).
    """

    ev: str
    source: int
    dest: int
    capacity_kwh: float
    energy_start_kwh: float
    legs: list
    x_arcs: list
    y_arcs: list
    z_visits: list
    q_points: list
    energy_trace: list
    total_time_s: float
    depart_s: float = 0.0

    @property
    def wait_total_s(self) -> float:
        return sum(v.wait_s for v in self.z_visits) + sum(a.wait_s for a in self.q_points)

    @property
    def charge_total_s(self) -> float:
        return sum(v.charge_s for v in self.z_visits)


def objective_time(g: RoadGraph, a: RouteAssignment) -> float:
    """Travel time recomputed from the decision variables alone.

    Drive time over traversed arcs, charge plus wait at station visits, and
    wait at attach points; attached driving is already drive time and is not
    counted twice.
    """
    t = 0.0
    for i, j in a.x_arcs:
        t += g.arc(i, j).drive_time_s
    t += sum(v.wait_s + v.charge_s for v in a.z_visits)
    t += sum(p.wait_s for p in a.q_points)
    return t


def check_assignment(g: RoadGraph, a: RouteAssignment, tol: float = 1e-6):
    """All invariant violations of a realized route (empty list means clean)."""
    bad = []
    Q = a.capacity_kwh
    if not a.legs or a.legs[0] != a.source:
        bad.append("walk does not start at the source")
    if a.legs and a.legs[-1] != a.dest:
        bad.append("walk does not end at the destination")
    if a.x_arcs != list(zip(a.legs, a.legs[1:])):
        bad.append("x arcs do not match the walk")
    for i, j in a.x_arcs:
        if g.arc(i, j) is None:
            bad.append(f"walk uses missing arc ({i},{j})")
            return bad
    if len(a.energy_trace) != len(a.legs):
        bad.append("energy trace length does not match the walk")
        return bad

    gain_at = {}
    for att in a.q_points:
        if list(att.segments) != a.x_arcs[att.leg_index:att.leg_index + len(att.segments)]:
            bad.append("attach span does not match the walk slice")
        if att.meet_node != a.legs[att.leg_index]:
            bad.append("attach start node mismatch")
        if att.detach_node != a.legs[att.leg_index + len(att.segments)]:
            bad.append("detach node mismatch")
        if att.wait_s < 0:
            bad.append("negative attach wait")
        for off, induced in enumerate(att.induced_per_segment):
            gain_at[att.leg_index + off] = induced
    flat_y = [arc for att in a.q_points for arc in att.segments]
    if flat_y != list(a.y_arcs):
        bad.append("y arcs do not equal the concatenated attach spans")

    charge_at = {}
    for v in a.z_visits:
        if not (0 <= v.leg_index < len(a.legs)) or a.legs[v.leg_index] != v.node:
            bad.append("station visit index does not match the walk")
            continue
        if g.base_of(v.node) not in g.scs_nodes:
            bad.append(f"station visit at non-station node {v.node}")
        if v.wait_s < 0 or v.charge_s < 0:
            bad.append("negative wait or charge time at a station")
        charge_at.setdefault(v.leg_index, []).append(v)

    eps = a.energy_start_kwh
    for k, node in enumerate(a.legs):
        if k > 0:
            arc = g.arc(a.legs[k - 1], node)
            eps = eps - arc.energy_kwh + gain_at.get(k - 1, 0.0)
            eps = min(eps, Q)
        if eps < -_EPS_TOL:
            bad.append(f"battery below zero arriving at walk index {k}")
        for v in charge_at.get(k, ()):
            if abs(v.arrive_kwh - eps) > tol:
                bad.append("recorded arrival energy at station disagrees with the trace")
            eps = Q
        if eps > Q + _EPS_TOL:
            bad.append(f"battery above capacity at walk index {k}")
        if abs(a.energy_trace[k] - eps) > tol:
            bad.append(f"energy trace diverges at walk index {k}")
    for v in a.z_visits:
        if 0 <= v.leg_index < len(a.energy_trace) and \
                abs(a.energy_trace[v.leg_index] - Q) > tol:
            bad.append("battery not full right after a station visit")

    if abs(a.total_time_s - objective_time(g, a)) > tol:
        bad.append("stored total time disagrees with the recomputed objective")
    return bad


# -- best-energy-point selection ----------------------------------------------


@dataclass
class RouterConfig:
    leg_limit: int = 4
    trip_scoring: bool = True
    rebook_attempts: int = 6


DEFAULT_CONFIG = RouterConfig()


@dataclass
class _Candidate:
    kind: str
    unit: object
    point: int
    path: tuple
    drive_s: float
    score: float
    # scs fields
    wait_s: float = 0.0
    charge_s: float = 0.0
    arrive_kwh: float = 0.0
    # med fields
    start_idx: int = 0
    n_segments: int = 0
    pass_no: int = 0
    attach_s: float = 0.0
    arcs: tuple = ()
    induced: tuple = ()
    keys: tuple = ()
    eps_after: float = 0.0
    dispensed_kwh: float = 0.0
    detach_node: int = 0

    @property
    def sort_key(self):
        return (self.score, 0 if self.kind == "scs" else 1, self.point)


def _plan_med_span(unit, start_idx, eps_at_meet, capacity, need_to_finish):
    """Shortest attach run after which the EV can also finish the trip.

    Walks cycle segments forward from the meeting point, tracking the capped
    battery level and the gross energy the charger dispenses; stops at the
    first detach point whose remaining trip the battery now covers
    (``need_to_finish`` maps a node to that requirement). Returns None when
    no run within the pass budget or battery works.
    """
    segs = unit.segments
    u = len(segs)
    max_segments = unit.max_passes * u
    eps = eps_at_meet
    dispensed = 0.0
    attach_s = 0.0
    arcs, induced = [], []
    for n in range(1, max_segments + 1):
        seg = segs[(start_idx + n - 1) % u]
        dispensed += seg.induced_kwh
        if dispensed > unit.battery_kwh + _EPS_TOL:
            return None
        eps = min(capacity, eps - seg.energy_kwh + seg.induced_kwh)
        if eps < -_EPS_TOL:
            return None
        attach_s += seg.drive_s
        arcs.append((seg.i, seg.j))
        induced.append(seg.induced_kwh)
        detach_idx = (start_idx + n) % u
        detach = unit.points[detach_idx]
        if eps >= need_to_finish(detach) - _EPS_TOL:
            return n, eps, attach_s, tuple(arcs), tuple(induced), detach
    return None


def find_best_energy_point(g: RoadGraph, caches: PathCache, request: EvRequest,
                           at, energy_kwh: float, now: float, infra,
                           gate=None, config: RouterConfig = DEFAULT_CONFIG) -> _Candidate:
    """Pick the reachable energy point minimizing the EV's time outlay.

    Every station and cycle point the comms gate lets through is scored:
    drive there (on the time-shortest path, which must be energy-feasible),
    plus queue wait and charge time for stations, plus meeting wait and
    attached drive for mobile chargers, plus the drive-time estimate from
    the exit point to the destination when trip scoring is on. Ties prefer
    stations, then smaller node ids.
    """
    Q = request.capacity_kwh
    rev_time = caches.rev(request.dest, "time") if config.trip_scoring else {}
    candidates = []

    need_memo = {}

    def need_to_finish(node):
        # energy along the time-shortest tail the EV would actually drive
        if node not in need_memo:
            if node == request.dest:
                need_memo[node] = 0.0
            else:
                try:
                    tail = caches.path(node, request.dest, "time")
                except NoPath:
                    need_memo[node] = INFINITE
                else:
                    need_memo[node] = route_energy(g, tail)
        return need_memo[node]

    for unit in getattr(infra, "scs_units", ()):
        node = unit.node
        if gate is not None and not gate("scs", node):
            continue
        if node == at:
            path, drive = (at,), 0.0
        else:
            try:
                path = caches.path(at, node, "time")
            except NoPath:
                continue
            if not route_feasible(g, path, energy_kwh):
                continue
            drive = route_time(g, path)
        arrive = max(0.0, energy_kwh - route_energy(g, path))
        if arrive >= Q - 1e-12:
            continue  # nothing to gain here
        wait = unit.wait_s(now, drive)
        ct = unit.charge_s(arrive, Q)
        score = drive + wait + ct
        if config.trip_scoring:
            finish = rev_time.get(node, INFINITE)
            if finish == INFINITE:
                continue
            score += finish
        candidates.append(_Candidate("scs", unit, node, path, drive, score,
                                     wait_s=wait, charge_s=ct, arrive_kwh=arrive))

    for unit in getattr(infra, "med_units", ()):
        for idx, point in enumerate(unit.points):
            if gate is not None and not gate("med", point):
                continue
            if point == at:
                path, drive = (at,), 0.0
            else:
                try:
                    path = caches.path(at, point, "time")
                except NoPath:
                    continue
                if not route_feasible(g, path, energy_kwh):
                    continue
                drive = route_time(g, path)
            eps_meet = max(0.0, energy_kwh - route_energy(g, path))
            if eps_meet >= need_to_finish(point) - _EPS_TOL:
                continue  # no deficit at this point, it is not an energy stop
            span = _plan_med_span(unit, idx, eps_meet, Q, need_to_finish)
            if span is None:
                continue
            n_seg, eps_after, attach_s, arcs, induced, detach = span
            wait, pass_no = unit.waiting(idx, now + drive, n_seg)
            keys = unit.segment_keys(idx, pass_no, n_seg)
            score = drive + wait + attach_s
            if config.trip_scoring:
                finish = rev_time.get(detach, INFINITE)
                if finish == INFINITE:
                    continue
                score += finish
            candidates.append(_Candidate(
                "med", unit, point, path, drive, score,
                start_idx=idx, n_segments=n_seg, pass_no=pass_no, attach_s=attach_s,
                wait_s=wait, arcs=arcs, induced=induced, keys=keys,
                eps_after=eps_after, dispensed_kwh=sum(induced), detach_node=detach))

    if not candidates:
        raise Stranded(f"EV {request.ev}: no feasible energy point from node {at}")
    return min(candidates, key=lambda c: c.sort_key)


def _extend(g, legs, trace, path, eps, capacity, gains=None):
    for k, (i, j) in enumerate(zip(path, path[1:])):
        eps = eps - g.arc(i, j).energy_kwh + (gains[k] if gains else 0.0)
        eps = min(eps, capacity)
        legs.append(j)
        trace.append(eps)
    return eps


def find_shortest_path(g: RoadGraph, request: EvRequest, infra, now: float = 0.0,
                       gate=None, config: RouterConfig = DEFAULT_CONFIG,
                       caches: PathCache | None = None) -> RouteAssignment:
    """Feasible route for one EV, charging along the way only when needed.

    A feasible direct path is returned untouched. Otherwise charging stops
    are inserted one at a time via :func:`find_best_energy_point`; each stop
    is booked against the live ledgers, and a rejected booking triggers a
    full re-selection. Raises :class:`Stranded` when no plan exists within
    the leg limit.
    """
    caches = caches or PathCache(g)
    Q = request.capacity_kwh
    try:
        direct = caches.path(request.source, request.dest, "time")
    except NoPath:
        raise Stranded(f"EV {request.ev}: destination not reachable in the graph")

    legs = [request.source]
    trace = [request.energy_kwh]
    z_visits, q_points = [], []
    eps = request.energy_kwh
    at = request.source
    elapsed = 0.0

    if route_feasible(g, direct, eps):
        eps = _extend(g, legs, trace, direct, eps, Q)
        return _finish(g, request, legs, trace, z_visits, q_points, now)

    for _ in range(config.leg_limit):
        plan = None
        for _attempt in range(config.rebook_attempts):
            cand = find_best_energy_point(g, caches, request, at, eps,
                                          now + elapsed, infra, gate, config)
            if cand.kind == "scs":
                start = now + elapsed + cand.drive_s + cand.wait_s
                booked = cand.unit.book(request.ev, start, start + cand.charge_s)
            else:
                start = now + elapsed + cand.drive_s + cand.wait_s
                booked = cand.unit.book_attach(request.ev, cand.keys, cand.dispensed_kwh,
                                               start, start + cand.attach_s)
            if booked.accepted:
                plan = cand
                break
        if plan is None:
            raise Stranded(f"EV {request.ev}: bookings kept being rejected")

        eps = _extend(g, legs, trace, plan.path, eps, Q)
        elapsed += plan.drive_s
        if plan.kind == "scs":
            z_visits.append(ScsVisit(plan.point, len(legs) - 1, plan.wait_s,
                                     plan.charge_s, eps))
            eps = Q
            trace[-1] = Q
            elapsed += plan.wait_s + plan.charge_s
            at = plan.point
        else:
            q_points.append(MedAttach(plan.point, plan.detach_node, len(legs) - 1,
                                      plan.wait_s, plan.attach_s, plan.arcs,
                                      plan.induced, plan.keys, plan.eps_after - eps,
                                      plan.dispensed_kwh))
            eps = _extend(g, legs, trace, (plan.point,) + tuple(j for _, j in plan.arcs),
                          eps, Q, gains=plan.induced)
            elapsed += plan.wait_s + plan.attach_s
            at = plan.detach_node

        if at == request.dest:
            return _finish(g, request, legs, trace, z_visits, q_points, now)
        try:
            tail = caches.path(at, request.dest, "time")
        except NoPath:
            continue
        if route_feasible(g, tail, eps):
            eps = _extend(g, legs, trace, tail, eps, Q)
            return _finish(g, request, legs, trace, z_visits, q_points, now)

    raise Stranded(f"EV {request.ev}: still infeasible after "
                   f"{config.leg_limit} charging stops")


def _finish(g, request, legs, trace, z_visits, q_points, now):
    x_arcs = list(zip(legs, legs[1:]))
    y_arcs = [arc for att in q_points for arc in att.segments]
    a = RouteAssignment(
        ev=request.ev, source=request.source, dest=request.dest,
        capacity_kwh=request.capacity_kwh, energy_start_kwh=request.energy_kwh,
        legs=legs, x_arcs=x_arcs, y_arcs=y_arcs, z_visits=z_visits,
        q_points=q_points, energy_trace=trace, total_time_s=0.0, depart_s=now)
    a.total_time_s = objective_time(g, a)
    return a
