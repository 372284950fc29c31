"""Directed weighted road network with charger nodes and a mobile-charger cycle.

Charger locations (static stations and cycle points of the mobile charger)
are cloned into dummy nodes at build time so path formulations that forbid
node revisits can still express repeat visits. Dummies inherit every arc of
their base node; a query on a dummy behaves exactly like one on the base.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .energy import VehicleParams, segment_energy

INFINITE = math.inf


class GraphError(ValueError):
    """Raised for inconsistent graph descriptions or illegal queries."""


@dataclass(frozen=True)
class ArcAttr:
    drive_time_s: float
    energy_kwh: float
    length_m: float

    def __post_init__(self):
        if not self.drive_time_s > 0:
            raise GraphError(f"arc drive time must be positive, got {self.drive_time_s}")
        if self.energy_kwh < 0:
            raise GraphError(f"arc energy must be nonnegative, got {self.energy_kwh}")
        if not self.length_m > 0:
            raise GraphError(f"arc length must be positive, got {self.length_m}")


class RoadGraph:
    """Immutable road network. Build through :func:`build_graph` or :func:`load_graph`."""

    def __init__(self, nodes, arcs, scs_nodes, scs_dummies, med_points, med_dummies,
                 base, positions, entries):
        self.nodes = frozenset(nodes)
        self._arcs = dict(arcs)
        self.scs_nodes = tuple(sorted(scs_nodes))
        self.scs_dummies = frozenset(scs_dummies)
        self.med_points = tuple(med_points)
        self.med_dummies = frozenset(med_dummies)
        self._base = dict(base)
        self.positions = dict(positions)
        self.entries = tuple(entries)
        self._clones = {}
        for dummy, b in self._base.items():
            if dummy != b:
                self._clones.setdefault(b, []).append(dummy)
        adj = {n: [] for n in self.nodes}
        for (i, j), attr in self._arcs.items():
            adj[i].append((j, attr))
        self._adj = {n: tuple(sorted(out, key=lambda e: e[0])) for n, out in adj.items()}

    # -- queries ------------------------------------------------------------

    def arc(self, i, j):
        return self._arcs.get((i, j))

    def drive_time(self, i, j) -> float:
        """Drive time of arc (i, j) in seconds, infinite when the arc is absent."""
        if i == j:
            raise GraphError("self arcs are excluded from the network")
        attr = self._arcs.get((i, j))
        return attr.drive_time_s if attr is not None else INFINITE

    def energy_cost(self, i, j) -> float:
        """Traversal energy of arc (i, j) in kWh, infinite when the arc is absent."""
        if i == j:
            raise GraphError("self arcs are excluded from the network")
        attr = self._arcs.get((i, j))
        return attr.energy_kwh if attr is not None else INFINITE

    def neighbors(self, i):
        """Outgoing (node, ArcAttr) pairs sorted by node id."""
        return self._adj[i]

    def base_of(self, node):
        """The base node a dummy clones; a non-dummy is its own base."""
        return self._base.get(node, node)

    def clones_of(self, node):
        return tuple(self._clones.get(node, ()))

    def is_dummy(self, node) -> bool:
        return self._base.get(node, node) != node

    @property
    def arcs(self):
        return self._arcs

    @property
    def base_nodes(self):
        return tuple(sorted(n for n in self.nodes if not self.is_dummy(n)))

    def med_cycle_segments(self):
        """Arcs (i, j) around the mobile-charger cycle in order, wrapping to the start."""
        pts = self.med_points
        return [(pts[k], pts[(k + 1) % len(pts)]) for k in range(len(pts))]

    def med_cycle_time(self) -> float:
        return sum(self._arcs[(i, j)].drive_time_s for i, j in self.med_cycle_segments())

    def position(self, node):
        return self.positions.get(node, (0.0, 0.0))


def build_graph(nodes, arcs, scs_list=(), med_cycle=(), visit_limit: int = 2,
                positions=None, entries=None) -> RoadGraph:
    """Assemble an immutable :class:`RoadGraph` and expand charger dummies.

    ``arcs`` maps (i, j) to :class:`ArcAttr`. ``med_cycle`` is a closed walk:
    consecutive points (including the wrap back to the first) must be arcs.
    Each static station and each cycle point gets ``visit_limit - 1`` dummy
    clones whose arc sets mirror the base node's.
    """
    nodes = list(nodes)
    if len(set(nodes)) != len(nodes):
        raise GraphError("duplicate node ids")
    declared = set(nodes)
    for (i, j) in arcs:
        if i == j:
            raise GraphError(f"self arc ({i},{j}) not allowed")
        if i not in declared or j not in declared:
            raise GraphError(f"arc ({i},{j}) references undeclared node")
    scs_list = list(scs_list)
    if not set(scs_list) <= declared:
        raise GraphError("static station not among declared nodes")
    med_cycle = list(med_cycle)
    if len(med_cycle) > 1 and med_cycle[0] == med_cycle[-1]:
        med_cycle = med_cycle[:-1]
    if len(set(med_cycle)) != len(med_cycle):
        raise GraphError("mobile-charger cycle repeats a point")
    if not set(med_cycle) <= declared:
        raise GraphError("mobile-charger cycle point not among declared nodes")
    if med_cycle:
        if len(med_cycle) < 2:
            raise GraphError("mobile-charger cycle needs at least two points")
        for k, i in enumerate(med_cycle):
            j = med_cycle[(k + 1) % len(med_cycle)]
            if (i, j) not in arcs:
                raise GraphError(f"mobile-charger cycle is not closed: missing arc ({i},{j})")
    if set(scs_list) & set(med_cycle):
        raise GraphError("a node cannot be both a static station and a cycle point")
    if not (isinstance(visit_limit, int) and visit_limit >= 1):
        raise GraphError("visit_limit must be an integer >= 1")

    positions = dict(positions or {})
    base = {}
    clones = {}
    next_id = max(nodes, default=-1) + 1
    for b in list(scs_list) + list(med_cycle):
        mine = []
        for _ in range(visit_limit - 1):
            base[next_id] = b
            if b in positions:
                positions[next_id] = positions[b]
            mine.append(next_id)
            next_id += 1
        clones[b] = mine

    all_nodes = nodes + sorted(base)
    expanded = {}
    for (i, j), attr in arcs.items():
        attr = attr if isinstance(attr, ArcAttr) else ArcAttr(**attr)
        for i2 in [i] + clones.get(i, []):
            for j2 in [j] + clones.get(j, []):
                expanded[(i2, j2)] = attr

    scs_dummies = [d for b in scs_list for d in clones.get(b, [])]
    med_dummies = [d for b in med_cycle for d in clones.get(b, [])]
    charger_bases = set(scs_list) | set(med_cycle)
    if entries is None:
        entries = [n for n in sorted(nodes) if n not in charger_bases]
    else:
        entries = list(entries)
        if not set(entries) <= declared:
            raise GraphError("entry point not among declared nodes")
    return RoadGraph(all_nodes, expanded, scs_list, scs_dummies, med_cycle,
                     med_dummies, base, positions, entries)


# -- JSON schema ------------------------------------------------------------
#
# {
#   "nodes":     [{"id": 0, "x": 0.0, "y": 0.0}, ...]      (x/y optional)
#   "arcs":      [{"i": 0, "j": 1, "length_m": 2500, "speed_mps": 15,
#                  "energy_kwh": 0.2}, ...]                 (energy optional)
#   "scs":       [22],
#   "med_cycle": [44, 45, 55, 54],
#   "entries":   [0, 1, ...]                                (optional)
# }
#
# Arc drive time is length/speed. When an arc omits energy_kwh it is resolved
# from the vehicle parameters at load time, so routing sees plain numbers.


def load_graph(doc, vehicle: VehicleParams | None = None, visit_limit: int = 2) -> RoadGraph:
    """Build a graph from a parsed JSON document (or a path to one)."""
    if isinstance(doc, (str, bytes)):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    nodes, positions = [], {}
    for entry in doc["nodes"]:
        if isinstance(entry, dict):
            nodes.append(entry["id"])
            if "x" in entry or "y" in entry:
                positions[entry["id"]] = (float(entry.get("x", 0.0)), float(entry.get("y", 0.0)))
        else:
            nodes.append(entry)
    arcs = {}
    for a in doc["arcs"]:
        i, j = a["i"], a["j"]
        length = float(a["length_m"])
        speed = float(a["speed_mps"])
        if speed <= 0:
            raise GraphError(f"arc ({i},{j}) has nonpositive speed")
        dt = length / speed
        if "energy_kwh" in a:
            energy = float(a["energy_kwh"])
        elif vehicle is not None:
            energy = segment_energy(vehicle, speed, dt)
        else:
            raise GraphError(f"arc ({i},{j}) lacks energy_kwh and no vehicle was given")
        arcs[(i, j)] = ArcAttr(dt, energy, length)
    return build_graph(nodes, arcs, doc.get("scs", ()), doc.get("med_cycle", ()),
                       visit_limit=visit_limit, positions=positions,
                       entries=doc.get("entries"))


def grid_doc(rows: int, cols: int, arc_len_m: float = 2500.0, speed_mps: float = 15.0,
             scs=(), med_cycle=()) -> dict:
    """JSON document for a rows x cols grid with bidirectional uniform arcs.

    Node ids are row-major; entry points default to the grid boundary,
    mimicking side roads feeding the district.
    """
    if rows < 2 or cols < 2:
        raise GraphError("grid needs at least 2 rows and 2 columns")
    nodes = [{"id": r * cols + c, "x": c * arc_len_m, "y": r * arc_len_m}
             for r in range(rows) for c in range(cols)]
    arcs = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 < rows and c2 < cols:
                    m = r2 * cols + c2
                    arcs.append({"i": n, "j": m, "length_m": arc_len_m, "speed_mps": speed_mps})
                    arcs.append({"i": m, "j": n, "length_m": arc_len_m, "speed_mps": speed_mps})
    boundary = [r * cols + c for r in range(rows) for c in range(cols)
                if r in (0, rows - 1) or c in (0, cols - 1)]
    chargers = set(scs) | set(med_cycle)
    return {
        "nodes": nodes,
        "arcs": arcs,
        "scs": list(scs),
        "med_cycle": list(med_cycle),
        "entries": [n for n in boundary if n not in chargers],
    }
