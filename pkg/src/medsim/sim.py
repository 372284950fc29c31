"""Seeded fleet simulation: EV arrivals, anxiety levels, and charging modes.

A run spawns EVs at entry points over a horizon, routes each one at its
arrival instant against the live booking ledgers, and collects per-EV and
aggregate metrics. Time is continuous; the only state-changing events are
EV arrivals and the mobile charger's depot refills, both processed in time
order, so a run is fully deterministic for a given seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .charging import Infrastructure, MedState, ScsState
from .energy import InductionParams, VehicleParams
from .comms import RadioParams
from .road_graph import RoadGraph, load_graph
from .routing import (EvRequest, PathCache, RouterConfig, Stranded,
                      check_assignment, find_shortest_path, route_energy)

INFINITE = math.inf

LEVEL_TARGETS = {"L1": 0.20, "L2": 0.60, "L3": 0.95}
MODES = ("SCS", "SCS_MED")
ENERGY_MIN_KWH = 1.0
ENERGY_MAX_KWH = 6.0


class CalibrationError(Exception):
    """The graph cannot realize the requested anxiety level."""


DEFAULT_VEHICLE = VehicleParams(mass_kg=1800.0, mu=0.013, drag_c=0.52, area_m2=2.2,
                                air_density=1.2, efficiency=0.75, capacity_kwh=50.0)
DEFAULT_INDUCTION = InductionParams(c_ind=0.75, p_ind_kw=40.0)


@dataclass
class MedSpec:
    battery_kwh: float = 200.0
    p_ind_kw: float | None = None   # falls back to the induction block
    start_s: float = 0.0


@dataclass
class Scenario:
    """Everything one simulation run depends on, JSON round-trippable."""

    graph: dict
    mode: str = "SCS_MED"
    ev_count: int = 50
    level: str = "L1"
    seed: int = 0
    horizon_s: float = 3600.0
    stranded_penalty_s: float | None = None
    vehicle: VehicleParams = DEFAULT_VEHICLE
    induction: InductionParams = DEFAULT_INDUCTION
    radio: RadioParams = RadioParams()
    block_prob: float = 0.05
    beacon_period_s: float = 1.0
    scs: list = field(default_factory=list)      # (node, rate_kw) pairs
    meds: list = field(default_factory=list)     # MedSpec per mobile charger
    visit_limit: int = 2
    entries: list | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.level not in LEVEL_TARGETS:
            raise ValueError(f"level must be one of {tuple(LEVEL_TARGETS)}")
        if not 0 <= self.ev_count <= 100:
            raise ValueError("ev_count must lie in [0, 100]")
        if self.vehicle.capacity_kwh < ENERGY_MAX_KWH:
            raise ValueError("battery capacity must cover the initial-energy band")
        if not 0.0 <= self.block_prob <= 1.0:
            raise ValueError("block_prob must be a probability")
        if self.stranded_penalty_s is None:
            self.stranded_penalty_s = 10.0 * self.horizon_s

    def to_json(self) -> dict:
        doc = {
            "graph": self.graph, "mode": self.mode, "ev_count": self.ev_count,
            "level": self.level, "seed": self.seed, "horizon_s": self.horizon_s,
            "stranded_penalty_s": self.stranded_penalty_s,
            "vehicle": vars(self.vehicle).copy(),
            "induction": vars(self.induction).copy(),
            "radio": {"ptx_dbm": self.radio.ptx_dbm, "f_ghz": self.radio.f_ghz,
                      "pth_dbm": self.radio.pth_dbm, "block_prob": self.block_prob,
                      "beacon_period_s": self.beacon_period_s},
            "infra": {
                "scs": [{"node": n, "rate_kw": r} for n, r in self.scs],
                "med": [{"battery_kwh": m.battery_kwh, "p_ind_kw": m.p_ind_kw,
                         "start_s": m.start_s} for m in self.meds],
            },
            "visit_limit": self.visit_limit,
        }
        if self.entries is not None:
            doc["entries"] = list(self.entries)
        return doc

    @classmethod
    def from_json(cls, doc: dict, **overrides) -> "Scenario":
        doc = dict(doc)
        if "graph_path" in doc and "graph" not in doc:
            import json
            with open(doc["graph_path"], encoding="utf-8") as fh:
                doc["graph"] = json.load(fh)
        radio_doc = dict(doc.get("radio", {}))
        block = radio_doc.pop("block_prob", 0.05)
        beacon = radio_doc.pop("beacon_period_s", 1.0)
        infra = doc.get("infra", {})
        kwargs = {
            "graph": doc["graph"],
            "mode": doc.get("mode", "SCS_MED"),
            "ev_count": int(doc.get("ev_count", 50)),
            "level": doc.get("level", "L1"),
            "seed": int(doc.get("seed", 0)),
            "horizon_s": float(doc.get("horizon_s", 3600.0)),
            "stranded_penalty_s": doc.get("stranded_penalty_s"),
            "vehicle": VehicleParams(**doc["vehicle"]) if "vehicle" in doc else DEFAULT_VEHICLE,
            "induction": InductionParams(**doc["induction"]) if "induction" in doc
                         else DEFAULT_INDUCTION,
            "radio": RadioParams(**radio_doc) if radio_doc else RadioParams(),
            "block_prob": float(block),
            "beacon_period_s": float(beacon),
            "scs": [(s["node"], float(s.get("rate_kw", 19.2)))
                    for s in infra.get("scs", ())],
            "meds": [MedSpec(float(m.get("battery_kwh", 200.0)),
                             m.get("p_ind_kw"), float(m.get("start_s", 0.0)))
                     for m in infra.get("med", ())],
            "visit_limit": int(doc.get("visit_limit", 2)),
            "entries": doc.get("entries"),
        }
        kwargs.update(overrides)
        return cls(**kwargs)


def default_scenario(**overrides) -> Scenario:
    """The desk-scale standard: 10x10 grid, one station, one mobile charger."""
    from .road_graph import grid_doc
    graph = grid_doc(10, 10, arc_len_m=2500.0, speed_mps=15.0,
                     scs=[22], med_cycle=[44, 45, 55, 54])
    base = dict(graph=graph, scs=[(22, 19.2)], meds=[MedSpec()])
    base.update(overrides)
    return Scenario(**base)


# -- population ----------------------------------------------------------------


@dataclass(frozen=True)
class EvSpawn:
    ev: str
    t_arrival_s: float
    source: int
    dest: int
    energy_kwh: float
    anxious: bool
    excluded: bool


def classify_anxious(g: RoadGraph, request: EvRequest,
                     caches: PathCache | None = None) -> bool:
    """True when the battery cannot cover the unconstrained shortest route."""
    caches = caches or PathCache(g)
    from .routing import NoPath
    try:
        path = caches.path(request.source, request.dest, "time")
    except NoPath:
        return True
    return request.energy_kwh < route_energy(g, path)


class LevelSampler:
    """Draws (source, dest, energy) triples hitting an anxiety-level target.

    The anxious count is pinned exactly (rounded share of the population);
    each draw then picks a destination far or near enough and an energy level
    conditioned on the wanted flag, so the realized fraction cannot drift.
    """

    def __init__(self, g: RoadGraph, level: str, rng: random.Random,
                 entries=None, caches: PathCache | None = None):
        self.g = g
        self.target = LEVEL_TARGETS[level]
        self.rng = rng
        self.caches = caches or PathCache(g)
        self.entries = list(entries) if entries is not None else list(g.entries)
        self.dests = list(g.base_nodes)
        if not self.entries or len(self.dests) < 2:
            raise CalibrationError("graph too small to spawn trips")
        self._energy_memo = {}

    def _route_energy(self, s, d) -> float:
        key = (s, d)
        if key not in self._energy_memo:
            from .routing import NoPath
            try:
                path = self.caches.path(s, d, "time")
            except NoPath:
                self._energy_memo[key] = INFINITE
            else:
                self._energy_memo[key] = route_energy(self.g, path)
        return self._energy_memo[key]

    def draw(self, want_anxious: bool, attempts: int = 400):
        for _ in range(attempts):
            s = self.rng.choice(self.entries)
            d = self.rng.choice(self.dests)
            if d == s:
                continue
            need = self._route_energy(s, d)
            if want_anxious:
                if not ENERGY_MIN_KWH < need:
                    continue
                hi = min(ENERGY_MAX_KWH, need)
                eps = ENERGY_MIN_KWH + self.rng.random() * (hi - ENERGY_MIN_KWH)
            else:
                if not need < ENERGY_MAX_KWH:
                    continue
                lo = max(ENERGY_MIN_KWH, need)
                eps = lo + self.rng.random() * (ENERGY_MAX_KWH - lo)
            return s, d, eps
        raise CalibrationError(
            f"could not draw an {'anxious' if want_anxious else 'relaxed'} trip; "
            f"the graph's route energies cannot realize the level target")

    def sample(self, n: int):
        n_anxious = round(self.target * n)
        flags = [True] * n_anxious + [False] * (n - n_anxious)
        self.rng.shuffle(flags)
        return [(*self.draw(f), f) for f in flags]


def calibrate_level(g: RoadGraph, level: str, seed: int | None = None,
                    rng: random.Random | None = None, entries=None,
                    caches: PathCache | None = None) -> LevelSampler:
    """Sampler whose realized anxious fraction lands on the level target."""
    if rng is None:
        rng = random.Random(seed)
    return LevelSampler(g, level, rng, entries, caches)


def generate_population(scenario: Scenario, g: RoadGraph,
                        caches: PathCache | None = None):
    """Deterministic spawn list; independent of the charging mode.

    The same seed yields the same population for both modes, which is what
    makes paired mode comparisons meaningful.
    """
    rng = random.Random(scenario.seed)
    n = scenario.ev_count
    arrivals = sorted(rng.uniform(0.0, scenario.horizon_s) for _ in range(n))
    sampler = calibrate_level(g, scenario.level, rng=rng, entries=scenario.entries,
                              caches=caches)
    draws = sampler.sample(n)
    excluded = [rng.random() < scenario.block_prob for _ in range(n)]
    width = max(3, len(str(max(n - 1, 0))))
    return [EvSpawn(f"ev{k:0{width}d}", arrivals[k], s, d, eps, anx, excl)
            for k, ((s, d, eps, anx), excl) in enumerate(zip(draws, excluded))]


# -- metrics ---------------------------------------------------------------------


@dataclass
class EvRecord:
    ev: str
    t_arrival_s: float
    source: int
    dest: int
    energy_kwh: float
    anxious: bool
    excluded: bool
    choice: str          # "scs", "med", or "none"
    travel_s: float
    wait_s: float
    stranded: bool


CSV_HEADER = ("ev,arrival_s,source,dest,energy_kwh,anxious,excluded,"
              "choice,travel_s,wait_s,stranded")


@dataclass
class RunMetrics:
    mode: str
    level: str
    ev_count: int
    seed: int
    rows: list = field(default_factory=list)
    assignments: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    infrastructure: Infrastructure | None = None  # final ledgers, for audits

    def mean_travel_s(self) -> float:
        return sum(r.travel_s for r in self.rows) / len(self.rows) if self.rows else 0.0

    def mean_wait_s(self) -> float:
        return sum(r.wait_s for r in self.rows) / len(self.rows) if self.rows else 0.0

    def med_share(self) -> float:
        """Fraction of the whole population that charged from the mobile charger."""
        if not self.rows:
            return 0.0
        return sum(1 for r in self.rows if r.choice == "med") / len(self.rows)

    def counts(self) -> dict:
        out = {"scs": 0, "med": 0, "none": 0}
        for r in self.rows:
            out[r.choice] += 1
        return out

    def stranded_count(self) -> int:
        return sum(1 for r in self.rows if r.stranded)

    def waiting_series(self):
        """(arrival, wait, charger kind) per charging EV, in arrival order."""
        return [(r.t_arrival_s, r.wait_s, r.choice)
                for r in self.rows if r.choice != "none"]

    def aggregates(self) -> dict:
        c = self.counts()
        return {
            "mode": self.mode, "level": self.level, "ev_count": self.ev_count,
            "seed": self.seed,
            "mean_travel_s": self.mean_travel_s(),
            "mean_wait_s": self.mean_wait_s(),
            "med_share": self.med_share(),
            "n_scs": c["scs"], "n_med": c["med"], "n_none": c["none"],
            "stranded": self.stranded_count(),
            "violations": len(self.violations),
        }

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.ev},{r.t_arrival_s:.6f},{r.source},{r.dest},"
                f"{r.energy_kwh:.6f},{int(r.anxious)},{int(r.excluded)},"
                f"{r.choice},{r.travel_s:.6f},{r.wait_s:.6f},{int(r.stranded)}")
        return "\n".join(lines) + "\n"


# -- the run itself ---------------------------------------------------------------


def build_infrastructure(scenario: Scenario, g: RoadGraph) -> Infrastructure:
    infra = Infrastructure()
    for node, rate in scenario.scs:
        infra.scs_units.append(ScsState(node, rate))
    for spec in scenario.meds:
        ind = scenario.induction if spec.p_ind_kw is None else \
            InductionParams(scenario.induction.c_ind, spec.p_ind_kw)
        infra.med_units.append(MedState(g, ind, battery_kwh=spec.battery_kwh,
                                        start_s=spec.start_s))
    return infra


def _first_choice(assignment) -> str:
    stops = [(v.leg_index, "scs") for v in assignment.z_visits]
    stops += [(p.leg_index, "med") for p in assignment.q_points]
    if not stops:
        return "none"
    return min(stops)[1]


def run(scenario: Scenario, router_config: RouterConfig | None = None,
        keep_assignments: bool = True) -> RunMetrics:
    """Simulate one scenario and collect metrics.

    EVs are routed in arrival order against live ledgers; stranded EVs are
    recorded with the penalty travel time rather than aborting the run. In
    mode "SCS" the mobile chargers exist but take no bookings.
    """
    g = load_graph(scenario.graph, vehicle=scenario.vehicle,
                   visit_limit=scenario.visit_limit)
    caches = PathCache(g)
    infra = build_infrastructure(scenario, g)
    population = generate_population(scenario, g, caches)
    config = router_config or RouterConfig()
    metrics = RunMetrics(scenario.mode, scenario.level, scenario.ev_count,
                         scenario.seed, infrastructure=infra)
    med_allowed = scenario.mode == "SCS_MED"

    for spawn in population:
        infra.advance_to(spawn.t_arrival_s)
        request = EvRequest(spawn.ev, spawn.source, spawn.dest,
                            scenario.vehicle.capacity_kwh, spawn.energy_kwh)

        def gate(kind, node, _spawn=spawn):
            if _spawn.excluded:
                return False
            if kind == "med" and not med_allowed:
                return False
            return True

        try:
            a = find_shortest_path(g, request, infra, now=spawn.t_arrival_s,
                                   gate=gate, config=config, caches=caches)
        except Stranded:
            metrics.rows.append(EvRecord(
                spawn.ev, spawn.t_arrival_s, spawn.source, spawn.dest,
                spawn.energy_kwh, spawn.anxious, spawn.excluded, "none",
                scenario.stranded_penalty_s, 0.0, True))
            if keep_assignments:
                metrics.assignments.append(None)
            continue
        for problem in check_assignment(g, a):
            metrics.violations.append(f"{spawn.ev}: {problem}")
        metrics.rows.append(EvRecord(
            spawn.ev, spawn.t_arrival_s, spawn.source, spawn.dest,
            spawn.energy_kwh, spawn.anxious, spawn.excluded, _first_choice(a),
            a.total_time_s, a.wait_total_s, False))
        if keep_assignments:
            metrics.assignments.append(a)
    return metrics


def run_from_doc(doc: dict, **overrides) -> RunMetrics:
    """Parse-and-run entry point, picklable for parallel sweeps."""
    return run(Scenario.from_json(doc, **overrides))
