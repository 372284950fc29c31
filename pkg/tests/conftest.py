"""Shared fixtures: hand-built graphs and seeded random instance generators."""

import random

import pytest

from medsim.energy import InductionParams, VehicleParams
from medsim.oracle import OracleInstance
from medsim.road_graph import ArcAttr, build_graph, grid_doc, load_graph
from medsim.routing import EvRequest

TEST_VEHICLE = VehicleParams(mass_kg=1500.0, mu=0.01, drag_c=0.35, area_m2=2.0,
                             air_density=1.2, efficiency=0.75, capacity_kwh=50.0)
TEST_INDUCTION = InductionParams(c_ind=0.75, p_ind_kw=40.0)


def line_graph(n=6, dt=100.0, energy=1.0, scs=(3,), visit_limit=2):
    """Bidirectional line 0-1-...-(n-1) with uniform arcs."""
    arcs = {}
    for k in range(n - 1):
        arcs[(k, k + 1)] = ArcAttr(dt, energy, 1000.0)
        arcs[(k + 1, k)] = ArcAttr(dt, energy, 1000.0)
    return build_graph(range(n), arcs, scs_list=list(scs), visit_limit=visit_limit)


def ring_with_spurs(ring_dt=200.0, ring_energy=0.5, spur_dt=100.0, spur_energy=0.8,
                    visit_limit=2):
    """4-point cycle 0-1-2-3 with source spur 4-0 and destination spur 2-5."""
    arcs = {}
    for i, j in ((0, 1), (1, 2), (2, 3), (3, 0)):
        arcs[(i, j)] = ArcAttr(ring_dt, ring_energy, 2000.0)
        arcs[(j, i)] = ArcAttr(ring_dt, ring_energy, 2000.0)
    for i, j in ((4, 0), (2, 5)):
        arcs[(i, j)] = ArcAttr(spur_dt, spur_energy, 1000.0)
        arcs[(j, i)] = ArcAttr(spur_dt, spur_energy, 1000.0)
    return build_graph(range(6), arcs, med_cycle=[0, 1, 2, 3], visit_limit=visit_limit)


@pytest.fixture
def six_line():
    return line_graph()


@pytest.fixture
def med_ring():
    return ring_with_spurs()


def random_oracle_instance(seed: int) -> OracleInstance:
    """Small random instance within the oracle's node bound (dummies included).

    Mix of line graphs with one station, 3x4 grids with one or two stations,
    and ring-with-spurs topologies with a mobile charger (optionally plus a
    station), all with randomized arc weights, waits, and battery state.
    """
    rng = random.Random(seed)
    kind = rng.choice(["line", "grid", "ring", "ring_scs"])
    induction = None
    med_waits = {}
    scs_waits, scs_rates = {}, {}

    if kind == "line":
        n = rng.randint(5, 8)
        dt = rng.uniform(40.0, 300.0)
        energy = rng.uniform(0.4, 1.5)
        scs = [rng.randrange(n)]
        g = line_graph(n, dt, energy, scs)
        nodes = list(range(n))
    elif kind == "grid":
        rows, cols = 3, 4
        doc = grid_doc(rows, cols, arc_len_m=rng.uniform(900, 2500),
                       speed_mps=rng.uniform(9, 15))
        n_scs = rng.choice([1, 2])
        all_nodes = list(range(rows * cols))
        scs = rng.sample(all_nodes, n_scs)
        doc["scs"] = scs
        g = load_graph(doc, vehicle=TEST_VEHICLE)
        nodes = all_nodes
    else:
        ring_e = rng.uniform(0.3, 0.9)
        spur_e = rng.uniform(0.4, 1.2)
        arcs = {}
        for i, j in ((0, 1), (1, 2), (2, 3), (3, 0)):
            arcs[(i, j)] = ArcAttr(rng.uniform(80, 400), ring_e, 2000.0)
            arcs[(j, i)] = ArcAttr(rng.uniform(80, 400), ring_e, 2000.0)
        for i, j in ((4, 0), (2, 5), (5, 6)):
            arcs[(i, j)] = ArcAttr(rng.uniform(50, 250), spur_e, 1000.0)
            arcs[(j, i)] = ArcAttr(rng.uniform(50, 250), spur_e, 1000.0)
        scs = [6] if kind == "ring_scs" else []
        g = build_graph(range(7), arcs, scs_list=scs, med_cycle=[0, 1, 2, 3])
        induction = InductionParams(rng.uniform(0.7, 0.8), rng.uniform(20, 50))
        for p in (0, 1, 2, 3):
            med_waits[p] = rng.uniform(0.0, 1200.0)
        nodes = list(range(7))

    for s in scs:
        scs_waits[s] = rng.uniform(0.0, 1500.0)
        scs_rates[s] = rng.choice([19.2, 22.0, 50.0])

    source, dest = rng.sample(nodes, 2)
    capacity = rng.uniform(6.0, 14.0)
    # scale the starting energy around the direct route's need for a mix of
    # feasible and infeasible directs
    from medsim.routing import PathCache, route_energy, NoPath
    caches = PathCache(g)
    try:
        direct_need = route_energy(g, caches.path(source, dest, "time"))
    except NoPath:
        direct_need = capacity
    frac = rng.uniform(0.3, 1.4)
    energy_start = max(0.0, min(capacity, frac * direct_need))
    request = EvRequest(f"r{seed}", source, dest, capacity, energy_start)
    return OracleInstance(g, request, scs_waits, scs_rates, med_waits, induction,
                          med_battery_kwh=rng.choice([float("inf"), 200.0, 60.0]))
