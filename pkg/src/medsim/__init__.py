"""Routing and fleet simulation for EVs served by static stations and
bus-mounted mobile chargers."""

from .charging import (Booking, BookResult, Infrastructure, MedState, ScsState,
                       book, med_meeting_point, med_waiting_time,
                       required_attach_span, scs_charge_time, scs_waiting_time,
                       DeficitTooLarge, NoMeetingPoint)
from .comms import CamBeacon, RadioParams, flood_reachable, reachable, relay, \
    transmission_range
from .energy import (InductionParams, VehicleParams, air_force, drive_power,
                     induced_energy, net_segment_energy, rolling_force,
                     segment_energy)
from .oracle import (FrozenMed, FrozenScs, OracleError, OracleInstance,
                     OracleSolution, solve_exact, verify)
from .road_graph import ArcAttr, GraphError, RoadGraph, build_graph, grid_doc, \
    load_graph
from .routing import (EvRequest, MedAttach, NoPath, PathCache, RouteAssignment,
                      RouterConfig, ScsVisit, Stranded, check_assignment,
                      dijkstra, find_best_energy_point, find_shortest_path,
                      objective_time, route_energy, route_feasible, route_time)
from .sim import (CalibrationError, EvRecord, EvSpawn, LevelSampler, RunMetrics,
                  Scenario, calibrate_level, classify_anxious, default_scenario,
                  generate_population, run)

__version__ = "0.1.0"
