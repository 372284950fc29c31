"""Charging infrastructure semantics: station queues and mobile-charger cycles.

A static station serves one EV at a time, first come first served, and every
visit charges to full. A mobile charger loops a fixed cycle forever; an EV
meets it at a cycle point, follows it for a contiguous run of segments, and
each segment of each cycle pass can be booked by at most one EV. Booking
ledgers are the only mutable state here; everything else is arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .energy import InductionParams, induced_energy
from .road_graph import RoadGraph
from .routing import PathCache

INFINITE = math.inf


class NoMeetingPoint(Exception):
    """No cycle point of the mobile charger is reachable from the EV."""


class DeficitTooLarge(Exception):
    """No attach run within the pass budget or battery covers the deficit."""


@dataclass(frozen=True)
class Booking:
    ev: str
    kind: str                # "scs" or "med"
    node: int                # station node, or meeting point for "med"
    start_s: float
    end_s: float
    end_node: int | None = None
    segment_keys: tuple = ()  # ((segment index, cycle pass), ...) for "med"
    energy_kwh: float = 0.0

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ValueError("booking must end after it starts")


@dataclass(frozen=True)
class BookResult:
    accepted: bool
    retry_at_s: float | None = None


def scs_charge_time(energy_kwh: float, capacity_kwh: float, rate_kw: float) -> float:
    """Seconds to fill the battery from ``energy_kwh`` to full at ``rate_kw``."""
    if rate_kw <= 0:
        raise ValueError("charge rate must be positive")
    if energy_kwh < 0 or energy_kwh > capacity_kwh + 1e-9:
        raise ValueError("energy level outside [0, capacity]")
    return max(0.0, capacity_kwh - energy_kwh) / rate_kw * 3600.0


def scs_waiting_time(queue_end_s: float, drive_s: float) -> float:
    """Wait at the station: remaining queue minus the drive there, floored at zero.

    Both arguments are durations from now. The raw difference goes negative
    when the queue drains before the EV arrives, which physically just means
    no wait.
    """
    if queue_end_s < 0 or drive_s < 0:
        raise ValueError("durations must be nonnegative")
    return max(0.0, queue_end_s - drive_s)


class ScsState:
    """A static charging station with its booking ledger."""

    def __init__(self, node: int, rate_kw: float):
        if rate_kw <= 0:
            raise ValueError("station rate must be positive")
        self.node = node
        self.rate_kw = rate_kw
        self.bookings: list[Booking] = []

    @property
    def booked_until(self) -> float:
        return self.bookings[-1].end_s if self.bookings else 0.0

    def wait_s(self, now: float, drive_s: float) -> float:
        return scs_waiting_time(max(0.0, self.booked_until - now), drive_s)

    def charge_s(self, energy_kwh: float, capacity_kwh: float) -> float:
        return scs_charge_time(energy_kwh, capacity_kwh, self.rate_kw)

    def book(self, ev: str, start_s: float, end_s: float) -> BookResult:
        """Accept iff the slot does not overlap any accepted booking.

        A rejection reports the earliest start at which a slot of the same
        length would fit, so callers can replan.
        """
        length = end_s - start_s
        if length <= 0:
            raise ValueError("booking must have positive length")
        for b in self.bookings:
            if start_s < b.end_s and b.start_s < end_s:
                return BookResult(False, self._earliest_fit(start_s, length))
        self.bookings.append(Booking(ev, "scs", self.node, start_s, end_s))
        self.bookings.sort(key=lambda b: b.start_s)
        return BookResult(True)

    def _earliest_fit(self, not_before: float, length: float) -> float:
        t = not_before
        for b in self.bookings:
            if b.start_s - t >= length:
                return t
            t = max(t, b.end_s)
        return t


@dataclass(frozen=True)
class CycleSegment:
    index: int
    i: int
    j: int
    drive_s: float
    energy_kwh: float
    induced_kwh: float


class MedState:
    """A mobile charger on a closed cycle, with per-segment per-pass bookings.

    The charger leaves cycle point 0 at ``start_s`` and loops forever. It
    tops its dissemination battery back up to capacity every time it passes
    the cycle start, so the battery never increases between those refills.
    """

    def __init__(self, graph: RoadGraph, induction: InductionParams,
                 battery_kwh: float = 200.0, cycle=None, start_s: float = 0.0,
                 max_passes: int | None = None):
        pts = tuple(cycle) if cycle is not None else graph.med_points
        if len(pts) < 2:
            raise ValueError("mobile charger needs a cycle of at least two points")
        segs = []
        for k, i in enumerate(pts):
            j = pts[(k + 1) % len(pts)]
            attr = graph.arc(i, j)
            if attr is None:
                raise ValueError(f"cycle is not closed: missing arc ({i},{j})")
            segs.append(CycleSegment(k, i, j, attr.drive_time_s, attr.energy_kwh,
                                     induced_energy(attr.drive_time_s, induction)))
        self.points = pts
        self.segments = tuple(segs)
        self.cum_starts = []
        acc = 0.0
        for seg in segs:
            self.cum_starts.append(acc)
            acc += seg.drive_s
        self.cycle_time_s = acc
        self.induction = induction
        self.battery_capacity_kwh = battery_kwh
        self.battery_kwh = battery_kwh
        self.start_s = start_s
        self.max_passes = max_passes if max_passes is not None else \
            max(1, len(graph.clones_of(pts[0])) + 1)
        self.segment_bookings: dict[tuple[int, int], str] = {}
        self.bookings: list[Booking] = []
        self._next_refill_s = start_s + self.cycle_time_s

    # -- geometry of the loop -------------------------------------------------

    def position(self, now: float):
        """Current (point index, seconds past that point) along the cycle."""
        offset = max(0.0, now - self.start_s) % self.cycle_time_s
        idx = 0
        for k, start in enumerate(self.cum_starts):
            if start <= offset:
                idx = k
        return idx, offset - self.cum_starts[idx]

    def arrival_at(self, point_idx: int, now: float) -> float:
        """Next absolute time the charger reaches a cycle point, from ``now``."""
        elapsed = max(0.0, now - self.start_s)
        offset = elapsed % self.cycle_time_s
        ahead = (self.cum_starts[point_idx] - offset) % self.cycle_time_s
        return now + ahead

    def pass_number(self, point_idx: int, arrival_s: float) -> int:
        elapsed = arrival_s - self.start_s
        return int(round((elapsed - self.cum_starts[point_idx]) / self.cycle_time_s))

    def segment_keys(self, start_idx: int, pass_no: int, n_segments: int):
        u = len(self.segments)
        return tuple(((start_idx + k) % u, pass_no + (start_idx + k) // u)
                     for k in range(n_segments))

    def waiting(self, start_idx: int, ev_arrival_s: float, n_segments: int):
        """Wait at the meeting point and the cycle pass the EV will ride.

        The smallest nonnegative wait such that the charger reaches the point
        no earlier than the EV does and none of the span's segments is booked
        for that pass; whole cycles are added as needed, with no upper bound.
        """
        arrival = self.arrival_at(start_idx, ev_arrival_s)
        while True:
            pass_no = self.pass_number(start_idx, arrival)
            keys = self.segment_keys(start_idx, pass_no, n_segments)
            if not any(k in self.segment_bookings for k in keys):
                return arrival - ev_arrival_s, pass_no
            arrival += self.cycle_time_s

    # -- ledger ----------------------------------------------------------------

    def book_attach(self, ev: str, segment_keys, energy_kwh: float,
                    start_s: float, end_s: float) -> BookResult:
        """Reserve a contiguous run of segments for one cycle pass.

        Accepts only when every segment of the pass is still free and the
        dissemination battery still holds the energy to hand out; the ledger
        and battery update together.
        """
        if any(k in self.segment_bookings for k in segment_keys):
            return BookResult(False, start_s + self.cycle_time_s)
        if energy_kwh > self.battery_kwh + 1e-9:
            return BookResult(False, self._next_refill_s)
        for k in segment_keys:
            self.segment_bookings[k] = ev
        self.battery_kwh -= energy_kwh
        self.bookings.append(Booking(ev, "med", self.segments[segment_keys[0][0]].i,
                                     start_s, end_s,
                                     end_node=self.segments[segment_keys[-1][0]].j,
                                     segment_keys=tuple(segment_keys),
                                     energy_kwh=energy_kwh))
        return BookResult(True)

    def advance_to(self, now: float):
        """Apply every depot refill the charger passed up to ``now``."""
        while self._next_refill_s <= now:
            self.battery_kwh = self.battery_capacity_kwh
            self._next_refill_s += self.cycle_time_s


@dataclass
class Infrastructure:
    """The charging fleet a router run books against."""

    scs_units: list = field(default_factory=list)
    med_units: list = field(default_factory=list)

    def advance_to(self, now: float):
        for med in self.med_units:
            med.advance_to(now)


def book(target, booking: Booking) -> BookResult:
    """Route a booking to the right ledger, accept-or-reject semantics."""
    if booking.kind == "scs":
        return target.book(booking.ev, booking.start_s, booking.end_s)
    return target.book_attach(booking.ev, booking.segment_keys, booking.energy_kwh,
                              booking.start_s, booking.end_s)


def med_meeting_point(med: MedState, ev_pos: int, g: RoadGraph,
                      caches: PathCache | None = None):
    """Cycle point the EV can reach soonest, with its drive time.

    Drive times come from time-shortest paths on the graph (per-arc mean
    speeds are baked into the arcs). Ties prefer the smallest node id.
    """
    caches = caches or PathCache(g)
    dist = caches.fwd(ev_pos, "time")
    best = None
    for point in med.points:
        d = dist.get(point, INFINITE)
        if d == INFINITE:
            continue
        if best is None or (d, point) < best:
            best = (d, point)
    if best is None:
        raise NoMeetingPoint(f"no cycle point reachable from {ev_pos}")
    return best[1], best[0]


def med_waiting_time(med: MedState, meet_node: int, ev_arrival_s: float,
                     n_segments: int):
    """Node-keyed convenience wrapper over :meth:`MedState.waiting`."""
    return med.waiting(med.points.index(meet_node), ev_arrival_s, n_segments)


def required_attach_span(deficit_kwh: float, med: MedState, start_node: int,
                         ip: InductionParams | None = None):
    """Detach point of the smallest run whose net gain covers the deficit.

    Follows the cycle forward from ``start_node``, summing per-segment net
    gain (induction minus traversal cost), wrapping at most the charger's
    pass budget. Raises :class:`DeficitTooLarge` when the budget or the
    dissemination battery cannot cover it. Returns (detach node, number of
    segments, net gain, dispensed energy).
    """
    if deficit_kwh <= 0:
        raise ValueError("deficit must be positive")
    start_idx = med.points.index(start_node)
    u = len(med.segments)
    gain = 0.0
    dispensed = 0.0
    for n in range(1, med.max_passes * u + 1):
        seg = med.segments[(start_idx + n - 1) % u]
        gain += seg.induced_kwh - seg.energy_kwh
        dispensed += seg.induced_kwh
        if dispensed > med.battery_kwh + 1e-9:
            raise DeficitTooLarge(
                f"charger battery {med.battery_kwh:.3f} kWh cannot dispense enough")
        if gain >= deficit_kwh - 1e-9:
            return med.points[(start_idx + n) % u], n, gain, dispensed
    raise DeficitTooLarge(
        f"deficit {deficit_kwh:.3f} kWh not coverable within "
        f"{med.max_passes} cycle passes")
