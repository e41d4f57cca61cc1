"""Greedy objective allocation with recorded eligibility traces.

Objectives are walked in plan order and each goes to the eligible survey
vehicle whose current route end is nearest the objective's entry point
(ties to the lowest id). Every candidate's condition evaluations are kept
so the C2 side can answer "why" and "why not" from the record rather than
by re-deriving the decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .geo import EnuPoint, GeoPoint, latlon_to_enu
from .mission import (
    MissionPlan,
    Objective,
    ReacquireTask,
    SurveyTask,
    Track,
    generate_lawnmower,
)

FAULT_MOTOR = 1
FAULT_SENSOR = 2
FAULT_NAV = 4
FAULT_COMMS = 8
BLOCKING_FAULTS = FAULT_MOTOR | FAULT_NAV

BATTERY_RESERVE_PCT = 20.0

FAULT_NAMES = {FAULT_MOTOR: "motor", FAULT_SENSOR: "sensor", FAULT_NAV: "nav", FAULT_COMMS: "comms"}


class Condition(Enum):
    NO_BLOCKING_FAULT = "NO_BLOCKING_FAULT"
    BATTERY_ABOVE_RESERVE = "BATTERY_ABOVE_RESERVE"
    MIN_MARGINAL_COST = "MIN_MARGINAL_COST"


@dataclass(frozen=True)
class ConditionEval:
    vehicle_id: int
    condition: Condition
    value: bool
    detail: Optional[float] = None


@dataclass
class AllocationDecision:
    objective_id: int
    chosen_vehicle: Optional[int]
    trace: list[ConditionEval]
    decided_at_s: float


@dataclass
class Candidate:
    """Allocation-relevant view of a survey vehicle."""

    vehicle_id: int
    fault_bits: int
    battery_pct: float
    route_end: EnuPoint


def objective_waypoints(obj: Objective, origin: GeoPoint) -> tuple[EnuPoint, ...]:
    """ENU waypoints a vehicle traverses to perform the objective."""
    if isinstance(obj.kind, SurveyTask):
        return generate_lawnmower(obj.kind.area, obj.kind.spacing_m, origin).waypoints
    assert isinstance(obj.kind, ReacquireTask)
    return (latlon_to_enu(origin, obj.kind.target),)


def objective_internal_length(obj: Objective, origin: GeoPoint) -> float:
    wps = objective_waypoints(obj, origin)
    return sum(a.distance_to(b) for a, b in zip(wps, wps[1:]))


def marginal_cost(route_end: EnuPoint, obj: Objective, origin: GeoPoint) -> float:
    """Extra distance to reach the objective's entry from the route end."""
    return route_end.distance_to(objective_waypoints(obj, origin)[0])


def allocate_objectives(
    plan: MissionPlan,
    candidates: list[Candidate],
    now_s: float,
    objectives: Optional[list[Objective]] = None,
) -> tuple[dict[int, int], list[AllocationDecision]]:
    """Assign objectives (default: every plan objective) to candidates.

    Returns the objective-to-vehicle map plus one traced decision per
    objective. An objective nobody is eligible for gets a decision with
    chosen_vehicle None and stays unassigned.
    """
    todo = plan.objectives if objectives is None else objectives
    candidates = sorted(candidates, key=lambda c: c.vehicle_id)
    route_ends = {c.vehicle_id: c.route_end for c in candidates}
    assignment: dict[int, int] = {}
    decisions: list[AllocationDecision] = []

    for obj in todo:
        trace: list[ConditionEval] = []
        costed: list[tuple[float, int]] = []
        for cand in candidates:
            no_fault = not cand.fault_bits & BLOCKING_FAULTS
            trace.append(
                ConditionEval(
                    cand.vehicle_id,
                    Condition.NO_BLOCKING_FAULT,
                    no_fault,
                    float(cand.fault_bits & BLOCKING_FAULTS),
                )
            )
            battery_ok = cand.battery_pct > BATTERY_RESERVE_PCT
            trace.append(
                ConditionEval(
                    cand.vehicle_id,
                    Condition.BATTERY_ABOVE_RESERVE,
                    battery_ok,
                    cand.battery_pct,
                )
            )
            if no_fault and battery_ok:
                cost = marginal_cost(route_ends[cand.vehicle_id], obj, plan.origin)
                costed.append((cost, cand.vehicle_id))

        chosen: Optional[int] = None
        if costed:
            costed.sort()  # cost then id
            _, chosen = costed[0]
            for cost, vid in costed:
                trace.append(
                    ConditionEval(vid, Condition.MIN_MARGINAL_COST, vid == chosen, cost)
                )
            assignment[obj.id] = chosen
            wps = objective_waypoints(obj, plan.origin)
            route_ends[chosen] = wps[-1]
        decisions.append(AllocationDecision(obj.id, chosen, trace, now_s))
    return assignment, decisions


@dataclass(frozen=True)
class RoutePoint:
    point: EnuPoint
    objective_id: Optional[int] = None
    objective_entry: bool = False
    objective_exit: bool = False


def build_route(
    start: EnuPoint,
    objectives: list[Objective],
    origin: GeoPoint,
    end: Optional[EnuPoint],
) -> list[RoutePoint]:
    """Nearest-neighbor tour: start -> objectives -> end, tagged per point."""
    route: list[RoutePoint] = []
    remaining = list(objectives)
    cursor = start
    while remaining:
        remaining.sort(
            key=lambda o: (cursor.distance_to(objective_waypoints(o, origin)[0]), o.id)
        )
        obj = remaining.pop(0)
        wps = objective_waypoints(obj, origin)
        for i, wp in enumerate(wps):
            route.append(
                RoutePoint(wp, obj.id, objective_entry=i == 0, objective_exit=i == len(wps) - 1)
            )
        cursor = wps[-1]
    if end is not None:
        route.append(RoutePoint(end))
    return route


def compute_rehearsal_track(
    plan: MissionPlan,
    allocation: dict[int, int],
    vehicle_id: int,
    origin: Optional[GeoPoint] = None,
) -> Track:
    """Predicted launch-to-recovery route for one vehicle under an allocation."""
    origin = origin or plan.origin
    launch = latlon_to_enu(origin, plan.launch)
    recovery = latlon_to_enu(origin, plan.recovery)
    assigned = [o for o in plan.objectives if allocation.get(o.id) == vehicle_id]
    points = [launch] + [rp.point for rp in build_route(launch, assigned, origin, recovery)]
    deduped = [points[0]]
    for p in points[1:]:
        if p != deduped[-1]:
            deduped.append(p)
    return Track(tuple(deduped))
