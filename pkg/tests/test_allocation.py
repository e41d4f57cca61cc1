import itertools
import math

import pytest

from auvc2.allocation import (
    AllocationDecision,
    BATTERY_RESERVE_PCT,
    BLOCKING_FAULTS,
    Candidate,
    Condition,
    FAULT_MOTOR,
    FAULT_SENSOR,
    allocate_objectives,
    build_route,
    compute_rehearsal_track,
    marginal_cost,
    objective_waypoints,
)
from auvc2.geo import EnuPoint, GeoPoint, enu_to_latlon, latlon_to_enu
from auvc2.mission import MissionPlan, Objective, ReacquireTask, SurveyArea, SurveyTask

ORIGIN = GeoPoint(56.0, -5.0)


def geo_at(x, y):
    return enu_to_latlon(ORIGIN, EnuPoint(x, y))


def make_plan(objectives, launch=(0.0, 0.0), recovery=(0.0, 0.0)):
    return MissionPlan(
        origin=ORIGIN,
        launch=geo_at(*launch),
        recovery=geo_at(*recovery),
        shore_station=ORIGIN,
        objectives=objectives,
    )


def reacquire(obj_id, x, y, name=None):
    return Objective(obj_id, name or f"mark {obj_id}", ReacquireTask(geo_at(x, y)))


def survey(obj_id, corner_xy, width=100.0, height=40.0, spacing=20.0, name=None):
    area = SurveyArea(geo_at(*corner_xy), width, height, 0.0)
    return Objective(obj_id, name or f"survey {obj_id}", SurveyTask(area, spacing))


def evals(decision, vehicle_id, condition):
    return [
        e for e in decision.trace if e.vehicle_id == vehicle_id and e.condition is condition
    ]


def test_single_candidate_gets_objective():
    plan = make_plan([reacquire(1, 0, 0)])
    cand = Candidate(1, 0, 90.0, EnuPoint(0, 100))
    assignment, decisions = allocate_objectives(plan, [cand], 0.0)
    assert assignment == {1: 1}
    (decision,) = decisions
    assert decision.chosen_vehicle == 1
    assert all(e.value for e in decision.trace)
    assert {e.condition for e in decision.trace} == set(Condition)


def test_cheaper_vehicle_wins_and_loser_traced():
    plan = make_plan([reacquire(1, 0, 0)])
    near = Candidate(1, 0, 90.0, EnuPoint(0, 120))
    far = Candidate(2, 0, 85.0, EnuPoint(0, 450))
    assignment, (decision,) = allocate_objectives(plan, [near, far], 5.0)
    assert assignment == {1: 1}
    assert decision.chosen_vehicle == 1
    assert decision.decided_at_s == 5.0
    (winner_cost,) = evals(decision, 1, Condition.MIN_MARGINAL_COST)
    assert winner_cost.value and winner_cost.detail == pytest.approx(120.0, abs=1e-6)
    (loser_cost,) = evals(decision, 2, Condition.MIN_MARGINAL_COST)
    assert not loser_cost.value and loser_cost.detail == pytest.approx(450.0, abs=1e-6)


def test_motor_fault_disqualifies_nearer_vehicle():
    plan = make_plan([reacquire(1, 0, 0)])
    near = Candidate(1, FAULT_MOTOR, 90.0, EnuPoint(0, 120))
    far = Candidate(2, 0, 85.0, EnuPoint(0, 450))
    assignment, (decision,) = allocate_objectives(plan, [near, far], 0.0)
    assert assignment == {1: 2}
    (fault_eval,) = evals(decision, 1, Condition.NO_BLOCKING_FAULT)
    assert not fault_eval.value
    assert evals(decision, 1, Condition.MIN_MARGINAL_COST) == []  # ineligible: not costed


def test_sensor_fault_does_not_block():
    plan = make_plan([reacquire(1, 0, 0)])
    cand = Candidate(1, FAULT_SENSOR, 90.0, EnuPoint(0, 10))
    assignment, (decision,) = allocate_objectives(plan, [cand], 0.0)
    assert assignment == {1: 1}


def test_low_battery_disqualifies():
    plan = make_plan([reacquire(1, 0, 0)])
    weak = Candidate(1, 0, 20.0, EnuPoint(0, 10))  # reserve is exclusive
    assignment, (decision,) = allocate_objectives(plan, [weak], 0.0)
    assert assignment == {}
    assert decision.chosen_vehicle is None
    (battery_eval,) = evals(decision, 1, Condition.BATTERY_ABOVE_RESERVE)
    assert not battery_eval.value and battery_eval.detail == 20.0


def test_tie_breaks_to_lowest_id():
    plan = make_plan([reacquire(1, 0, 0)])
    a = Candidate(2, 0, 90.0, EnuPoint(0, 100))
    b = Candidate(7, 0, 90.0, EnuPoint(100, 0))
    assignment, _ = allocate_objectives(plan, [a, b], 0.0)
    assert assignment == {1: 2}


def test_route_end_advances_between_objectives():
    # after taking objective 1, vehicle 1's route end moves there; objective 2
    # sits next to vehicle 2 so the costs must be judged from the new ends
    plan = make_plan([reacquire(1, 0, 0), reacquire(2, 500, 0)])
    v1 = Candidate(1, 0, 90.0, EnuPoint(0, 50))
    v2 = Candidate(2, 0, 90.0, EnuPoint(520, 0))
    assignment, decisions = allocate_objectives(plan, [v1, v2], 0.0)
    assert assignment == {1: 1, 2: 2}
    second = decisions[1]
    (v1_cost,) = evals(second, 1, Condition.MIN_MARGINAL_COST)
    assert v1_cost.detail == pytest.approx(500.0)  # from (0,0), not from (0,50)


def brute_force_choice(route_ends, candidates, obj, plan):
    eligible = [
        c
        for c in candidates
        if not c.fault_bits & BLOCKING_FAULTS and c.battery_pct > BATTERY_RESERVE_PCT
    ]
    if not eligible:
        return None
    costs = [
        (route_ends[c.vehicle_id].distance_to(objective_waypoints(obj, plan.origin)[0]), c.vehicle_id)
        for c in eligible
    ]
    return min(costs)[1]


def test_allocator_matches_brute_force_exhaustively():
    positions = [EnuPoint(0, 0), EnuPoint(300, 0), EnuPoint(0, 700)]
    health = [(0, 90.0), (FAULT_MOTOR, 90.0), (0, 15.0)]
    objective_sets = [
        [reacquire(1, 100, 100)],
        [reacquire(1, 100, 100), survey(2, (400, 0))],
        [reacquire(1, 100, 100), reacquire(2, 50, 600), reacquire(3, 350, 50)],
        [
            reacquire(1, 100, 100),
            reacquire(2, 50, 600),
            survey(3, (400, 0)),
            reacquire(4, 10, 10),
        ],
    ]
    checked = 0
    for n_vehicles in (1, 2, 3):
        for combo in itertools.product(range(len(health)), repeat=n_vehicles):
            candidates = [
                Candidate(i + 1, health[h][0], health[h][1], positions[i])
                for i, h in enumerate(combo)
            ]
            for objs in objective_sets:
                for o in objs:
                    o.state = o.state.__class__.PENDING
                plan = make_plan(objs)
                assignment, decisions = allocate_objectives(plan, candidates, 0.0)
                route_ends = {c.vehicle_id: c.route_end for c in candidates}
                for obj, decision in zip(objs, decisions):
                    expected = brute_force_choice(route_ends, candidates, obj, plan)
                    assert decision.chosen_vehicle == expected
                    if expected is not None:
                        route_ends[expected] = objective_waypoints(obj, plan.origin)[-1]
                    check_trace_soundness(decision)
                checked += 1
    assert checked == (3 + 9 + 27) * len(objective_sets)


def check_trace_soundness(decision: AllocationDecision):
    by_vehicle: dict[int, list] = {}
    for e in decision.trace:
        by_vehicle.setdefault(e.vehicle_id, []).append(e)
    for vid, entries in by_vehicle.items():
        eligibility = [e for e in entries if e.condition is not Condition.MIN_MARGINAL_COST]
        cost = [e for e in entries if e.condition is Condition.MIN_MARGINAL_COST]
        if vid == decision.chosen_vehicle:
            assert all(e.value for e in entries)
        elif all(e.value for e in eligibility):
            assert cost and not cost[0].value
        else:
            assert any(not e.value for e in eligibility)


def test_rehearsal_track_without_objectives():
    plan = make_plan([reacquire(1, 0, 0)], launch=(0, 0), recovery=(100, 0))
    track = compute_rehearsal_track(plan, {}, vehicle_id=1)
    pts = [(round(p.x, 4), round(p.y, 4)) for p in track.waypoints]
    assert pts == [(0.0, 0.0), (100.0, 0.0)]


def test_rehearsal_track_includes_lawnmower():
    plan = make_plan(
        [survey(1, (0, 100))], launch=(0, 0), recovery=(200, 0)
    )
    track = compute_rehearsal_track(plan, {1: 1}, vehicle_id=1)
    pts = [(round(p.x, 4), round(p.y, 4)) for p in track.waypoints]
    assert pts == [
        (0.0, 0.0),
        (0.0, 110.0),
        (100.0, 110.0),
        (100.0, 130.0),
        (0.0, 130.0),
        (200.0, 0.0),
    ]


def test_rehearsal_track_orders_by_nearest_neighbor():
    near = survey(1, (0, 100), name="survey b")
    far = survey(2, (0, 400), name="survey a")
    plan = make_plan([far, near], launch=(0, 0), recovery=(0, 600))
    track = compute_rehearsal_track(plan, {1: 1, 2: 1}, vehicle_id=1)
    ys = [round(p.y, 4) for p in track.waypoints]
    assert ys.index(110.0) < ys.index(410.0)  # nearer survey first, plan order ignored
