"""Deterministic stepped vehicle simulation.

One fixed-dt tick advances every vehicle: scheduled faults land, batteries
drain under a hotel-plus-cubic-propeller load, vehicles run their routes
with instantaneous heading changes, objective lifecycle events fire, and
telemetry frames are queued for transmission. Identical (scenario, seed)
always yields an identical event trajectory; nothing here reads a wall
clock or unordered collection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import frames
from .allocation import (
    AllocationDecision,
    BLOCKING_FAULTS,
    Candidate,
    FAULT_COMMS,
    FAULT_NAMES,
    allocate_objectives,
    build_route,
    objective_internal_length,
    RoutePoint,
)
from .geo import EnuPoint, enu_to_latlon, latlon_to_enu
from .mission import MissionPlan, Objective, ObjectiveState, ReacquireTask

KN_TO_MPS = 0.5144
CAPTURE_RADIUS_M = 5.0
SURVEY_DEPTH_M = 2.0
LOW_BATTERY_PCT = 20.0
ABORT_BATTERY_PCT = 10.0
DEFAULT_STATUS_PERIOD_S = 30
DEFAULT_RF_RANGE_M = 2000.0


class VehicleKind(Enum):
    AUV = "auv"
    RELAY_USV = "relay_usv"


class Mode(Enum):
    IDLE = "idle"
    TRANSIT = "transit"
    SURVEY = "survey"
    REACQUIRE = "reacquire"
    ABORT_TO_RECOVERY = "abort_to_recovery"
    RECOVERED = "recovered"


class SimEventKind(Enum):
    OBJECTIVE_STARTED = "ObjectiveStarted"
    OBJECTIVE_COMPLETED = "ObjectiveCompleted"
    FAULT_ONSET = "FaultOnset"
    FAULT_CLEARED = "FaultCleared"
    BATTERY_LOW = "BatteryLow"
    MISSION_COMPLETE = "MissionComplete"
    REPLANNED = "Replanned"
    ABORT_STARTED = "AbortStarted"
    RECOVERED = "Recovered"


# wire codes for event kinds that travel as EVENT frames
EVENT_WIRE_CODES = {
    SimEventKind.OBJECTIVE_STARTED: frames.EVT_OBJ_STARTED,
    SimEventKind.OBJECTIVE_COMPLETED: frames.EVT_OBJ_COMPLETED,
    SimEventKind.FAULT_ONSET: frames.EVT_FAULT_ONSET,
    SimEventKind.ABORT_STARTED: frames.EVT_ABORTING,
    SimEventKind.MISSION_COMPLETE: frames.EVT_MISSION_COMPLETE,
    SimEventKind.FAULT_CLEARED: frames.EVT_FAULT_CLEARED,
    SimEventKind.RECOVERED: frames.EVT_RECOVERED,
}


@dataclass(frozen=True)
class SimEvent:
    t_ms: int
    kind: SimEventKind
    vehicle_id: int
    objective_id: Optional[int] = None
    detail: str = ""
    wire_detail: int = 0


@dataclass(frozen=True)
class VehicleSpec:
    id: int
    name: str
    kind: VehicleKind
    max_speed_kn: float = 4.0
    cruise_speed_kn: float = 2.5
    hotel_load_pct_per_h: float = 4.5
    prop_load_pct_per_h_per_kn3: float = 0.294
    status_period_s: int = DEFAULT_STATUS_PERIOD_S

    def __post_init__(self) -> None:
        if not 0 < self.cruise_speed_kn <= self.max_speed_kn:
            raise ValueError("need 0 < cruise_speed_kn <= max_speed_kn")
        if self.hotel_load_pct_per_h < 0 or self.prop_load_pct_per_h_per_kn3 < 0:
            raise ValueError("battery load coefficients must be non-negative")


@dataclass
class VehicleState:
    pos: EnuPoint
    depth_m: float = 0.0
    heading_deg: float = 0.0
    speed_kn: float = 0.0
    battery_pct: float = 100.0
    fault_bits: int = 0
    mode: Mode = Mode.IDLE
    current_objective: Optional[int] = None
    route: list[RoutePoint] = field(default_factory=list)
    route_index: int = 0
    seq_counter: int = 0
    started: bool = False
    last_emitted_pos: Optional[EnuPoint] = None
    last_emitted_ms: Optional[int] = None
    ping_requested: bool = False
    low_battery_flagged: bool = False
    obj_total_m: float = 0.0
    obj_done_m: float = 0.0
    inbox: list[frames.AcousticFrame] = field(default_factory=list)


@dataclass
class Vehicle:
    spec: VehicleSpec
    state: VehicleState


@dataclass(frozen=True)
class FaultEntry:
    t_s: float
    vehicle_id: int
    fault: int
    set_fault: bool  # False clears


class WorldState:
    """Vehicles, plan, allocation record, and the logical clock."""

    def __init__(
        self,
        plan: MissionPlan,
        vehicles: list[Vehicle],
        fault_schedule: Optional[list[FaultEntry]] = None,
        rng_seed: int = 0,
        drain_multiplier: float = 1.0,
        rf_range_m: float = DEFAULT_RF_RANGE_M,
    ):
        self.clock_ms = 0
        self.plan = plan
        self.vehicles: dict[int, Vehicle] = {
            v.spec.id: v for v in sorted(vehicles, key=lambda v: v.spec.id)
        }
        self.fault_schedule = sorted(fault_schedule or [], key=lambda f: f.t_s)
        self._fault_cursor = 0
        self.rng_seed = rng_seed
        self.drain_multiplier = drain_multiplier
        self.rf_range_m = rf_range_m
        self.shore_enu = latlon_to_enu(plan.origin, plan.shore_station)
        self.recovery_enu = latlon_to_enu(plan.origin, plan.recovery)
        self.mission_complete_fired = False
        assignment, decisions = allocate_objectives(plan, self._candidates(), 0.0)
        self.allocation: dict[int, int] = assignment
        self.decisions: list[AllocationDecision] = decisions

    def objective(self, objective_id: int) -> Objective:
        for obj in self.plan.objectives:
            if obj.id == objective_id:
                return obj
        raise KeyError(objective_id)

    def auvs(self) -> list[Vehicle]:
        return [v for v in self.vehicles.values() if v.spec.kind is VehicleKind.AUV]

    def deliver(self, vehicle_id: int, frame: frames.AcousticFrame) -> None:
        self.vehicles[vehicle_id].state.inbox.append(frame)

    def _candidates(self, exclude: Optional[int] = None) -> list[Candidate]:
        return [
            Candidate(v.spec.id, v.state.fault_bits, v.state.battery_pct, v.state.pos)
            for v in self.auvs()
            if v.spec.id != exclude
        ]


def step(
    world: WorldState, dt_ms: int
) -> tuple[list[SimEvent], list[tuple[int, frames.AcousticFrame]]]:
    """Advance the world one tick; returns (events, frames to transmit)."""
    if not 1 <= dt_ms <= 10_000:
        raise ValueError(f"dt_ms {dt_ms} outside [1, 10000]")
    now = world.clock_ms + dt_ms
    world.clock_ms = now
    events: list[SimEvent] = []
    emissions: list[tuple[int, frames.AcousticFrame]] = []

    _apply_fault_schedule(world, now, events)

    for vid in sorted(world.vehicles):
        vehicle = world.vehicles[vid]
        _process_inbox(world, vehicle, now, events, emissions)

    for vid in sorted(world.vehicles):
        vehicle = world.vehicles[vid]
        spec, st = vehicle.spec, vehicle.state
        if spec.kind is VehicleKind.RELAY_USV and st.mode not in (
            Mode.ABORT_TO_RECOVERY,
            Mode.RECOVERED,
        ):
            _update_station_keeping(world, vehicle)

        moving = st.route_index < len(st.route) and st.mode in (
            Mode.TRANSIT,
            Mode.SURVEY,
            Mode.REACQUIRE,
            Mode.ABORT_TO_RECOVERY,
        )
        st.speed_kn = spec.cruise_speed_kn if (moving and st.battery_pct > 0) else 0.0
        if moving and st.speed_kn > 0:
            _advance_along_route(world, vehicle, dt_ms, now, events)

        _drain_battery(world, vehicle, dt_ms, now, events)
        st.depth_m = SURVEY_DEPTH_M if st.mode is Mode.SURVEY else 0.0
        _check_route_end(world, vehicle, now, events)

    for vid in sorted(world.vehicles):
        _emit_telemetry(world, world.vehicles[vid], now, dt_ms, events, emissions)
    return events, emissions


def estimate_eta(world: WorldState, vehicle_id: int) -> Optional[float]:
    """Seconds to route end at cruise speed; None when idle or recovered."""
    vehicle = world.vehicles[vehicle_id]
    st = vehicle.state
    if st.mode in (Mode.IDLE, Mode.RECOVERED):
        return None
    remaining = _remaining_route_m(st)
    return remaining / (vehicle.spec.cruise_speed_kn * KN_TO_MPS)


def relay_station_keeping(world: WorldState, relay_id: int) -> EnuPoint:
    """Hold the midpoint between shore and the AUV, leashed to RF range."""
    shore = world.shore_enu
    auv_pos = _freshest_auv_position(world)
    if auv_pos is None:
        return world.vehicles[relay_id].state.pos
    target = EnuPoint((shore.x + auv_pos.x) / 2.0, (shore.y + auv_pos.y) / 2.0)
    d = shore.distance_to(target)
    if d > world.rf_range_m:
        scale = world.rf_range_m / d
        target = EnuPoint(
            shore.x + (target.x - shore.x) * scale,
            shore.y + (target.y - shore.y) * scale,
        )
    return target


def _freshest_auv_position(world: WorldState) -> Optional[EnuPoint]:
    best: Optional[tuple[int, int]] = None  # (-t, id) for min()
    best_pos = None
    for v in world.auvs():
        if v.state.last_emitted_pos is None or v.state.last_emitted_ms is None:
            continue
        key = (-v.state.last_emitted_ms, v.spec.id)
        if best is None or key < best:
            best = key
            best_pos = v.state.last_emitted_pos
    return best_pos


def _apply_fault_schedule(world: WorldState, now: int, events: list[SimEvent]) -> None:
    while world._fault_cursor < len(world.fault_schedule):
        entry = world.fault_schedule[world._fault_cursor]
        if entry.t_s * 1000.0 > now:
            break
        world._fault_cursor += 1
        vehicle = world.vehicles.get(entry.vehicle_id)
        if vehicle is None:
            continue
        st = vehicle.state
        name = FAULT_NAMES.get(entry.fault, str(entry.fault))
        if entry.set_fault:
            st.fault_bits |= entry.fault
            events.append(
                SimEvent(now, SimEventKind.FAULT_ONSET, entry.vehicle_id,
                         detail=name, wire_detail=entry.fault)
            )
            if entry.fault & BLOCKING_FAULTS and st.mode is not Mode.RECOVERED:
                _start_abort(world, vehicle, now, f"{name} fault", events)
        else:
            st.fault_bits &= ~entry.fault
            events.append(
                SimEvent(now, SimEventKind.FAULT_CLEARED, entry.vehicle_id,
                         detail=name, wire_detail=entry.fault)
            )


def _process_inbox(
    world: WorldState,
    vehicle: Vehicle,
    now: int,
    events: list[SimEvent],
    emissions: list[tuple[int, frames.AcousticFrame]],
) -> None:
    spec, st = vehicle.spec, vehicle.state
    inbox, st.inbox = st.inbox, []
    for frame in inbox:
        if st.fault_bits & FAULT_COMMS:
            continue  # modem is down; inbound traffic is lost too
        if frame.msg_type != frames.MSG_COMMAND:
            continue
        try:
            cmd = frames.decode_payload(frame.msg_type, frame.payload)
        except frames.FrameError:
            continue
        assert isinstance(cmd, frames.Command)
        if cmd.cmd_code == frames.CMD_PING:
            st.ping_requested = True
            continue
        # commands are idempotent and always acknowledged, so a retry whose
        # predecessor's ack was lost still gets answered
        _queue_frame(vehicle, frames.MSG_ACK, frames.Ack(frame.seq, frames.ACK_OK), emissions)
        if cmd.cmd_code == frames.CMD_START_MISSION:
            if spec.kind is VehicleKind.AUV and not st.started:
                st.started = True
                assigned = [
                    o
                    for o in world.plan.objectives
                    if world.allocation.get(o.id) == spec.id
                    and o.state is not ObjectiveState.COMPLETE
                ]
                st.route = build_route(st.pos, assigned, world.plan.origin, world.recovery_enu)
                st.route_index = 0
                st.mode = Mode.TRANSIT
        elif cmd.cmd_code == frames.CMD_ABORT_TO_RECOVERY:
            if st.mode not in (Mode.ABORT_TO_RECOVERY, Mode.RECOVERED):
                _start_abort(world, vehicle, now, "operator command", events)


def _start_abort(
    world: WorldState, vehicle: Vehicle, now: int, reason: str, events: list[SimEvent]
) -> None:
    spec, st = vehicle.spec, vehicle.state
    if st.mode in (Mode.ABORT_TO_RECOVERY, Mode.RECOVERED):
        return
    events.append(SimEvent(now, SimEventKind.ABORT_STARTED, spec.id, detail=reason))
    st.mode = Mode.ABORT_TO_RECOVERY
    st.started = True
    st.current_objective = None
    st.route = [RoutePoint(world.recovery_enu)]
    st.route_index = 0
    if spec.kind is VehicleKind.AUV:
        _reallocate_from(world, spec.id, now, events)


def _reallocate_from(
    world: WorldState, vehicle_id: int, now: int, events: list[SimEvent]
) -> None:
    orphaned = [
        o
        for o in world.plan.objectives
        if world.allocation.get(o.id) == vehicle_id and o.state is not ObjectiveState.COMPLETE
    ]
    if not orphaned:
        return
    for obj in orphaned:
        obj.state = ObjectiveState.PENDING
        del world.allocation[obj.id]
    assignment, decisions = allocate_objectives(
        world.plan, world._candidates(exclude=vehicle_id), now / 1000.0, objectives=orphaned
    )
    world.decisions.extend(decisions)
    moves = []
    for obj in orphaned:
        new_owner = assignment.get(obj.id)
        if new_owner is None:
            moves.append(f"objective {obj.id} unassigned")
            continue
        world.allocation[obj.id] = new_owner
        moves.append(f"objective {obj.id} -> vehicle {new_owner}")
        receiver = world.vehicles[new_owner]
        if receiver.state.started and receiver.state.mode in (Mode.TRANSIT, Mode.SURVEY,
                                                              Mode.REACQUIRE, Mode.IDLE):
            _rebuild_route(world, receiver)
    events.append(
        SimEvent(now, SimEventKind.REPLANNED, vehicle_id, detail="; ".join(moves))
    )


def _rebuild_route(world: WorldState, vehicle: Vehicle) -> None:
    """Re-plan a running vehicle's remaining route after allocation changed."""
    spec, st = vehicle.spec, vehicle.state
    keep: list[RoutePoint] = []
    if st.current_objective is not None:
        # keep the remaining points of the objective in progress, but do not
        # re-fire its start event
        keep = [
            RoutePoint(rp.point, rp.objective_id, False, rp.objective_exit)
            for rp in st.route[st.route_index:]
            if rp.objective_id == st.current_objective
        ]
    assigned = [
        o
        for o in world.plan.objectives
        if world.allocation.get(o.id) == spec.id
        and o.state in (ObjectiveState.PENDING,)
        and o.id != st.current_objective
    ]
    start = keep[-1].point if keep else st.pos
    tail = build_route(start, assigned, world.plan.origin, world.recovery_enu)
    st.route = keep + tail
    st.route_index = 0
    if st.mode is Mode.IDLE and st.route:
        st.mode = Mode.TRANSIT


def _update_station_keeping(world: WorldState, vehicle: Vehicle) -> None:
    st = vehicle.state
    target = relay_station_keeping(world, vehicle.spec.id)
    if st.pos.distance_to(target) <= CAPTURE_RADIUS_M:
        st.route = []
        st.route_index = 0
        if st.mode is Mode.TRANSIT:
            st.mode = Mode.IDLE
    else:
        st.route = [RoutePoint(target)]
        st.route_index = 0
        st.mode = Mode.TRANSIT


def _advance_along_route(
    world: WorldState, vehicle: Vehicle, dt_ms: int, now: int, events: list[SimEvent]
) -> None:
    spec, st = vehicle.spec, vehicle.state
    budget = st.speed_kn * KN_TO_MPS * dt_ms / 1000.0
    while budget > 1e-9 and st.route_index < len(st.route):
        rp = st.route[st.route_index]
        d = st.pos.distance_to(rp.point)
        if d <= CAPTURE_RADIUS_M:
            _capture_waypoint(world, vehicle, rp, now, events)
            st.route_index += 1
            continue
        move = min(budget, d)
        st.heading_deg = math.degrees(
            math.atan2(rp.point.x - st.pos.x, rp.point.y - st.pos.y)
        ) % 360.0
        st.pos = EnuPoint(
            st.pos.x + (rp.point.x - st.pos.x) / d * move,
            st.pos.y + (rp.point.y - st.pos.y) / d * move,
        )
        if st.mode in (Mode.SURVEY, Mode.REACQUIRE):
            st.obj_done_m += move
        budget -= move
        if st.pos.distance_to(rp.point) <= CAPTURE_RADIUS_M:
            _capture_waypoint(world, vehicle, rp, now, events)
            st.route_index += 1


def _capture_waypoint(
    world: WorldState, vehicle: Vehicle, rp: RoutePoint, now: int, events: list[SimEvent]
) -> None:
    spec, st = vehicle.spec, vehicle.state
    if rp.objective_id is None:
        return
    obj = world.objective(rp.objective_id)
    if rp.objective_entry:
        st.current_objective = obj.id
        st.mode = Mode.REACQUIRE if isinstance(obj.kind, ReacquireTask) else Mode.SURVEY
        st.obj_total_m = objective_internal_length(obj, world.plan.origin)
        st.obj_done_m = 0.0
        obj.state = ObjectiveState.ACTIVE
        events.append(
            SimEvent(now, SimEventKind.OBJECTIVE_STARTED, spec.id, objective_id=obj.id)
        )
    if rp.objective_exit:
        obj.state = ObjectiveState.COMPLETE
        events.append(
            SimEvent(now, SimEventKind.OBJECTIVE_COMPLETED, spec.id, objective_id=obj.id)
        )
        st.current_objective = None
        st.mode = Mode.TRANSIT


def _drain_battery(
    world: WorldState, vehicle: Vehicle, dt_ms: int, now: int, events: list[SimEvent]
) -> None:
    spec, st = vehicle.spec, vehicle.state
    if st.battery_pct <= 0:
        return
    rate = (
        spec.hotel_load_pct_per_h
        + spec.prop_load_pct_per_h_per_kn3 * st.speed_kn**3
    ) * world.drain_multiplier
    st.battery_pct = max(0.0, st.battery_pct - rate * dt_ms / 3_600_000.0)
    if st.battery_pct <= LOW_BATTERY_PCT and not st.low_battery_flagged:
        st.low_battery_flagged = True
        events.append(
            SimEvent(now, SimEventKind.BATTERY_LOW, spec.id,
                     detail=f"battery {st.battery_pct:.1f}%")
        )
    if st.battery_pct <= ABORT_BATTERY_PCT and st.mode not in (
        Mode.ABORT_TO_RECOVERY,
        Mode.RECOVERED,
        Mode.IDLE,
    ):
        _start_abort(world, vehicle, now, f"battery {st.battery_pct:.1f}%", events)


def _check_route_end(
    world: WorldState, vehicle: Vehicle, now: int, events: list[SimEvent]
) -> None:
    spec, st = vehicle.spec, vehicle.state
    if st.mode is Mode.RECOVERED:
        return
    route_done = st.started and st.route_index >= len(st.route)
    if not route_done:
        return
    all_complete = all(o.state is ObjectiveState.COMPLETE for o in world.plan.objectives)
    at_recovery = st.pos.distance_to(world.recovery_enu) <= CAPTURE_RADIUS_M
    if st.mode is Mode.ABORT_TO_RECOVERY:
        if at_recovery:
            st.mode = Mode.RECOVERED
            events.append(SimEvent(now, SimEventKind.RECOVERED, spec.id))
        return
    if spec.kind is not VehicleKind.AUV:
        return
    if all_complete and at_recovery:
        world.mission_complete_fired = True
        events.append(SimEvent(now, SimEventKind.MISSION_COMPLETE, spec.id))
        st.mode = Mode.RECOVERED
        events.append(SimEvent(now, SimEventKind.RECOVERED, spec.id))
    else:
        st.mode = Mode.IDLE


def _remaining_route_m(st: VehicleState) -> float:
    if st.route_index >= len(st.route):
        return 0.0
    total = st.pos.distance_to(st.route[st.route_index].point)
    for a, b in zip(st.route[st.route_index:], st.route[st.route_index + 1:]):
        total += a.point.distance_to(b.point)
    return total


def objective_progress_pct(st: VehicleState) -> int:
    if st.current_objective is None:
        return 0
    if st.obj_total_m <= 0:
        return 100
    return min(100, round(100.0 * st.obj_done_m / st.obj_total_m))


def _emit_telemetry(
    world: WorldState,
    vehicle: Vehicle,
    now: int,
    dt_ms: int,
    events: list[SimEvent],
    emissions: list[tuple[int, frames.AcousticFrame]],
) -> None:
    spec, st = vehicle.spec, vehicle.state
    if st.fault_bits & FAULT_COMMS:
        st.ping_requested = False
        return
    for event in events:
        if event.vehicle_id != spec.id or event.t_ms != now:
            continue
        code = EVENT_WIRE_CODES.get(event.kind)
        if code is None:
            continue
        _queue_frame(
            vehicle,
            frames.MSG_EVENT,
            frames.Event(code, event.objective_id or 0, event.wire_detail),
            emissions,
        )
    status_due = now % (spec.status_period_s * 1000) == 0
    if status_due or st.ping_requested:
        st.ping_requested = False
        _queue_frame(vehicle, frames.MSG_STATUS, _build_status(world, vehicle), emissions)
        st.last_emitted_pos = st.pos
        st.last_emitted_ms = now


def _build_status(world: WorldState, vehicle: Vehicle) -> frames.Status:
    spec, st = vehicle.spec, vehicle.state
    geo = enu_to_latlon(world.plan.origin, st.pos)
    return frames.Status(
        lat_e7=round(geo.lat * 1e7),
        lon_e7=round(geo.lon * 1e7),
        depth_cm=round(st.depth_m * 100),
        speed_cms=round(st.speed_kn * KN_TO_MPS * 100),
        heading_cdeg=round(st.heading_deg * 100) % 36000,
        battery_pct=round(st.battery_pct),
        fault_bits=st.fault_bits,
        objective_id=st.current_objective or 0,
        objective_pct=objective_progress_pct(st),
    )


def _queue_frame(
    vehicle: Vehicle,
    msg_type: int,
    msg: frames.TelemetryMessage,
    emissions: list[tuple[int, frames.AcousticFrame]],
) -> None:
    st = vehicle.state
    mt, payload = frames.encode_payload(msg)
    assert mt == msg_type
    frame = frames.AcousticFrame(
        src=vehicle.spec.id,
        dst=frames.BROADCAST_ADDR,
        msg_type=msg_type,
        seq=st.seq_counter,
        payload=payload,
    )
    st.seq_counter = (st.seq_counter + 1) & 0xFFFF
    emissions.append((vehicle.spec.id, frame))
