"""Scenario files: strict JSON schema with exact error paths.

A scenario is the single configuration surface for a run: channel
physics, the mission plan, the vehicles, the relay endpoint, scripted
faults, and the seed. Unknown keys are rejected so a typo never silently
becomes a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from .allocation import FAULT_NAMES
from .channel import ChannelParams
from .geo import GeoPoint, GeoValidationError
from .mission import (
    MissionPlan,
    Objective,
    PlanValidationError,
    ReacquireTask,
    SurveyArea,
    SurveyTask,
    validate_plan,
)
from .sim import FaultEntry, Vehicle, VehicleKind, VehicleSpec, VehicleState, WorldState
from .geo import latlon_to_enu

DEFAULT_TICK_MS = 500
DEFAULT_TCP_LISTEN = "127.0.0.1:40400"

FAULT_CODES = {name.upper(): bit for bit, name in FAULT_NAMES.items()}


class ScenarioError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class RelayConfig:
    modem_id: int
    tcp_listen: str = DEFAULT_TCP_LISTEN
    rf_range_m: float = 2000.0

    def listen_tuple(self) -> tuple[str, int]:
        host, _, port = self.tcp_listen.rpartition(":")
        return host, int(port)


@dataclass
class Scenario:
    seed: int
    tick_ms: int
    duration_s: float
    channel: ChannelParams
    plan_data: dict
    vehicle_data: list[dict]
    relay: RelayConfig
    fault_schedule: list[FaultEntry]
    drain_multiplier: float
    source_path: Optional[str] = None

    def build_plan(self) -> MissionPlan:
        """Fresh plan object per call; sim and C2 must not share objective state."""
        return _plan_from_data(self.plan_data)

    def vehicle_specs(self) -> list[VehicleSpec]:
        return [_spec_from_data(v) for v in self.vehicle_data]

    def build_world(self) -> WorldState:
        plan = self.build_plan()
        vehicles = []
        for data in self.vehicle_data:
            spec = _spec_from_data(data)
            start = GeoPoint(data["start"]["lat"], data["start"]["lon"])
            vehicles.append(Vehicle(spec, VehicleState(pos=latlon_to_enu(plan.origin, start))))
        return WorldState(
            plan,
            vehicles,
            fault_schedule=self.fault_schedule,
            rng_seed=self.seed,
            drain_multiplier=self.drain_multiplier,
            rf_range_m=self.relay.rf_range_m,
        )


def _spec_from_data(data: dict) -> VehicleSpec:
    return VehicleSpec(
        id=data["id"],
        name=data["name"],
        kind=VehicleKind(data["kind"]),
        max_speed_kn=data.get("max_speed_kn", 4.0),
        cruise_speed_kn=data.get("cruise_speed_kn", 2.5),
        hotel_load_pct_per_h=data.get("hotel_load_pct_per_h", 4.5),
        prop_load_pct_per_h_per_kn3=data.get("prop_load_pct_per_h_per_kn3", 0.294),
        status_period_s=data.get("status_period_s", 30),
    )


def _plan_from_data(data: dict) -> MissionPlan:
    objectives = []
    for obj in data["objectives"]:
        if obj["kind"] == "survey":
            area = obj["area"]
            kind: Union[SurveyTask, ReacquireTask] = SurveyTask(
                SurveyArea(
                    GeoPoint(area["corner"]["lat"], area["corner"]["lon"]),
                    area["width_m"],
                    area["height_m"],
                    area.get("rotation_deg", 0.0),
                ),
                obj["spacing_m"],
            )
        else:
            kind = ReacquireTask(GeoPoint(obj["target"]["lat"], obj["target"]["lon"]))
        objectives.append(Objective(obj["id"], obj["name"], kind))
    return MissionPlan(
        origin=GeoPoint(data["origin"]["lat"], data["origin"]["lon"]),
        launch=GeoPoint(data["launch"]["lat"], data["launch"]["lon"]),
        recovery=GeoPoint(data["recovery"]["lat"], data["recovery"]["lon"]),
        shore_station=GeoPoint(data["shore_station"]["lat"], data["shore_station"]["lon"]),
        objectives=objectives,
    )


class _Checker:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def require_keys(self, obj: dict, path: str, required: set, optional: set) -> bool:
        ok = True
        for key in sorted(set(obj) - required - optional):
            self.fail(f"{path}.{key}" if path else key, "unknown key")
            ok = False
        for key in sorted(required - set(obj)):
            self.fail(f"{path}.{key}" if path else key, "missing")
            ok = False
        return ok

    def number(self, obj: dict, path: str, key: str, minimum=None, maximum=None,
               exclusive_min=None, integer=False, default=None):
        if key not in obj:
            return default
        value = obj[key]
        here = f"{path}.{key}" if path else key
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(here, "must be a number")
            return default
        if integer and not isinstance(value, int):
            self.fail(here, "must be an integer")
            return default
        if minimum is not None and value < minimum:
            self.fail(here, f"must be >= {minimum}")
            return default
        if maximum is not None and value > maximum:
            self.fail(here, f"must be <= {maximum}")
            return default
        if exclusive_min is not None and value <= exclusive_min:
            self.fail(here, f"must be > {exclusive_min}")
            return default
        return value

    def string(self, obj: dict, path: str, key: str, default=None, choices=None):
        if key not in obj:
            return default
        value = obj[key]
        here = f"{path}.{key}" if path else key
        if not isinstance(value, str):
            self.fail(here, "must be a string")
            return default
        if choices and value not in choices:
            self.fail(here, f"must be one of {sorted(choices)}")
            return default
        return value

    def geo(self, obj: Any, path: str) -> Optional[dict]:
        if not isinstance(obj, dict):
            self.fail(path, "must be an object with lat and lon")
            return None
        if not self.require_keys(obj, path, {"lat", "lon"}, set()):
            return None
        lat = self.number(obj, path, "lat", minimum=-90, maximum=90)
        lon = self.number(obj, path, "lon", minimum=-180, maximum=180)
        if lat is None or lon is None:
            return None
        return {"lat": lat, "lon": lon}


def parse_scenario(source: Union[str, Path, dict]) -> Scenario:
    """Parse and validate; raises ScenarioError listing every problem found."""
    source_path = None
    if isinstance(source, (str, Path)):
        source_path = str(source)
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError([f"{source}: {exc}"]) from exc
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ScenarioError(["scenario: top level must be an object"])

    c = _Checker()
    c.require_keys(
        raw,
        "",
        required={"duration_s", "plan", "vehicles", "relay"},
        optional={"seed", "tick_ms", "channel", "fault_schedule", "drain_multiplier"},
    )
    seed = c.number(raw, "", "seed", integer=True, minimum=0, default=0)
    tick_ms = c.number(raw, "", "tick_ms", integer=True, minimum=1, maximum=10_000,
                       default=DEFAULT_TICK_MS)
    duration_s = c.number(raw, "", "duration_s", exclusive_min=0, default=None)
    drain = c.number(raw, "", "drain_multiplier", minimum=1.0, default=1.0)

    channel = _parse_channel(c, raw.get("channel", {}))
    plan_data = _parse_plan(c, raw.get("plan"))
    vehicle_data = _parse_vehicles(c, raw.get("vehicles"))
    relay = _parse_relay(c, raw.get("relay"))
    faults = _parse_faults(c, raw.get("fault_schedule", []),
                           {v["id"] for v in vehicle_data} if vehicle_data else set())

    if relay is not None and vehicle_data:
        if any(v["id"] == relay.modem_id for v in vehicle_data):
            c.fail("relay.modem_id", "must differ from every vehicle id")

    if c.errors:
        raise ScenarioError(c.errors)

    scenario = Scenario(
        seed=seed,
        tick_ms=tick_ms,
        duration_s=duration_s,
        channel=channel,
        plan_data=plan_data,
        vehicle_data=vehicle_data,
        relay=relay,
        fault_schedule=faults,
        drain_multiplier=drain,
        source_path=source_path,
    )
    # plan-level invariants get the same error surface
    try:
        plan = scenario.build_plan()
    except (PlanValidationError, GeoValidationError) as exc:
        raise ScenarioError([f"plan: {exc}"]) from exc
    violations = validate_plan(plan)
    if violations:
        raise ScenarioError([f"plan: {v.code}: {v.detail}" for v in violations])
    try:
        scenario.vehicle_specs()
    except ValueError as exc:
        raise ScenarioError([f"vehicles: {exc}"]) from exc
    return scenario


def _parse_channel(c: _Checker, data: Any) -> ChannelParams:
    if not isinstance(data, dict):
        c.fail("channel", "must be an object")
        return ChannelParams()
    c.require_keys(
        data, "channel", set(),
        {"sound_speed_mps", "bitrate_bps", "max_range_m", "base_loss", "loss_exponent"},
    )
    kwargs = {}
    v = c.number(data, "channel", "sound_speed_mps", exclusive_min=0)
    if v is not None:
        kwargs["sound_speed_mps"] = float(v)
    v = c.number(data, "channel", "bitrate_bps", exclusive_min=0, integer=True)
    if v is not None:
        kwargs["bitrate_bps"] = v
    v = c.number(data, "channel", "max_range_m", exclusive_min=0)
    if v is not None:
        kwargs["max_range_m"] = float(v)
    v = c.number(data, "channel", "base_loss", minimum=0.0, maximum=0.999)
    if v is not None:
        kwargs["base_loss"] = float(v)
    v = c.number(data, "channel", "loss_exponent", minimum=1.0)
    if v is not None:
        kwargs["loss_exponent"] = float(v)
    try:
        return ChannelParams(**kwargs)
    except ValueError as exc:
        c.fail("channel", str(exc))
        return ChannelParams()


def _parse_plan(c: _Checker, data: Any) -> dict:
    if not isinstance(data, dict):
        if data is not None:
            c.fail("plan", "must be an object")
        return {}
    c.require_keys(
        data, "plan",
        {"origin", "launch", "recovery", "shore_station", "objectives"}, set(),
    )
    out: dict = {}
    for key in ("origin", "launch", "recovery", "shore_station"):
        if key in data:
            geo = c.geo(data[key], f"plan.{key}")
            if geo:
                out[key] = geo
    objectives = data.get("objectives")
    out["objectives"] = []
    if objectives is None:
        return out
    if not isinstance(objectives, list) or not objectives:
        c.fail("plan.objectives", "must be a non-empty array")
        return out
    for i, obj in enumerate(objectives):
        path = f"plan.objectives[{i}]"
        if not isinstance(obj, dict):
            c.fail(path, "must be an object")
            continue
        kind = c.string(obj, path, "kind", choices={"survey", "reacquire"})
        if kind == "survey":
            c.require_keys(obj, path, {"id", "name", "kind", "area", "spacing_m"}, set())
        elif kind == "reacquire":
            c.require_keys(obj, path, {"id", "name", "kind", "target"}, set())
        else:
            continue
        parsed = {
            "id": c.number(obj, path, "id", integer=True, minimum=1, maximum=250),
            "name": c.string(obj, path, "name", default=""),
            "kind": kind,
        }
        if kind == "survey":
            area = obj.get("area")
            if not isinstance(area, dict):
                c.fail(f"{path}.area", "must be an object")
                continue
            c.require_keys(
                area, f"{path}.area",
                {"corner", "width_m", "height_m"}, {"rotation_deg"},
            )
            corner = c.geo(area.get("corner"), f"{path}.area.corner")
            parsed["area"] = {
                "corner": corner,
                "width_m": c.number(area, f"{path}.area", "width_m", exclusive_min=0),
                "height_m": c.number(area, f"{path}.area", "height_m", exclusive_min=0),
                "rotation_deg": c.number(
                    area, f"{path}.area", "rotation_deg", minimum=0, maximum=359.999999,
                    default=0.0,
                ),
            }
            parsed["spacing_m"] = c.number(obj, path, "spacing_m", exclusive_min=0)
        else:
            parsed["target"] = c.geo(obj.get("target"), f"{path}.target")
        if parsed["id"] is not None:
            out["objectives"].append(parsed)
    return out


def _parse_vehicles(c: _Checker, data: Any) -> list[dict]:
    if not isinstance(data, list) or not data:
        c.fail("vehicles", "must be a non-empty array")
        return []
    out = []
    seen_ids = set()
    for i, vehicle in enumerate(data):
        path = f"vehicles[{i}]"
        if not isinstance(vehicle, dict):
            c.fail(path, "must be an object")
            continue
        c.require_keys(
            vehicle, path,
            {"id", "name", "kind", "start"},
            {"max_speed_kn", "cruise_speed_kn", "hotel_load_pct_per_h",
             "prop_load_pct_per_h_per_kn3", "status_period_s"},
        )
        vid = c.number(vehicle, path, "id", integer=True, minimum=1, maximum=250)
        if vid in seen_ids:
            c.fail(f"{path}.id", f"duplicate vehicle id {vid}")
        seen_ids.add(vid)
        parsed = {
            "id": vid,
            "name": c.string(vehicle, path, "name", default=f"vehicle-{vid}"),
            "kind": c.string(vehicle, path, "kind", choices={"auv", "relay_usv"}),
            "start": c.geo(vehicle.get("start"), f"{path}.start"),
        }
        for key, check in (
            ("max_speed_kn", dict(exclusive_min=0)),
            ("cruise_speed_kn", dict(exclusive_min=0)),
            ("hotel_load_pct_per_h", dict(minimum=0)),
            ("prop_load_pct_per_h_per_kn3", dict(minimum=0)),
            ("status_period_s", dict(integer=True, minimum=1)),
        ):
            value = c.number(vehicle, path, key, **check)
            if value is not None:
                parsed[key] = value
        if vid is not None and parsed["kind"] is not None and parsed["start"] is not None:
            out.append(parsed)
    return out


def _parse_relay(c: _Checker, data: Any) -> Optional[RelayConfig]:
    if not isinstance(data, dict):
        c.fail("relay", "must be an object")
        return None
    c.require_keys(data, "relay", {"modem_id"}, {"tcp_listen", "rf_range_m"})
    modem_id = c.number(data, "relay", "modem_id", integer=True, minimum=0, maximum=254)
    listen = c.string(data, "relay", "tcp_listen", default=DEFAULT_TCP_LISTEN)
    rf_range = c.number(data, "relay", "rf_range_m", exclusive_min=0, default=2000.0)
    if listen is not None and ":" not in listen:
        c.fail("relay.tcp_listen", "must look like host:port")
        listen = DEFAULT_TCP_LISTEN
    if modem_id is None:
        return None
    return RelayConfig(modem_id, listen, float(rf_range))


def _parse_faults(c: _Checker, data: Any, vehicle_ids: set) -> list[FaultEntry]:
    if not isinstance(data, list):
        c.fail("fault_schedule", "must be an array")
        return []
    out = []
    last_t = None
    for i, entry in enumerate(data):
        path = f"fault_schedule[{i}]"
        if not isinstance(entry, dict):
            c.fail(path, "must be an object")
            continue
        c.require_keys(entry, path, {"t_s", "vehicle_id", "fault", "action"}, set())
        t_s = c.number(entry, path, "t_s", minimum=0)
        vid = c.number(entry, path, "vehicle_id", integer=True)
        fault = c.string(entry, path, "fault", choices=set(FAULT_CODES))
        action = c.string(entry, path, "action", choices={"set", "clear"})
        if None in (t_s, vid, fault, action):
            continue
        if vehicle_ids and vid not in vehicle_ids:
            c.fail(f"{path}.vehicle_id", f"unknown vehicle {vid}")
            continue
        if last_t is not None and t_s < last_t:
            c.fail(f"{path}.t_s", "fault schedule must be sorted by t_s")
        last_t = t_s
        out.append(FaultEntry(float(t_s), vid, FAULT_CODES[fault], action == "set"))
    return out
