"""Rule-based chat layer: tokens -> intent -> grounded query -> reply.

The grammar is deliberately plain keyword matching so that a transcript
replays byte-for-byte. One canonical reply template per intent, collected
in TEMPLATES below; anything the grammar cannot place falls back politely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from . import frames
from .allocation import FAULT_NAMES
from .c2 import AssetState, C2Error, MissionDb, Notification
from .mission import ObjectiveState
from .sim import KN_TO_MPS

INTENT_NAMES = [
    "QueryStatus", "QueryBattery", "QuerySpeed", "QueryPosition", "QueryDepth",
    "QueryMissionProgress", "QueryObjectiveStatus", "QueryEta", "ExplainWhy",
    "ExplainWhyNot", "CmdStartMission", "CmdAbort", "ListVehicles", "Help", "Fallback",
]

# canonical reply table; staleness appends "— last heard N s ago" before the period
TEMPLATES = {
    "QueryBattery": "Vehicle {vehicle}'s battery is at {battery}%.",
    "QuerySpeed": "Vehicle {vehicle} is doing {speed:.1f} kn.",
    "QueryPosition": "Vehicle {vehicle} is at {lat:.5f}, {lon:.5f}.",
    "QueryDepth": "Vehicle {vehicle} is at {depth:.1f} m depth.",
    "QueryStatus": "Vehicle {vehicle} is {activity}.",
    "QueryMissionProgress": "The mission is {overall:.1f}% complete ({done} of {total} objectives done).",
    "QueryObjectiveStatus": "Objective {objective} ({name}) is {state}.",
    "QueryEta": "Vehicle {vehicle} should finish its route in about {minutes:.1f} min.",
    "ExplainWhy": "{explanation}",
    "ExplainWhyNot": "{explanation}",
    "CmdStartMission": "Start command sent to Vehicle {vehicle} (command #{cmd_seq}). I'll confirm when it's acknowledged.",
    "CmdAbort": "Abort command sent to Vehicle {vehicle} (command #{cmd_seq}). I'll confirm when it's acknowledged.",
    "ListVehicles": "Tracked vehicles: {listing}.",
    "Help": (
        "You can ask about a vehicle's battery, speed, position, depth, status or ETA; "
        "ask about mission or objective progress; ask why or why not a vehicle was "
        "chosen for an objective; or say 'start mission' / 'abort' for a vehicle."
    ),
    "Fallback": "Sorry, I didn't understand. Try 'help'.",
}

NOTIFICATION_TEMPLATES = {
    "discovered": "New contact: Vehicle {vehicle} is online.",
    "objective_complete": "Vehicle {vehicle} has completed Objective {objective}.",
    "fault": "⚠ FAULT: Vehicle {vehicle} reports a {fault} fault.",
    "fault_cleared": "Vehicle {vehicle}'s {fault} fault has cleared.",
    "aborting": "Vehicle {vehicle} is aborting to the recovery point.",
    "mission_complete": "Vehicle {vehicle} reports the mission is complete.",
    "battery_low": "Vehicle {vehicle}'s battery is below 20% ({battery}%).",
    "contact_lost": "Warning: contact lost with Vehicle {vehicle}.",
    "contact_regained": "Contact with Vehicle {vehicle} regained.",
    "command_acked": "Vehicle {vehicle} acknowledged command #{cmd_seq} ({command}).",
    "command_failed": "Command #{cmd_seq} ({command}) to Vehicle {vehicle} was not acknowledged after 3 attempts.",
}

NUMBER_WORDS = {
    w: str(i + 1)
    for i, w in enumerate(
        "one two three four five six seven eight nine ten eleven twelve thirteen "
        "fourteen fifteen sixteen seventeen eighteen nineteen twenty".split()
    )
}

_NEGATIONS = {"not", "isnt", "didnt", "wasnt", "doesnt", "wont", "cant", "hasnt"}


@dataclass
class Intent:
    name: str
    vehicle: Optional[int] = None
    objective: Optional[int] = None


@dataclass
class DialogueContext:
    last_vehicle: Optional[int] = None
    last_objective: Optional[int] = None
    turn_count: int = 0
    pending: Optional[Intent] = None


@dataclass
class Reply:
    text: str
    intent: Intent
    ok: bool
    staleness_suffix_applied: bool = False


def normalize(text: str) -> list[str]:
    cleaned = re.sub(r"[^a-z0-9\s-]", "", text.lower())
    tokens = []
    for raw in cleaned.split():
        token = raw.strip("-")
        if not token:
            continue
        tokens.append(NUMBER_WORDS.get(token, token))
    return tokens


def _subseq(tokens: list[str], *phrase: str) -> bool:
    n = len(phrase)
    return any(tuple(tokens[i : i + n]) == phrase for i in range(len(tokens) - n + 1))


def _slot_after(tokens: list[str], keyword: str) -> Optional[int]:
    for i, token in enumerate(tokens[:-1]):
        if token == keyword and tokens[i + 1].isdigit():
            return int(tokens[i + 1])
    return None


def _match_name(tokens: list[str], names: dict[tuple[str, ...], int]) -> Optional[int]:
    # longest name first so "survey area b" beats "survey"
    for name_tokens in sorted(names, key=len, reverse=True):
        if _subseq(tokens, *name_tokens):
            return names[name_tokens]
    return None


def vehicle_names_of(db: MissionDb) -> dict[tuple[str, ...], int]:
    return {tuple(normalize(r.name)): r.id for r in db.vehicles.values() if r.name}


def objective_names_of(db: MissionDb) -> dict[tuple[str, ...], int]:
    return {tuple(normalize(o.name)): o.id for o in db.objectives.values() if o.name}


def parse_utterance(
    tokens: list[str],
    vehicle_names: dict[tuple[str, ...], int],
    objective_names: dict[tuple[str, ...], int],
) -> Intent:
    vehicle = _slot_after(tokens, "vehicle")
    if vehicle is None:
        vehicle = _match_name(tokens, vehicle_names)
    objective = _slot_after(tokens, "objective")
    if objective is None:
        objective = _match_name(tokens, objective_names)
    if objective is None:
        objective = _slot_after(tokens, "survey")

    has = lambda *words: any(w in tokens for w in words)

    if has("start") and has("mission"):
        name = "CmdStartMission"
    elif has("abort", "recall") or _subseq(tokens, "return", "to", "recovery"):
        name = "CmdAbort"
    elif has("why") and (has(*_NEGATIONS)):
        name = "ExplainWhyNot"
    elif has("why"):
        name = "ExplainWhy"
    elif (has("list", "which") and has("vehicles", "vehicle")) or has("assets"):
        name = "ListVehicles"
    elif (objective is not None or has("objective", "survey")) and has(
        "status", "progress", "done"
    ):
        name = "QueryObjectiveStatus"
    elif has("progress") or _subseq(tokens, "how", "far") or (
        has("mission") and has("going")
    ):
        name = "QueryMissionProgress"
    elif has("eta") or _subseq(tokens, "how", "long") or (
        has("when") and any(t.startswith("finish") for t in tokens)
    ):
        name = "QueryEta"
    elif has("battery", "charge") or _subseq(tokens, "power", "left"):
        name = "QueryBattery"
    elif has("speed", "fast"):
        name = "QuerySpeed"
    elif has("where", "position", "location"):
        name = "QueryPosition"
    elif has("depth", "deep"):
        name = "QueryDepth"
    elif has("status", "doing", "state"):
        name = "QueryStatus"
    elif has("help") or _subseq(tokens, "what", "can"):
        name = "Help"
    else:
        name = "Fallback"
    return Intent(name, vehicle, objective)


_NEEDS_VEHICLE = {
    "QueryStatus", "QueryBattery", "QuerySpeed", "QueryPosition", "QueryDepth",
    "QueryEta", "ExplainWhyNot", "CmdStartMission", "CmdAbort",
}
_NEEDS_OBJECTIVE = {"ExplainWhy", "ExplainWhyNot", "QueryObjectiveStatus"}


@dataclass
class Clarification:
    question: str
    pending: Intent


def resolve(intent: Intent, context: DialogueContext, db: MissionDb):
    """Ground slots from context or unique referents; ask when ambiguous."""
    grounded = Intent(intent.name, intent.vehicle, intent.objective)
    if grounded.name in _NEEDS_VEHICLE and grounded.vehicle is None:
        if context.last_vehicle is not None:
            grounded.vehicle = context.last_vehicle
        elif len(db.vehicles) == 1:
            grounded.vehicle = next(iter(db.vehicles))
        else:
            return Clarification("Which vehicle do you mean?", grounded)
    if grounded.name in _NEEDS_OBJECTIVE and grounded.objective is None:
        if context.last_objective is not None:
            grounded.objective = context.last_objective
        else:
            return Clarification("Which objective do you mean?", grounded)
    return grounded


@dataclass
class ExecResult:
    ok: bool
    data: dict = field(default_factory=dict)
    source_vehicle: Optional[int] = None
    apology: Optional[str] = None
    outbound: list[bytes] = field(default_factory=list)  # frames to transmit


def execute(intent: Intent, db: MissionDb, now_ms: int) -> ExecResult:
    name = intent.name
    if name in ("ListVehicles", "Help", "Fallback"):
        if name == "ListVehicles":
            listing = "; ".join(
                f"Vehicle {r.id} ({r.name}, {r.asset_state.value})"
                for r in sorted(db.vehicles.values(), key=lambda r: r.id)
            )
            return ExecResult(True, {"listing": listing or "none"})
        return ExecResult(name == "Help")

    if name == "QueryMissionProgress":
        progress = db.mission_progress()
        done = sum(1 for f in progress["objectives"].values() if f >= 1.0)
        return ExecResult(
            True,
            {
                "overall": progress["overall"] * 100.0,
                "done": done,
                "total": len(progress["objectives"]),
            },
        )

    if name == "QueryObjectiveStatus":
        obj = db.objectives.get(intent.objective)
        if obj is None:
            return ExecResult(False, apology=f"Sorry, I don't know objective {intent.objective}.")
        if obj.state is ObjectiveState.ACTIVE:
            state = f"active ({db._active_pct(obj.id)}% done)"
        else:
            state = obj.state.value
        return ExecResult(True, {"objective": obj.id, "name": obj.name, "state": state})

    if name == "ExplainWhy":
        vehicle = intent.vehicle
        if vehicle is None:
            decision = db.decision_for(intent.objective)
            if decision is None or decision.chosen_vehicle is None:
                return ExecResult(
                    False,
                    apology=f"Sorry, I have no allocation decision for objective {intent.objective}.",
                )
            vehicle = decision.chosen_vehicle
        result = db.explain_why(vehicle, intent.objective)
        if not result.ok:
            return ExecResult(False, apology=_explain_apology(result.error, vehicle, intent.objective))
        return ExecResult(True, {"explanation": result.text})

    if name == "ExplainWhyNot":
        result = db.explain_why_not(intent.vehicle, intent.objective)
        if not result.ok:
            return ExecResult(
                False, apology=_explain_apology(result.error, intent.vehicle, intent.objective)
            )
        return ExecResult(True, {"explanation": result.text})

    if name in ("CmdStartMission", "CmdAbort"):
        code = frames.CMD_START_MISSION if name == "CmdStartMission" else frames.CMD_ABORT_TO_RECOVERY
        try:
            frame_bytes, cmd_seq = db.issue_command(intent.vehicle, code, now_ms)
        except C2Error:
            return ExecResult(False, apology=f"Sorry, I don't know vehicle {intent.vehicle}.")
        return ExecResult(
            True, {"vehicle": intent.vehicle, "cmd_seq": cmd_seq}, outbound=[frame_bytes]
        )

    # per-vehicle telemetry queries
    record = db.vehicles.get(intent.vehicle)
    if record is None:
        return ExecResult(False, apology=f"Sorry, I don't know vehicle {intent.vehicle}.")
    st = record.last_status
    if st is None:
        return ExecResult(
            False, apology=f"I haven't heard from Vehicle {record.id} yet."
        )
    data: dict = {"vehicle": record.id}
    if name == "QueryBattery":
        data["battery"] = st.battery_pct
    elif name == "QuerySpeed":
        data["speed"] = st.speed_cms / 100.0 / KN_TO_MPS
    elif name == "QueryPosition":
        data["lat"], data["lon"] = st.lat, st.lon
    elif name == "QueryDepth":
        data["depth"] = st.depth_cm / 100.0
    elif name == "QueryStatus":
        if st.objective_id:
            activity = f"working Objective {st.objective_id} ({st.objective_pct}% done)"
        elif st.speed_cms > 10:
            activity = "underway"
        else:
            activity = "idle"
        if st.fault_bits:
            names = [n for bit, n in FAULT_NAMES.items() if st.fault_bits & bit]
            activity += f"; faults: {', '.join(names)}"
        data["activity"] = activity
    elif name == "QueryEta":
        eta = db.estimate_eta_s(record.id)
        if eta is None:
            return ExecResult(False, apology=f"Vehicle {record.id} has no active route.")
        data["minutes"] = eta / 60.0
    return ExecResult(True, data, source_vehicle=record.id)


def _explain_apology(error: Optional[str], vehicle: Optional[int], objective: Optional[int]) -> str:
    if error == "VEHICLE_WAS_CHOSEN":
        return (
            f"Vehicle {vehicle} WAS chosen for Objective {objective}; ask why for the reasons."
        )
    if error == "UNKNOWN_VEHICLE":
        return f"Sorry, I don't know vehicle {vehicle}."
    return f"Sorry, I have no allocation decision for objective {objective}."


def render_reply(intent: Intent, result: ExecResult, db: MissionDb, now_ms: int) -> Reply:
    if not result.ok:
        text = result.apology or TEMPLATES["Fallback"]
        return Reply(text, intent, ok=False)
    text = TEMPLATES[intent.name].format(**result.data)
    stale = False
    if result.source_vehicle is not None:
        record = db.vehicles[result.source_vehicle]
        if record.asset_state in (AssetState.STALE, AssetState.LOST):
            age_s = (now_ms - (record.last_contact_ms or 0)) // 1000
            text = text.rstrip(".") + f" — last heard {age_s} s ago."
            stale = True
    return Reply(text, intent, ok=True, staleness_suffix_applied=stale)


def handle(session: str, text: str, db: MissionDb, now_ms: int) -> Reply:
    """Full chat turn; total over arbitrary input, never raises."""
    context = db.chat_sessions.get(session)
    if not isinstance(context, DialogueContext):
        context = DialogueContext()
        db.chat_sessions[session] = context
    try:
        return _handle_turn(context, text, db, now_ms)
    except Exception:  # pragma: no cover - safety net, nothing should land here
        return Reply(TEMPLATES["Fallback"], Intent("Fallback"), ok=False)


def _handle_turn(context: DialogueContext, text: str, db: MissionDb, now_ms: int) -> Reply:
    tokens = normalize(text)
    intent = parse_utterance(tokens, vehicle_names_of(db), objective_names_of(db))
    if context.pending is not None:
        pending = context.pending
        context.pending = None
        if intent.name == "Fallback" and (
            intent.vehicle is not None or intent.objective is not None
        ):
            # bare referent answering the clarification question
            intent = Intent(
                pending.name,
                intent.vehicle if intent.vehicle is not None else pending.vehicle,
                intent.objective if intent.objective is not None else pending.objective,
            )
    if intent.name == "Fallback":
        return Reply(TEMPLATES["Fallback"], intent, ok=False)
    resolved = resolve(intent, context, db)
    if isinstance(resolved, Clarification):
        context.pending = resolved.pending
        return Reply(resolved.question, resolved.pending, ok=False)
    result = execute(resolved, db, now_ms)
    reply = render_reply(resolved, result, db, now_ms)
    if reply.ok:
        if resolved.vehicle is not None and resolved.vehicle in db.vehicles:
            context.last_vehicle = resolved.vehicle
        if resolved.objective is not None and resolved.objective in db.objectives:
            context.last_objective = resolved.objective
        context.turn_count += 1
    if result.outbound:
        reply.outbound = result.outbound  # type: ignore[attr-defined]
    return reply


def notification_to_text(n: Notification) -> str:
    params = dict(getattr(n, "params", {}) or {})
    params.setdefault("vehicle", n.vehicle_id)
    params.setdefault("objective", n.objective_id)
    template = NOTIFICATION_TEMPLATES.get(n.kind)
    if template is None:
        return n.kind
    return template.format(**params)
