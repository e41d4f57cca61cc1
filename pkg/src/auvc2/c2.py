"""Shore-side command-and-control state.

MissionDb is the C2's last-known truth: vehicle records fed by relayed
telemetry, objective states, an append-only event log, notifications, and
in-flight commands. Everything here is pure bookkeeping driven by
ingest_frame and tick; sockets and HTTP live elsewhere.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Callable, Optional

from . import frames
from .allocation import (
    AllocationDecision,
    Condition,
    FAULT_NAMES,
    build_route,
    objective_internal_length,
    objective_waypoints,
)
from .geo import GeoPoint, latlon_to_enu
from .mission import MissionPlan, Objective, ObjectiveState
from .sim import KN_TO_MPS, VehicleKind

C2_ADDRESS = 0

STALE_AFTER_PERIODS = 3
LOST_AFTER_PERIODS = 10
COMMAND_RETRY_S = 10
COMMAND_MAX_ATTEMPTS = 3
BATTERY_WARN_PCT = 20
DEDUP_WINDOW = 64

COMMAND_NAMES = {
    frames.CMD_START_MISSION: "StartMission",
    frames.CMD_ABORT_TO_RECOVERY: "AbortToRecovery",
    frames.CMD_PING: "Ping",
}
COMMAND_CODES = {name: code for code, name in COMMAND_NAMES.items()}


class AssetState(Enum):
    UNDISCOVERED = "undiscovered"
    ONLINE = "online"
    STALE = "stale"
    LOST = "lost"


class Severity(IntEnum):
    INFO = 0
    WARNING = 1
    CRITICAL = 2


class CommandState(Enum):
    AWAITING_ACK = "awaiting_ack"
    ACKED = "acked"
    FAILED = "failed"


class C2Error(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class Notification:
    id: int
    t_ms: int
    severity: Severity
    pinned: bool
    kind: str
    text: str
    vehicle_id: Optional[int] = None
    objective_id: Optional[int] = None

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "t_ms": self.t_ms,
            "severity": self.severity.name.lower(),
            "pinned": self.pinned,
            "kind": self.kind,
            "text": self.text,
            "vehicle_id": self.vehicle_id,
            "objective_id": self.objective_id,
            "params": dict(getattr(self, "params", {}) or {}),
        }


@dataclass
class VehicleRecord:
    id: int
    name: str
    kind: VehicleKind
    cruise_speed_kn: float
    status_period_s: int
    last_status: Optional[frames.Status] = None
    last_contact_ms: Optional[int] = None
    asset_state: AssetState = AssetState.UNDISCOVERED
    position: Optional[GeoPoint] = None
    prev_battery: Optional[int] = None

    def as_dict(self, now_ms: int) -> dict:
        st = self.last_status
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind.value,
            "asset_state": self.asset_state.value,
            "last_contact_ms": self.last_contact_ms,
            "age_s": None
            if self.last_contact_ms is None
            else (now_ms - self.last_contact_ms) // 1000,
            "position": None
            if self.position is None
            else {"lat": self.position.lat, "lon": self.position.lon},
            "battery_pct": st.battery_pct if st else None,
            "speed_kn": round(st.speed_cms / 100.0 / KN_TO_MPS, 2) if st else None,
            "heading_deg": st.heading_cdeg / 100.0 if st else None,
            "depth_m": st.depth_cm / 100.0 if st else None,
            "fault_bits": st.fault_bits if st else 0,
            "objective_id": st.objective_id if st and st.objective_id else None,
            "objective_pct": st.objective_pct if st else 0,
        }


@dataclass
class PendingCommand:
    cmd_seq: int
    cmd_code: int
    vehicle_id: int
    frame_bytes: bytes
    attempts: int
    next_retry_ms: int
    state: CommandState = CommandState.AWAITING_ACK


def asset_state_for(
    last_contact_ms: Optional[int], now_ms: int, period_s: int
) -> AssetState:
    """Pure liveness rule: silent for >3 periods is stale, >10 is lost."""
    if last_contact_ms is None:
        return AssetState.UNDISCOVERED
    gap_ms = now_ms - last_contact_ms
    if gap_ms > LOST_AFTER_PERIODS * period_s * 1000:
        return AssetState.LOST
    if gap_ms > STALE_AFTER_PERIODS * period_s * 1000:
        return AssetState.STALE
    return AssetState.ONLINE


@dataclass
class ExplainResult:
    ok: bool
    text: str
    decision: Optional[AllocationDecision] = None
    error: Optional[str] = None


class MissionDb:
    def __init__(
        self,
        plan: MissionPlan,
        vehicle_specs: list,  # sim.VehicleSpec
        decisions: Optional[list[AllocationDecision]] = None,
        text_renderer: Optional[Callable[[Notification], str]] = None,
    ):
        self.plan = plan
        self.clock_ms = 0
        self.vehicles: dict[int, VehicleRecord] = {}
        for spec in sorted(vehicle_specs, key=lambda s: s.id):
            self.vehicles[spec.id] = VehicleRecord(
                spec.id, spec.name, spec.kind, spec.cruise_speed_kn, spec.status_period_s
            )
        self.objectives: dict[int, Objective] = {o.id: o for o in plan.objectives}
        self.events: list[dict] = []
        self.notifications: list[Notification] = []
        self.updated_notifications: list[Notification] = []
        self.pending_commands: dict[int, PendingCommand] = {}
        self.decisions: list[AllocationDecision] = list(decisions or [])
        self.chat_sessions: dict[str, object] = {}
        self.undecodable = 0
        self._dedup: dict[int, tuple[deque, set]] = {}
        self._next_notification_id = 1
        self._next_cmd_seq = 1
        self._pinned_faults: dict[tuple[int, int], Notification] = {}
        self._pinned_aborts: dict[int, Notification] = {}
        self._pinned_lost: dict[int, Notification] = {}
        if text_renderer is None:
            from .dialogue import notification_to_text  # deferred: avoids import cycle

            text_renderer = notification_to_text
        self._render_text = text_renderer

    # -- notifications -------------------------------------------------------

    def _notify(
        self,
        now_ms: int,
        kind: str,
        severity: Severity,
        pinned: bool = False,
        vehicle_id: Optional[int] = None,
        objective_id: Optional[int] = None,
        **params,
    ) -> Notification:
        n = Notification(
            self._next_notification_id, now_ms, severity, pinned, kind, "",
            vehicle_id, objective_id,
        )
        self._next_notification_id += 1
        n.params = params  # type: ignore[attr-defined]
        n.text = self._render_text(n)
        self.notifications.append(n)
        return n

    def _unpin(self, n: Optional[Notification]) -> None:
        if n is not None and n.pinned:
            n.pinned = False
            self.updated_notifications.append(n)

    # -- ingestion -----------------------------------------------------------

    def ingest_frame(self, frame: frames.AcousticFrame, now_ms: int) -> list[Notification]:
        """Apply one relayed frame; returns any notifications it produced."""
        before = len(self.notifications)
        ring, seen = self._dedup.setdefault(frame.src, (deque(maxlen=DEDUP_WINDOW), set()))
        key = frame.seq
        if key in seen:
            return []
        try:
            msg = frames.decode_payload(frame.msg_type, frame.payload)
        except frames.FrameError:
            self.undecodable += 1
            return []
        if len(ring) == ring.maxlen:
            seen.discard(ring[0])
        ring.append(key)
        seen.add(key)

        record = self._touch_vehicle(frame.src, now_ms)
        if isinstance(msg, frames.Status):
            self._ingest_status(record, msg, now_ms)
        elif isinstance(msg, frames.Event):
            self._ingest_event(record, msg, now_ms)
        elif isinstance(msg, frames.Ack):
            self._ingest_ack(record, msg, now_ms)
        return self.notifications[before:]

    def _touch_vehicle(self, vehicle_id: int, now_ms: int) -> VehicleRecord:
        record = self.vehicles.get(vehicle_id)
        if record is None:
            record = VehicleRecord(
                vehicle_id, f"vehicle {vehicle_id}", VehicleKind.AUV, 2.5, 30
            )
            self.vehicles[vehicle_id] = record
        first_contact = record.last_contact_ms is None
        was_lost = record.asset_state is AssetState.LOST
        record.last_contact_ms = now_ms
        record.asset_state = AssetState.ONLINE
        if first_contact:
            self._notify(now_ms, "discovered", Severity.INFO, vehicle_id=vehicle_id)
        elif was_lost:
            self._unpin(self._pinned_lost.pop(vehicle_id, None))
            self._notify(now_ms, "contact_regained", Severity.INFO, vehicle_id=vehicle_id)
        return record

    def _ingest_status(self, record: VehicleRecord, msg: frames.Status, now_ms: int) -> None:
        record.last_status = msg
        record.position = GeoPoint(msg.lat, msg.lon)
        prev = record.prev_battery
        if (prev is None or prev > BATTERY_WARN_PCT) and msg.battery_pct <= BATTERY_WARN_PCT:
            self._notify(
                now_ms, "battery_low", Severity.WARNING,
                vehicle_id=record.id, battery=msg.battery_pct,
            )
        record.prev_battery = msg.battery_pct

    def _ingest_event(self, record: VehicleRecord, msg: frames.Event, now_ms: int) -> None:
        self.events.append(
            {
                "t_ms": now_ms,
                "vehicle_id": record.id,
                "event_code": msg.event_code,
                "objective_id": msg.objective_id or None,
                "detail": msg.detail,
            }
        )
        obj = self.objectives.get(msg.objective_id)
        if msg.event_code == frames.EVT_OBJ_STARTED and obj:
            obj.state = ObjectiveState.ACTIVE
        elif msg.event_code == frames.EVT_OBJ_COMPLETED:
            if obj:
                obj.state = ObjectiveState.COMPLETE
            self._notify(
                now_ms, "objective_complete", Severity.INFO,
                vehicle_id=record.id, objective_id=msg.objective_id,
            )
        elif msg.event_code == frames.EVT_FAULT_ONSET:
            fault = FAULT_NAMES.get(msg.detail, f"code {msg.detail}")
            n = self._notify(
                now_ms, "fault", Severity.CRITICAL, pinned=True,
                vehicle_id=record.id, fault=fault,
            )
            self._pinned_faults[(record.id, msg.detail)] = n
        elif msg.event_code == frames.EVT_FAULT_CLEARED:
            fault = FAULT_NAMES.get(msg.detail, f"code {msg.detail}")
            self._unpin(self._pinned_faults.pop((record.id, msg.detail), None))
            self._notify(
                now_ms, "fault_cleared", Severity.INFO, vehicle_id=record.id, fault=fault
            )
        elif msg.event_code == frames.EVT_ABORTING:
            n = self._notify(
                now_ms, "aborting", Severity.WARNING, pinned=True, vehicle_id=record.id
            )
            self._pinned_aborts[record.id] = n
        elif msg.event_code == frames.EVT_MISSION_COMPLETE:
            self._notify(now_ms, "mission_complete", Severity.INFO, vehicle_id=record.id)
        elif msg.event_code == frames.EVT_RECOVERED:
            self._unpin(self._pinned_aborts.pop(record.id, None))

    def _ingest_ack(self, record: VehicleRecord, msg: frames.Ack, now_ms: int) -> None:
        pending = self.pending_commands.get(msg.cmd_seq)
        if pending is None:
            return
        if pending.state is CommandState.AWAITING_ACK:
            pending.state = CommandState.ACKED
            self._notify(
                now_ms, "command_acked", Severity.INFO,
                vehicle_id=pending.vehicle_id, cmd_seq=msg.cmd_seq,
                command=COMMAND_NAMES.get(pending.cmd_code, str(pending.cmd_code)),
            )
        else:
            # late ack after Failed: remember it happened, nothing revives
            self.events.append(
                {"t_ms": now_ms, "vehicle_id": record.id, "late_ack": msg.cmd_seq}
            )

    # -- liveness and timers ---------------------------------------------------

    def refresh_asset_states(self, now_ms: int) -> list[Notification]:
        before = len(self.notifications)
        for record in self.vehicles.values():
            new_state = asset_state_for(record.last_contact_ms, now_ms, record.status_period_s)
            if new_state is record.asset_state:
                continue
            if new_state is AssetState.LOST:
                n = self._notify(
                    now_ms, "contact_lost", Severity.WARNING, pinned=True,
                    vehicle_id=record.id,
                )
                self._pinned_lost[record.id] = n
            record.asset_state = new_state
        return self.notifications[before:]

    def tick(self, now_ms: int) -> list[bytes]:
        """Advance the clock: liveness refresh plus command retries.

        Returns frames that must be retransmitted now.
        """
        self.clock_ms = now_ms
        self.refresh_asset_states(now_ms)
        resend: list[bytes] = []
        for pending in self.pending_commands.values():
            if pending.state is not CommandState.AWAITING_ACK:
                continue
            if now_ms < pending.next_retry_ms:
                continue
            if pending.attempts >= COMMAND_MAX_ATTEMPTS:
                pending.state = CommandState.FAILED
                self._notify(
                    now_ms, "command_failed", Severity.CRITICAL,
                    vehicle_id=pending.vehicle_id, cmd_seq=pending.cmd_seq,
                    command=COMMAND_NAMES.get(pending.cmd_code, str(pending.cmd_code)),
                )
            else:
                pending.attempts += 1
                pending.next_retry_ms = now_ms + COMMAND_RETRY_S * 1000
                resend.append(pending.frame_bytes)
        return resend

    # -- commanding -------------------------------------------------------------

    def issue_command(self, vehicle_id: int, cmd_code: int, now_ms: int) -> tuple[bytes, int]:
        if vehicle_id not in self.vehicles:
            raise C2Error("UNKNOWN_VEHICLE", f"vehicle {vehicle_id} not known")
        cmd_seq = self._next_cmd_seq
        self._next_cmd_seq = (self._next_cmd_seq + 1) & 0xFFFF or 1
        _, payload = frames.encode_payload(frames.Command(cmd_code, 0))
        frame_bytes = frames.encode_frame(
            frames.AcousticFrame(C2_ADDRESS, vehicle_id, frames.MSG_COMMAND, cmd_seq, payload)
        )
        self.pending_commands[cmd_seq] = PendingCommand(
            cmd_seq, cmd_code, vehicle_id, frame_bytes,
            attempts=1, next_retry_ms=now_ms + COMMAND_RETRY_S * 1000,
        )
        return frame_bytes, cmd_seq

    def request_status(self, vehicle_id: int, now_ms: int) -> bytes:
        """Fire-and-forget ping; the vehicle answers with an out-of-cycle Status."""
        if vehicle_id not in self.vehicles:
            raise C2Error("UNKNOWN_VEHICLE", f"vehicle {vehicle_id} not known")
        _, payload = frames.encode_payload(frames.Command(frames.CMD_PING, 0))
        return frames.encode_frame(
            frames.AcousticFrame(C2_ADDRESS, vehicle_id, frames.MSG_COMMAND, 0, payload)
        )

    # -- queries -------------------------------------------------------------

    def mission_progress(self) -> dict:
        fractions: dict[int, float] = {}
        for obj in self.plan.objectives:
            if obj.state is ObjectiveState.COMPLETE:
                fractions[obj.id] = 1.0
            elif obj.state is ObjectiveState.ACTIVE:
                fractions[obj.id] = self._active_pct(obj.id) / 100.0
            else:
                fractions[obj.id] = 0.0
        overall = sum(fractions.values()) / len(fractions) if fractions else 0.0
        return {"objectives": fractions, "overall": overall}

    def _active_pct(self, objective_id: int) -> int:
        for record in self.vehicles.values():
            st = record.last_status
            if st is not None and st.objective_id == objective_id:
                return st.objective_pct
        return 0

    def decision_for(self, objective_id: int) -> Optional[AllocationDecision]:
        for decision in reversed(self.decisions):
            if decision.objective_id == objective_id:
                return decision
        return None

    def explain_why(self, vehicle_id: int, objective_id: int) -> ExplainResult:
        decision = self.decision_for(objective_id)
        if decision is None:
            return ExplainResult(False, "", None, "NO_DECISION")
        if decision.chosen_vehicle != vehicle_id:
            return self.explain_why_not(vehicle_id, objective_id)
        reasons = []
        cost_evals = [e for e in decision.trace if e.condition is Condition.MIN_MARGINAL_COST]
        mine = next(e for e in cost_evals if e.vehicle_id == vehicle_id)
        rivals = [e for e in cost_evals if e.vehicle_id != vehicle_id]
        if rivals:
            best_rival = min(e.detail for e in rivals)
            reasons.append(
                f"lowest route cost ({mine.detail:.0f} m vs {best_rival:.0f} m)"
            )
        else:
            reasons.append("only eligible vehicle")
        battery = next(
            e
            for e in decision.trace
            if e.vehicle_id == vehicle_id and e.condition is Condition.BATTERY_ABOVE_RESERVE
        )
        reasons.append(f"battery {battery.detail:.0f}% above the 20% reserve")
        reasons.append("no blocking faults")
        text = f"Vehicle {vehicle_id} was chosen for Objective {objective_id}: " + "; ".join(reasons) + "."
        return ExplainResult(True, text, decision)

    def explain_why_not(self, vehicle_id: int, objective_id: int) -> ExplainResult:
        decision = self.decision_for(objective_id)
        if decision is None:
            return ExplainResult(False, "", None, "NO_DECISION")
        if decision.chosen_vehicle == vehicle_id:
            return ExplainResult(False, "", decision, "VEHICLE_WAS_CHOSEN")
        mine = [e for e in decision.trace if e.vehicle_id == vehicle_id]
        if not mine:
            record = self.vehicles.get(vehicle_id)
            if record is None:
                return ExplainResult(False, "", decision, "UNKNOWN_VEHICLE")
            text = (
                f"Vehicle {vehicle_id} was not considered for Objective {objective_id}: "
                "it is not a survey vehicle."
            )
            return ExplainResult(True, text, decision)
        first_false = next((e for e in mine if not e.value), None)
        if first_false is None:
            return ExplainResult(False, "", decision, "VEHICLE_WAS_CHOSEN")
        if first_false.condition is Condition.NO_BLOCKING_FAULT:
            names = [n for bit, n in FAULT_NAMES.items() if int(first_false.detail or 0) & bit]
            reason = f"it had a blocking fault ({', '.join(names) or 'unknown'})"
        elif first_false.condition is Condition.BATTERY_ABOVE_RESERVE:
            reason = f"its battery was at {first_false.detail:.0f}%, below the 20% reserve"
        else:
            winner = decision.chosen_vehicle
            winner_cost = next(
                e.detail
                for e in decision.trace
                if e.vehicle_id == winner and e.condition is Condition.MIN_MARGINAL_COST
            )
            reason = (
                f"its route cost {first_false.detail:.0f} m exceeded "
                f"Vehicle {winner}'s {winner_cost:.0f} m"
            )
        text = f"Vehicle {vehicle_id} was not chosen for Objective {objective_id}: {reason}."
        return ExplainResult(True, text, decision)

    def current_allocation(self) -> dict[int, int]:
        allocation: dict[int, int] = {}
        for decision in self.decisions:
            if decision.chosen_vehicle is not None:
                allocation[decision.objective_id] = decision.chosen_vehicle
            else:
                allocation.pop(decision.objective_id, None)
        return allocation

    def estimate_eta_s(self, vehicle_id: int) -> Optional[float]:
        """Route time left, reconstructed from the latest Status and the allocation."""
        record = self.vehicles.get(vehicle_id)
        if record is None or record.last_status is None or record.position is None:
            return None
        allocation = self.current_allocation()
        remaining_objs = [
            o
            for o in self.plan.objectives
            if allocation.get(o.id) == vehicle_id and o.state is not ObjectiveState.COMPLETE
        ]
        st = record.last_status
        pos = latlon_to_enu(self.plan.origin, record.position)
        recovery = latlon_to_enu(self.plan.origin, self.plan.recovery)
        distance = 0.0
        if st.objective_id and st.objective_id in self.objectives:
            active = self.objectives[st.objective_id]
            distance += objective_internal_length(active, self.plan.origin) * (
                1.0 - st.objective_pct / 100.0
            )
            pos = objective_waypoints(active, self.plan.origin)[-1]
            remaining_objs = [o for o in remaining_objs if o.id != active.id]
        elif not remaining_objs:
            if st.speed_cms <= 10:
                return None
            # nothing assigned but still moving: the homeward leg remains
            return pos.distance_to(recovery) / (record.cruise_speed_kn * KN_TO_MPS)
        for rp in build_route(pos, remaining_objs, self.plan.origin, recovery):
            distance += pos.distance_to(rp.point)
            pos = rp.point
        return distance / (record.cruise_speed_kn * KN_TO_MPS)
