"""C2 service: the mission database behind a relay connection.

One writer lock serializes every database mutation; the tick barrier
ingests exactly the expected number of relayed envelopes before the
logical clock advances, which is what makes a scripted run replay
byte-for-byte. Read-only HTTP snapshots take the same lock briefly.
"""

from __future__ import annotations

import queue
import socket
import threading
import time
from typing import Optional

from . import dialogue, frames
from .allocation import (
    AllocationDecision,
    Candidate,
    Condition,
    ConditionEval,
    allocate_objectives,
    compute_rehearsal_track,
)
from .c2 import COMMAND_CODES, MissionDb
from .geo import GeoPoint, latlon_to_enu
from .mission import SurveyTask, area_corners_enu
from .relaynode import make_envelope, parse_envelope, stream_decode, stream_encode
from .scenario import Scenario
from .sim import VehicleKind


def initial_decisions(scenario: Scenario):
    """Recompute the launch-time allocation exactly as the autonomy side does."""
    plan = scenario.build_plan()
    candidates = []
    for data in scenario.vehicle_data:
        if data["kind"] != "auv":
            continue
        start = latlon_to_enu(plan.origin, GeoPoint(data["start"]["lat"], data["start"]["lon"]))
        candidates.append(Candidate(data["id"], 0, 100.0, start))
    assignment, decisions = allocate_objectives(plan, candidates, 0.0)
    return assignment, decisions


def decision_to_dict(d: AllocationDecision) -> dict:
    return {
        "objective_id": d.objective_id,
        "chosen_vehicle": d.chosen_vehicle,
        "decided_at_s": d.decided_at_s,
        "trace": [
            {
                "vehicle_id": e.vehicle_id,
                "condition": e.condition.value,
                "value": e.value,
                "detail": e.detail,
            }
            for e in d.trace
        ],
    }


def decision_from_dict(data: dict) -> AllocationDecision:
    return AllocationDecision(
        data["objective_id"],
        data["chosen_vehicle"],
        [
            ConditionEval(e["vehicle_id"], Condition(e["condition"]), e["value"], e["detail"])
            for e in data["trace"]
        ],
        data["decided_at_s"],
    )


class C2Service:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        plan = scenario.build_plan()
        _, decisions = initial_decisions(scenario)
        self.db = MissionDb(plan, scenario.vehicle_specs(), decisions=decisions)
        self.lock = threading.RLock()
        self.submitted_total = 0
        self._sock: Optional[socket.socket] = None
        self._rx_queue: "queue.Queue[Optional[str]]" = queue.Queue()
        self._reader: Optional[threading.Thread] = None
        self._consumed_rx = 0
        self._notified_idx = 0  # high-water mark for the event log
        self._published_idx = 0  # high-water mark for SSE subscribers
        self._subscribers: list[queue.Queue] = []
        self._dirty_vehicles: set[int] = set()

    # -- relay data plane ------------------------------------------------------

    def connect(self, relay_addr: tuple[str, int], retry_timeout_s: float = 15.0) -> None:
        deadline = time.monotonic() + retry_timeout_s
        last_error: Optional[Exception] = None
        while True:
            try:
                self._sock = socket.create_connection(relay_addr, timeout=2.0)
                break
            except OSError as exc:
                last_error = exc
                if time.monotonic() > deadline:
                    raise ConnectionError(f"relay at {relay_addr} unreachable: {exc}") from exc
                time.sleep(0.05)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def close(self) -> None:
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass
        self._rx_queue.put(None)

    def _read_loop(self) -> None:
        buffer = b""
        assert self._sock is not None
        while True:
            try:
                chunk = self._sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            buffer += chunk
            messages, buffer = stream_decode(buffer)
            for text in messages:
                self._rx_queue.put(text)
        self._rx_queue.put(None)

    def _send_frame(self, frame_bytes: bytes) -> None:
        if self._sock is None:
            return
        self._sock.sendall(stream_encode(make_envelope(frame_bytes, 0)))
        self.submitted_total += 1

    # -- barrier tick ----------------------------------------------------------

    def tick(
        self, t_ms: int, expected_rx: int, new_decisions: Optional[list[dict]] = None
    ) -> tuple[int, list[dict]]:
        """Ingest everything due by t, run timers; returns (submitted, notifications)."""
        while self._consumed_rx < expected_rx:
            text = self._rx_queue.get(timeout=15.0)
            if text is None:
                raise RuntimeError("relay connection lost during tick")
            self._consumed_rx += 1
            self._ingest_envelope(text)
        with self.lock:
            for data in new_decisions or []:
                self.db.decisions.append(decision_from_dict(data))
            for frame_bytes in self.db.tick(t_ms):
                self._send_frame(frame_bytes)
            notifications = self._drain_notifications()
            self._push_vehicle_events(t_ms)
        return self.submitted_total, notifications

    def _ingest_envelope(self, text: str) -> None:
        try:
            frame_bytes, rx_time_ms = parse_envelope(text)
            frame = frames.decode_frame(frame_bytes)
        except Exception:
            return  # relay already filters; a broken envelope is just dropped
        with self.lock:
            self.db.ingest_frame(frame, rx_time_ms)
            self._dirty_vehicles.add(frame.src)

    def _publish_new(self) -> None:
        for n in self.db.notifications[self._published_idx:]:
            self._publish("notification", {**n.as_dict(), "update": False})
        self._published_idx = len(self.db.notifications)

    def _drain_notifications(self) -> list[dict]:
        """New and updated notifications since the last log drain."""
        self._publish_new()
        out = [
            {**n.as_dict(), "update": False}
            for n in self.db.notifications[self._notified_idx:]
        ]
        self._notified_idx = len(self.db.notifications)
        for n in self.db.updated_notifications:
            # stamped at the moment of the update (unpin), not at first emission
            event = {**n.as_dict(), "t_ms": self.db.clock_ms, "update": True}
            out.append(event)
            self._publish("notification", event)
        self.db.updated_notifications.clear()
        return out

    def _push_vehicle_events(self, now_ms: int) -> None:
        for vid in sorted(self._dirty_vehicles):
            record = self.db.vehicles.get(vid)
            if record is not None:
                self._publish("vehicle", record.as_dict(now_ms))
        self._dirty_vehicles.clear()

    # -- operator surface --------------------------------------------------------

    def chat(self, session: str, text: str, now_ms: Optional[int] = None) -> dialogue.Reply:
        with self.lock:
            t = self.db.clock_ms if now_ms is None else now_ms
            reply = dialogue.handle(session, text, self.db, t)
            for frame_bytes in getattr(reply, "outbound", []):
                self._send_frame(frame_bytes)
            self._publish_new()
        return reply

    def command(self, vehicle_id: int, cmd_name: str, now_ms: Optional[int] = None) -> int:
        code = COMMAND_CODES.get(cmd_name)
        if code is None:
            raise ValueError(f"unknown command {cmd_name!r}")
        with self.lock:
            t = self.db.clock_ms if now_ms is None else now_ms
            frame_bytes, cmd_seq = self.db.issue_command(vehicle_id, code, t)
            self._send_frame(frame_bytes)
        return cmd_seq

    # -- read-only views -----------------------------------------------------------

    def vehicles_view(self) -> list[dict]:
        with self.lock:
            now = self.db.clock_ms
            out = []
            for record in sorted(self.db.vehicles.values(), key=lambda r: r.id):
                view = record.as_dict(now)
                if record.position is not None:
                    enu = latlon_to_enu(self.db.plan.origin, record.position)
                    view["position_enu"] = {"x": enu.x, "y": enu.y}
                else:
                    view["position_enu"] = None
                out.append(view)
            return out

    def mission_view(self) -> dict:
        with self.lock:
            plan = self.db.plan
            origin = plan.origin
            to_enu = lambda p: latlon_to_enu(origin, p)
            objectives = []
            for obj in plan.objectives:
                entry: dict = {
                    "id": obj.id,
                    "name": obj.name,
                    "state": obj.state.value,
                }
                if isinstance(obj.kind, SurveyTask):
                    entry["kind"] = "survey"
                    entry["area_enu"] = [
                        {"x": p.x, "y": p.y}
                        for p in area_corners_enu(obj.kind.area, origin)
                    ]
                else:
                    target = to_enu(obj.kind.target)
                    entry["kind"] = "reacquire"
                    entry["target_enu"] = {"x": target.x, "y": target.y}
                objectives.append(entry)
            tracks = {}
            allocation = self.db.current_allocation()
            for record in self.db.vehicles.values():
                if record.kind is not VehicleKind.AUV:
                    continue
                if not any(v == record.id for v in allocation.values()):
                    continue
                track = compute_rehearsal_track(plan, allocation, record.id)
                tracks[str(record.id)] = [{"x": p.x, "y": p.y} for p in track.waypoints]
            launch, recovery, shore = to_enu(plan.launch), to_enu(plan.recovery), to_enu(plan.shore_station)
            return {
                "origin": {"lat": origin.lat, "lon": origin.lon},
                "launch_enu": {"x": launch.x, "y": launch.y},
                "recovery_enu": {"x": recovery.x, "y": recovery.y},
                "shore_enu": {"x": shore.x, "y": shore.y},
                "objectives": objectives,
                "rehearsal_tracks": tracks,
                "progress": self.db.mission_progress(),
                "clock_ms": self.db.clock_ms,
            }

    def notifications_view(self, pinned_only: bool = False) -> list[dict]:
        with self.lock:
            items = self.db.notifications
            if pinned_only:
                items = [n for n in items if n.pinned]
            return [n.as_dict() for n in items]

    # -- server-sent events -----------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=1000)
        with self.lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, event: str, data: dict) -> None:
        for q in list(self._subscribers):
            try:
                q.put_nowait((event, data))
            except queue.Full:
                self.unsubscribe(q)
