"""End-to-end exercise of the API sequence the operator console performs.

Drives a live (throttled) mission exactly the way the browser client does:
snapshot fetches, the SSE stream, a StartMission command, then watches the
vehicle move, a pinned fault warning arrive, and the command ack resolve.
"""

import json
import threading
import time
from pathlib import Path

import httpx
import pytest

from auvc2.api import C2ApiServer
from auvc2.runner import run_scenario
from auvc2.scenario import parse_scenario

FAULTY_SCENARIO = {
    "seed": 0,
    "tick_ms": 500,
    "duration_s": 240,
    "plan": {
        "origin": {"lat": 56.45, "lon": -5.44},
        "launch": {"lat": 56.45, "lon": -5.435123743910398},
        "recovery": {"lat": 56.4500898311175, "lon": -5.434798660171091},
        "shore_station": {"lat": 56.45, "lon": -5.44},
        "objectives": [
            {
                "id": 1,
                "name": "mark alpha",
                "kind": "reacquire",
                "target": {"lat": 56.450538986705, "lon": -5.433823408953171},
            }
        ],
    },
    "vehicles": [
        {"id": 1, "name": "iver-1", "kind": "auv",
         "start": {"lat": 56.45, "lon": -5.435123743910398}},
        {"id": 2, "name": "skua", "kind": "relay_usv",
         "start": {"lat": 56.45, "lon": -5.437561871955199},
         "cruise_speed_kn": 4.0, "max_speed_kn": 6.0},
    ],
    "relay": {"modem_id": 10, "tcp_listen": "127.0.0.1:40400", "rf_range_m": 2000.0},
    "fault_schedule": [
        {"t_s": 30.0, "vehicle_id": 1, "fault": "SENSOR", "action": "set"}
    ],
}


class StreamCollector:
    """Background SSE reader mirroring the console's EventSource usage."""

    def __init__(self, base: str):
        self.events: list[tuple[str, dict]] = []
        self.lock = threading.Lock()
        self._stop = threading.Event()
        self.thread = threading.Thread(target=self._run, args=(base,), daemon=True)
        self.thread.start()

    def _run(self, base: str):
        try:
            with httpx.stream("GET", f"{base}/api/stream", timeout=60) as response:
                current_event = None
                for line in response.iter_lines():
                    if self._stop.is_set():
                        return
                    if line.startswith("event:"):
                        current_event = line.split(":", 1)[1].strip()
                    elif line.startswith("data:") and current_event:
                        with self.lock:
                            self.events.append(
                                (current_event, json.loads(line.split(":", 1)[1]))
                            )
                        current_event = None
        except (httpx.HTTPError, OSError):
            pass

    def wait_for(self, predicate, timeout=20.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self.lock:
                for event, data in self.events:
                    if predicate(event, data):
                        return data
            time.sleep(0.05)
        return None

    def stop(self):
        self._stop.set()


@pytest.fixture(scope="module")
def console_session():
    scenario = parse_scenario(FAULTY_SCENARIO)
    box = {}
    ready = threading.Event()

    def hook(service):
        api = C2ApiServer(service, ("127.0.0.1", 0))
        api.start_background()
        box["api"] = api
        ready.set()

    def run():
        run_scenario(
            scenario, mode="all", realtime_factor=40.0, run_to_duration=True,
            auto_start=False, service_hook=hook, relay_listen=("127.0.0.1", 0),
        )

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    assert ready.wait(timeout=10)
    base = f"http://127.0.0.1:{box['api'].listen_addr[1]}"
    collector = StreamCollector(base)
    time.sleep(0.3)
    yield base, collector
    collector.stop()
    box["api"].stop()
    thread.join(timeout=30)


def test_console_drives_a_mission(console_session):
    base, stream = console_session

    # initial snapshot the console renders from
    mission = httpx.get(f"{base}/api/mission", timeout=5).json()
    assert mission["objectives"][0]["target_enu"]
    assert "launch_enu" in mission and "shore_enu" in mission
    vehicles = httpx.get(f"{base}/api/vehicles", timeout=5).json()
    assert {v["id"] for v in vehicles} == {1, 2}

    # start button: POST the command, then the ack notification resolves it
    cmd_seq = httpx.post(
        f"{base}/api/command", json={"vehicle_id": 1, "cmd": "StartMission"}, timeout=5
    ).json()["cmd_seq"]
    acked = stream.wait_for(
        lambda e, d: e == "notification"
        and d.get("kind") == "command_acked"
        and d.get("params", {}).get("cmd_seq") == cmd_seq
    )
    assert acked is not None, "StartMission was never acknowledged"

    # the vehicle visibly moves: two successive stream positions differ
    def first_pos(e, d):
        return e == "vehicle" and d.get("id") == 1 and d.get("position") is not None

    first = stream.wait_for(first_pos)
    assert first is not None

    def moved(e, d):
        return (
            e == "vehicle"
            and d.get("id") == 1
            and d.get("position") is not None
            and d["position"] != first["position"]
        )

    assert stream.wait_for(moved) is not None, "AUV never moved on the stream"

    # the scheduled sensor fault arrives as a pinned warning
    fault = stream.wait_for(
        lambda e, d: e == "notification" and d.get("kind") == "fault" and d.get("pinned")
    )
    assert fault is not None and "sensor" in fault["text"]
    pinned = httpx.get(f"{base}/api/notifications?pinned=true", timeout=5).json()
    assert any(n["kind"] == "fault" for n in pinned)

    # chat round-trip shows up like a reply bubble would
    reply = httpx.post(
        f"{base}/api/chat", json={"session": "console", "text": "status of vehicle one"},
        timeout=5,
    ).json()
    assert reply["ok"] and reply["reply_text"].startswith("Vehicle 1 is")

    # abort button: dispatched and acknowledged as well
    abort_seq = httpx.post(
        f"{base}/api/command", json={"vehicle_id": 1, "cmd": "AbortToRecovery"}, timeout=5
    ).json()["cmd_seq"]
    abort_acked = stream.wait_for(
        lambda e, d: e == "notification"
        and d.get("kind") == "command_acked"
        and d.get("params", {}).get("cmd_seq") == abort_seq
    )
    assert abort_acked is not None
    aborting = stream.wait_for(
        lambda e, d: e == "notification" and d.get("kind") == "aborting" and d.get("pinned")
    )
    assert aborting is not None
