"""Scenario execution: the lock-step tick pipeline and the JSONL event log.

One logical clock drives everything. Per tick, in fixed order:

  1. poll the channel for frames that finished arriving; route them to
     vehicle inboxes or into the relay's delivery batch
  2. step the vehicle simulation
  3. put AUV emissions on the air; the relay vehicle's own telemetry is
     handed to the relay node directly (its modem is the relay's modem)
  4. relay tick barrier: deliveries fan out to TCP clients
  5. C2 tick barrier: the C2 ingests exactly the expected number of
     envelopes, then runs its timers
  6. scripted operator inputs due now (mission start, transcript chat)
  7. relay flush barrier: client-submitted frames go on the air
  8. the tick's records are sorted and appended to the event log

The barriers are direct calls in all-in-one mode and control-link RPCs in
distributed mode, so both modes execute the identical logical schedule;
only the transport differs. The relay's client-facing TCP protocol is the
real one in both modes (all-in-one runs it over loopback).
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import frames
from .channel import AcousticChannel
from .control import ControlError, MsgChannel, connect_with_retry, pick_free_port
from .relaynode import RelayServer
from .scenario import Scenario
from .service import C2Service, decision_to_dict
from .sim import Mode, VehicleKind, step

RELAY_SNAPSHOT_PERIOD_MS = 30_000
_KIND_RANK = {"tx": 0, "delivery": 1, "drop": 2, "relay": 3, "notification": 4, "chat": 5, "sim": 6}


class RunnerError(RuntimeError):
    pass


@dataclass
class RunResult:
    exit_code: int
    records: list[dict]
    transcript_replies: list[str] = field(default_factory=list)


def _frame_summary(data: bytes) -> dict:
    try:
        f = frames.decode_frame(data)
        return {"src": f.src, "dst": f.dst, "msg_type": f.msg_type, "seq": f.seq}
    except frames.FrameError:
        return {"src": None, "dst": None, "msg_type": None, "seq": None}


class _LocalRelayHandle:
    def __init__(self, server: RelayServer):
        self.server = server

    def tick(self, t_ms, deliveries):
        self.server.tick(t_ms, deliveries)

    def flush(self, t_ms, expected_client_rx):
        return self.server.flush(t_ms, expected_client_rx)

    def client_count(self):
        return self.server.client_count()

    def stop(self):
        self.server.stop()


class _LocalC2Handle:
    def __init__(self, service: C2Service):
        self.service = service

    def tick(self, t_ms, expected_rx, decisions):
        return self.service.tick(t_ms, expected_rx, decisions)

    def chat(self, session, text, t_ms):
        reply = self.service.chat(session, text, t_ms)
        return (
            {"text": reply.text, "intent": reply.intent.name, "ok": reply.ok},
            self.service.submitted_total,
        )

    def command(self, vehicle_id, cmd, t_ms):
        cmd_seq = self.service.command(vehicle_id, cmd, t_ms)
        return cmd_seq, self.service.submitted_total

    def stop(self):
        self.service.close()


class _RemoteRelayHandle:
    def __init__(self, channel: MsgChannel, proc: subprocess.Popen):
        self.channel = channel
        self.proc = proc

    def tick(self, t_ms, deliveries):
        self.channel.request(
            {
                "op": "tick",
                "t_ms": t_ms,
                "deliveries": [
                    {"rx_time_ms": rx, "frame_hex": data.hex()} for rx, data in deliveries
                ],
            }
        )

    def flush(self, t_ms, expected_client_rx):
        reply = self.channel.request(
            {"op": "flush", "t_ms": t_ms, "expected_client_rx": expected_client_rx}
        )
        return [bytes.fromhex(h) for h in reply["tx_frames"]], reply["counters"]

    def client_count(self):
        return self.channel.request({"op": "status"})["clients"]

    def stop(self):
        try:
            self.channel.request({"op": "shutdown"}, timeout=5.0)
        except (ControlError, OSError):
            pass
        self.channel.close()
        _end_process(self.proc)


class _RemoteC2Handle:
    def __init__(self, channel: MsgChannel, proc: subprocess.Popen):
        self.channel = channel
        self.proc = proc

    def tick(self, t_ms, expected_rx, decisions):
        reply = self.channel.request(
            {"op": "tick", "t_ms": t_ms, "expected_rx": expected_rx, "decisions": decisions}
        )
        return reply["submitted_total"], reply["notifications"]

    def chat(self, session, text, t_ms):
        reply = self.channel.request(
            {"op": "chat", "session": session, "text": text, "t_ms": t_ms}
        )
        return reply["reply"], reply["submitted_total"]

    def command(self, vehicle_id, cmd, t_ms):
        reply = self.channel.request(
            {"op": "command", "vehicle_id": vehicle_id, "cmd": cmd, "t_ms": t_ms}
        )
        return reply["cmd_seq"], reply["submitted_total"]

    def stop(self):
        try:
            self.channel.request({"op": "shutdown"}, timeout=5.0)
        except (ControlError, OSError):
            pass
        self.channel.close()
        _end_process(self.proc)


def _end_process(proc: subprocess.Popen) -> None:
    try:
        proc.wait(timeout=5.0)
    except subprocess.TimeoutExpired:
        proc.terminate()
        try:
            proc.wait(timeout=3.0)
        except subprocess.TimeoutExpired:
            proc.kill()


def run_scenario(
    scenario: Scenario,
    mode: str = "all",
    out_path: Optional[Path] = None,
    realtime_factor: float = 0.0,
    run_to_duration: bool = False,
    auto_start: bool = True,
    transcript: Optional[list[tuple[float, str]]] = None,
    service_hook=None,
    relay_listen: Optional[tuple[str, int]] = None,
) -> RunResult:
    """Run to duration or mission completion; returns the full event log.

    service_hook, if given, receives the in-process C2Service right after
    construction (all-in-one only; the serve subcommand attaches HTTP here).
    relay_listen overrides the scenario's relay TCP address (tests bind
    ephemeral ports to avoid collisions).
    """
    if mode not in ("all", "dist"):
        raise RunnerError(f"unknown mode {mode!r}")

    world = scenario.build_world()
    channel = AcousticChannel(scenario.channel, seed=scenario.seed)
    relay_modem_id = scenario.relay.modem_id
    relay_vehicle = next(
        (v for v in world.vehicles.values() if v.spec.kind is VehicleKind.RELAY_USV), None
    )
    for vehicle in world.auvs():
        channel.register(vehicle.spec.id, vehicle.state.pos)
    modem_pos = relay_vehicle.state.pos if relay_vehicle else world.shore_enu
    channel.register(relay_modem_id, modem_pos)

    relay_handle, c2_handle, cleanup = _build_components(
        scenario, mode, service_hook, relay_listen
    )
    try:
        return _run_loop(
            scenario, world, channel, relay_handle, c2_handle,
            relay_modem_id, relay_vehicle,
            out_path=out_path,
            realtime_factor=realtime_factor,
            run_to_duration=run_to_duration,
            auto_start=auto_start,
            transcript=transcript,
        )
    finally:
        cleanup()


def _build_components(scenario: Scenario, mode: str, service_hook, relay_listen):
    listen = relay_listen if relay_listen is not None else scenario.relay.listen_tuple()
    if mode == "all":
        relay_server = RelayServer(listen, modem_id=scenario.relay.modem_id)
        try:
            relay_server.start()
        except OSError as exc:
            raise RunnerError(f"relay cannot bind {listen}: {exc}") from exc
        service = C2Service(scenario)
        if service_hook is not None:
            service_hook(service)
        service.connect(relay_server.listen_addr)
        relay_handle = _LocalRelayHandle(relay_server)
        c2_handle = _LocalC2Handle(service)
        deadline = time.monotonic() + 5.0
        while relay_server.client_count() < 1:
            if time.monotonic() > deadline:
                raise RunnerError("C2 never connected to the relay")
            time.sleep(0.005)

        def cleanup():
            c2_handle.stop()
            relay_handle.stop()

        return relay_handle, c2_handle, cleanup

    if scenario.source_path is None:
        raise RunnerError("distributed mode needs a scenario file on disk")
    host = "127.0.0.1"
    if relay_listen is not None:
        relay_host, relay_port = relay_listen
        if relay_port == 0:
            relay_port = pick_free_port(relay_host)
    else:
        relay_host, relay_port = listen
    relay_ctl_port = pick_free_port(host)
    c2_ctl_port = pick_free_port(host)
    relay_proc = subprocess.Popen(
        [
            sys.executable, "-m", "auvc2", "relay",
            "--listen", f"{relay_host}:{relay_port}",
            "--control", f"{host}:{relay_ctl_port}",
        ],
    )
    c2_proc = subprocess.Popen(
        [
            sys.executable, "-m", "auvc2", "c2",
            "--scenario", scenario.source_path,
            "--relay", f"{relay_host}:{relay_port}",
            "--control", f"{host}:{c2_ctl_port}",
        ],
    )
    try:
        relay_channel = connect_with_retry((host, relay_ctl_port), timeout_s=15.0)
        c2_channel = connect_with_retry((host, c2_ctl_port), timeout_s=15.0)
        relay_handle = _RemoteRelayHandle(relay_channel, relay_proc)
        c2_handle = _RemoteC2Handle(c2_channel, c2_proc)
        deadline = time.monotonic() + 15.0
        while relay_handle.client_count() < 1:
            if time.monotonic() > deadline:
                raise RunnerError("C2 process never connected to the relay process")
            time.sleep(0.02)
    except Exception:
        _end_process(relay_proc)
        _end_process(c2_proc)
        raise

    def cleanup():
        c2_handle.stop()
        relay_handle.stop()

    return relay_handle, c2_handle, cleanup


def _run_loop(
    scenario, world, channel, relay, c2, relay_modem_id, relay_vehicle,
    out_path, realtime_factor, run_to_duration, auto_start, transcript,
):
    tick_ms = scenario.tick_ms
    duration_ms = int(scenario.duration_s * 1000)
    records: list[dict] = []
    replies: list[str] = []
    writer = open(out_path, "w", encoding="utf-8") if out_path else None

    script: list[dict] = []
    if auto_start:
        for vid in sorted(world.vehicles):
            vehicle = world.vehicles[vid]
            if vehicle.spec.kind is VehicleKind.AUV and any(
                owner == vid for owner in world.allocation.values()
            ):
                script.append({"t_ms": 0, "kind": "command", "vehicle_id": vid,
                               "cmd": "StartMission"})
    for t_s, text in transcript or []:
        script.append({"t_ms": int(t_s * 1000), "kind": "chat", "text": text})
    script.sort(key=lambda item: item["t_ms"])
    script_idx = 0

    expected_rx_total = 0
    decisions_synced = len(world.decisions)
    wall_start = time.monotonic()
    t = 0

    try:
        while t < duration_ms:
            t += tick_ms
            batch: list[dict] = []

            # 1. deliveries due by t
            relay_deliveries: list[tuple[int, bytes]] = []
            for d in channel.poll_deliveries(t):
                summary = _frame_summary(d.data)
                batch.append(
                    {
                        "t_ms": d.arrival_end_ms, "kind": "delivery",
                        "endpoint": d.receiver_id, **summary,
                        "arrival_start_ms": d.arrival_start_ms, "tx_start_ms": d.tx_start_ms,
                    }
                )
                if d.receiver_id == relay_modem_id:
                    relay_deliveries.append((t, d.data))
                elif d.receiver_id in world.vehicles:
                    try:
                        world.deliver(d.receiver_id, frames.decode_frame(d.data))
                    except frames.FrameError:
                        pass
            for drop in channel.drain_drops():
                batch.append(
                    {
                        "t_ms": drop.t_ms, "kind": "drop", "endpoint": drop.receiver_id,
                        "cause": drop.cause, **_frame_summary(drop.data),
                    }
                )

            # 2. step the world
            events, emissions = step(world, tick_ms)
            for event in events:
                batch.append(
                    {
                        "t_ms": event.t_ms, "kind": "sim", "event": event.kind.value,
                        "vehicle_id": event.vehicle_id, "objective_id": event.objective_id,
                        "detail": event.detail,
                    }
                )
            new_decisions = [decision_to_dict(d) for d in world.decisions[decisions_synced:]]
            decisions_synced = len(world.decisions)

            # 3. route emissions, refresh endpoint positions
            for vid, frame in emissions:
                raw = frames.encode_frame(frame)
                vehicle = world.vehicles[vid]
                if vehicle.spec.kind is VehicleKind.AUV:
                    rec = channel.transmit(raw, vid, t)
                    batch.append(
                        {
                            "t_ms": t, "kind": "tx", "endpoint": vid,
                            **_frame_summary(raw), "tx_start_ms": rec.tx_start_ms,
                            "tx_end_ms": rec.tx_end_ms, "bytes": len(raw),
                        }
                    )
                else:
                    relay_deliveries.append((t, raw))
            for vehicle in world.auvs():
                channel.set_position(vehicle.spec.id, vehicle.state.pos)
            if relay_vehicle is not None:
                channel.set_position(relay_modem_id, relay_vehicle.state.pos)

            # 4./5. barriers: relay fan-out, then C2 ingestion and timers
            relay.tick(t, relay_deliveries)
            expected_rx_total += len(relay_deliveries)
            submitted_total, notifications = c2.tick(t, expected_rx_total, new_decisions)
            for n in notifications:
                batch.append(
                    {
                        "t_ms": n["t_ms"], "kind": "notification",
                        "notification_id": n["id"], "notification_kind": n["kind"],
                        "severity": n["severity"], "pinned": n["pinned"],
                        "text": n["text"], "vehicle_id": n["vehicle_id"],
                        "objective_id": n["objective_id"], "update": n["update"],
                    }
                )

            # 6. scripted operator inputs
            while script_idx < len(script) and script[script_idx]["t_ms"] <= t:
                item = script[script_idx]
                script_idx += 1
                if item["kind"] == "command":
                    _, submitted_total = c2.command(item["vehicle_id"], item["cmd"], t)
                else:
                    reply, submitted_total = c2.chat("op", item["text"], t)
                    replies.append(reply["text"])
                    batch.append(
                        {
                            "t_ms": t, "kind": "chat", "session": "op",
                            "text": item["text"], "reply": reply["text"], "ok": reply["ok"],
                        }
                    )

            # 7. client frames go on the air
            tx_frames, counters = relay.flush(t, submitted_total)
            for raw in tx_frames:
                rec = channel.transmit(raw, relay_modem_id, t)
                batch.append(
                    {
                        "t_ms": t, "kind": "tx", "endpoint": relay_modem_id,
                        **_frame_summary(raw), "tx_start_ms": rec.tx_start_ms,
                        "tx_end_ms": rec.tx_end_ms, "bytes": len(raw),
                    }
                )

            finished = world.mission_complete_fired and all(
                v.state.mode in (Mode.RECOVERED, Mode.IDLE) for v in world.auvs()
            )
            if t % RELAY_SNAPSHOT_PERIOD_MS == 0 or finished or t >= duration_ms:
                batch.append({"t_ms": t, "kind": "relay", **counters})

            # 8. write the tick's records in a stable order
            batch.sort(key=lambda r: (r["t_ms"], _KIND_RANK[r["kind"]]))
            for record in batch:
                records.append(record)
                if writer:
                    writer.write(json.dumps(record, separators=(",", ":")) + "\n")

            if finished and not run_to_duration:
                break
            if realtime_factor > 0:
                target = wall_start + (t / 1000.0) / realtime_factor
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
    finally:
        if writer:
            writer.close()
    return RunResult(0, records, replies)


def load_transcript(path: Path, duration_s: float) -> list[tuple[float, str]]:
    """Utterance file: JSONL of {"t_s": ..., "text": ...}, sorted by t_s."""
    entries: list[tuple[float, str]] = []
    last_t = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            t_s, text = float(obj["t_s"]), str(obj["text"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise RunnerError(f"line {lineno}: malformed utterance: {exc}") from exc
        if last_t is not None and t_s < last_t:
            raise RunnerError(f"line {lineno}: utterances must be sorted by t_s")
        if t_s > duration_s:
            raise RunnerError(
                f"line {lineno}: t_s {t_s} beyond scenario duration {duration_s}"
            )
        last_t = t_s
        entries.append((t_s, text))
    return entries


def run_transcript(
    scenario: Scenario,
    utterance_path: Path,
    out_path: Optional[Path],
    mode: str = "all",
    relay_listen: Optional[tuple[str, int]] = None,
) -> RunResult:
    transcript = load_transcript(utterance_path, scenario.duration_s)
    result = run_scenario(
        scenario, mode=mode, run_to_duration=True, transcript=transcript,
        relay_listen=relay_listen,
    )
    if out_path is not None:
        Path(out_path).write_text(
            "".join(reply + "\n" for reply in result.transcript_replies), encoding="utf-8"
        )
    return result
