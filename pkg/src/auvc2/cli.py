"""Command-line entry points.

Subcommands:
  run         execute a scenario (all-in-one or distributed), write the event log
  transcript  run a scenario while injecting timed chat utterances; write replies
  relay       stand-alone relay node (distributed mode worker)
  c2          stand-alone C2 service (distributed mode worker)
  serve       all-in-one live run with the HTTP API and console assets

Exit codes: 0 ok, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .control import ControlServer
from .runner import RunnerError, load_transcript, run_scenario
from .scenario import ScenarioError, parse_scenario


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"{text!r} is not host:port")
    return host, int(port)


def _load_scenario(path: str, seed_override):
    scenario = parse_scenario(path)
    if seed_override is not None:
        scenario.seed = seed_override
    return scenario


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="auvc2", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario to completion")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", type=Path, default=None, help="event log path (JSONL)")
    run_p.add_argument("--mode", choices=["all", "dist"], default="all")
    run_p.add_argument("--realtime-factor", type=float, default=0.0,
                       help="1 = real time, 2 = twice as fast, 0 = unthrottled")
    run_p.add_argument("--run-to-duration", action="store_true",
                       help="keep going after mission completion")
    run_p.add_argument("--no-auto-start", action="store_true",
                       help="do not issue StartMission from C2 at t=0")

    tr_p = sub.add_parser("transcript", help="batch chat against a running scenario")
    tr_p.add_argument("--scenario", required=True)
    tr_p.add_argument("--utterances", required=True, type=Path,
                      help='JSONL lines of {"t_s": ..., "text": ...}')
    tr_p.add_argument("--out", type=Path, default=None, help="reply file (one line each)")
    tr_p.add_argument("--seed", type=int, default=None)
    tr_p.add_argument("--mode", choices=["all", "dist"], default="all")

    relay_p = sub.add_parser("relay", help="stand-alone relay node")
    relay_p.add_argument("--listen", type=_addr, default=("127.0.0.1", 40400))
    relay_p.add_argument("--control", type=_addr, required=True)

    c2_p = sub.add_parser("c2", help="stand-alone C2 service")
    c2_p.add_argument("--scenario", required=True)
    c2_p.add_argument("--relay", type=_addr, required=True)
    c2_p.add_argument("--control", type=_addr, required=True)
    c2_p.add_argument("--listen", type=_addr, default=None, help="optional HTTP API address")

    serve_p = sub.add_parser("serve", help="live all-in-one run with HTTP API + console")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--seed", type=int, default=None)
    serve_p.add_argument("--listen", type=_addr, default=("127.0.0.1", 8080))
    serve_p.add_argument("--assets", type=Path, default=None,
                         help="static console directory (e.g. frontend/)")
    serve_p.add_argument("--realtime-factor", type=float, default=1.0)
    serve_p.add_argument("--auto-start", action="store_true",
                         help="issue StartMission at t=0 instead of waiting for the console")
    serve_p.add_argument("--out", type=Path, default=None)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        for error in exc.errors:
            print(f"scenario error: {error}", file=sys.stderr)
        return 2
    except RunnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


def _dispatch(args) -> int:
    if args.command == "run":
        scenario = _load_scenario(args.scenario, args.seed)
        result = run_scenario(
            scenario,
            mode=args.mode,
            out_path=args.out,
            realtime_factor=args.realtime_factor,
            run_to_duration=args.run_to_duration,
            auto_start=not args.no_auto_start,
        )
        return result.exit_code

    if args.command == "transcript":
        scenario = _load_scenario(args.scenario, args.seed)
        try:
            transcript = load_transcript(args.utterances, scenario.duration_s)
        except RunnerError as exc:
            print(f"transcript error: {exc}", file=sys.stderr)
            return 2
        result = run_scenario(
            scenario, mode=args.mode, run_to_duration=True, transcript=transcript
        )
        if args.out is not None:
            args.out.write_text(
                "".join(reply + "\n" for reply in result.transcript_replies),
                encoding="utf-8",
            )
        return result.exit_code

    if args.command == "relay":
        return _run_relay_worker(args)
    if args.command == "c2":
        return _run_c2_worker(args)
    if args.command == "serve":
        return _run_serve(args)
    return 2


def _run_relay_worker(args) -> int:
    from .relaynode import RelayServer

    try:
        server = RelayServer(args.listen)
        server.start()
    except OSError as exc:
        print(f"relay: cannot bind {args.listen}: {exc}", file=sys.stderr)
        return 1

    def handle(request: dict):
        op = request.get("op")
        if op == "status":
            return {"clients": server.client_count(), "counters": server.counters()}
        if op == "tick":
            deliveries = [
                (d["rx_time_ms"], bytes.fromhex(d["frame_hex"]))
                for d in request["deliveries"]
            ]
            server.tick(request["t_ms"], deliveries)
            return {"ok": True}
        if op == "flush":
            tx_frames, counters = server.flush(
                request["t_ms"], request["expected_client_rx"]
            )
            return {"tx_frames": [f.hex() for f in tx_frames], "counters": counters}
        if op == "shutdown":
            return {"ok": True}
        return {"error": f"unknown op {op!r}"}

    control = ControlServer(args.control, handle)
    control.serve_forever()
    server.stop()
    return 0


def _run_c2_worker(args) -> int:
    from .api import C2ApiServer
    from .service import C2Service

    scenario = parse_scenario(args.scenario)
    service = C2Service(scenario)
    try:
        service.connect(args.relay)
    except ConnectionError as exc:
        print(f"c2: {exc}", file=sys.stderr)
        return 1
    api = None
    if args.listen is not None:
        api = C2ApiServer(service, args.listen)
        api.start_background()

    def handle(request: dict):
        op = request.get("op")
        if op == "tick":
            submitted, notifications = service.tick(
                request["t_ms"], request["expected_rx"], request.get("decisions", [])
            )
            return {"submitted_total": submitted, "notifications": notifications}
        if op == "chat":
            reply = service.chat(request["session"], request["text"], request["t_ms"])
            return {
                "reply": {"text": reply.text, "intent": reply.intent.name, "ok": reply.ok},
                "submitted_total": service.submitted_total,
            }
        if op == "command":
            cmd_seq = service.command(request["vehicle_id"], request["cmd"], request["t_ms"])
            return {"cmd_seq": cmd_seq, "submitted_total": service.submitted_total}
        if op == "shutdown":
            return {"ok": True}
        return {"error": f"unknown op {op!r}"}

    control = ControlServer(args.control, handle)
    control.serve_forever()
    if api:
        api.stop()
    service.close()
    return 0


def _run_serve(args) -> int:
    from .api import C2ApiServer

    scenario = _load_scenario(args.scenario, args.seed)
    api_box: list[C2ApiServer] = []

    def attach_http(service) -> None:
        api = C2ApiServer(service, args.listen, assets_dir=args.assets)
        api.start_background()
        api_box.append(api)
        print(f"C2 console at http://{api.listen_addr[0]}:{api.listen_addr[1]}/")

    try:
        result = run_scenario(
            scenario,
            mode="all",
            out_path=args.out,
            realtime_factor=args.realtime_factor,
            run_to_duration=True,
            auto_start=args.auto_start,
            service_hook=attach_http,
        )
    finally:
        for api in api_box:
            api.stop()
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
