"""HTTP surface of the C2 service, stdlib only.

GET  /api/vehicles        vehicle record views
GET  /api/mission         plan geometry, allocation tracks, progress
GET  /api/notifications   full log; ?pinned=true filters
POST /api/chat            {"session": ..., "text": ...}
POST /api/command         {"vehicle_id": ..., "cmd": "StartMission"|"AbortToRecovery"|"Ping"}
GET  /api/stream          server-sent events: notification, vehicle, chat
Anything else is served from the static assets directory (the console).
"""

from __future__ import annotations

import json
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .c2 import C2Error
from .service import C2Service

SSE_HEARTBEAT_S = 10.0


class C2ApiServer:
    def __init__(
        self,
        service: C2Service,
        listen_addr: tuple[str, int],
        assets_dir: Optional[Path] = None,
    ):
        self.service = service
        self.assets_dir = Path(assets_dir).resolve() if assets_dir else None
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer(listen_addr, handler)
        self.httpd.daemon_threads = True
        self.listen_addr = self.httpd.server_address
        self._thread: Optional[threading.Thread] = None

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


def _make_handler(server: C2ApiServer):
    service = server.service

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, obj, status=200):
            body = json.dumps(obj).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self):
            length = int(self.headers.get("Content-Length", "0"))
            if length <= 0 or length > 1_000_000:
                return None
            try:
                return json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                return None

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/api/vehicles":
                self._send_json(service.vehicles_view())
            elif url.path == "/api/mission":
                self._send_json(service.mission_view())
            elif url.path == "/api/notifications":
                pinned = parse_qs(url.query).get("pinned", ["false"])[0] == "true"
                self._send_json(service.notifications_view(pinned_only=pinned))
            elif url.path == "/api/stream":
                self._serve_stream()
            else:
                self._serve_static(url.path)

        def do_POST(self):
            url = urlparse(self.path)
            body = self._read_json()
            if url.path == "/api/chat":
                if not isinstance(body, dict) or "text" not in body:
                    self._send_json({"error": "expected {session, text}"}, 400)
                    return
                session = str(body.get("session", "default"))
                reply = service.chat(session, str(body["text"]))
                self._send_json(
                    {
                        "reply_text": reply.text,
                        "intent_name": reply.intent.name,
                        "ok": reply.ok,
                        "slots": {
                            "vehicle": reply.intent.vehicle,
                            "objective": reply.intent.objective,
                        },
                    }
                )
            elif url.path == "/api/command":
                if not isinstance(body, dict) or "vehicle_id" not in body or "cmd" not in body:
                    self._send_json({"error": "expected {vehicle_id, cmd}"}, 400)
                    return
                try:
                    cmd_seq = service.command(int(body["vehicle_id"]), str(body["cmd"]))
                except (ValueError, C2Error) as exc:
                    self._send_json({"error": str(exc)}, 400)
                    return
                self._send_json({"cmd_seq": cmd_seq})
            else:
                self._send_json({"error": "not found"}, 404)

        def _serve_stream(self):
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            q = service.subscribe()
            try:
                while True:
                    try:
                        event, data = q.get(timeout=SSE_HEARTBEAT_S)
                    except queue.Empty:
                        self.wfile.write(b": ping\n\n")
                        self.wfile.flush()
                        continue
                    payload = json.dumps(data)
                    self.wfile.write(f"event: {event}\ndata: {payload}\n\n".encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                service.unsubscribe(q)

        def _serve_static(self, path: str):
            if server.assets_dir is None:
                self._send_json({"error": "not found"}, 404)
                return
            rel = path.lstrip("/") or "index.html"
            target = (server.assets_dir / rel).resolve()
            if not str(target).startswith(str(server.assets_dir)) or not target.is_file():
                self._send_json({"error": "not found"}, 404)
                return
            body = target.read_bytes()
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler
