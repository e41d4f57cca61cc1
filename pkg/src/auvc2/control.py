"""Length-prefixed JSON control links.

The scenario runner drives the relay and C2 processes in lock-step over
these links (tick, flush, chat, command, shutdown). The framing is the
same 4-byte big-endian length prefix the relay's client protocol uses,
with JSON objects as payloads. This is the stand-in for the bench cabling
around the real modem hardware, not part of the relayed wire format.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from typing import Callable, Optional

from .relaynode import stream_decode, stream_encode


class ControlError(RuntimeError):
    pass


class MsgChannel:
    """Synchronous JSON message channel over a connected socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._buffer = b""
        self._pending: list[str] = []

    def send(self, obj: dict) -> None:
        self.sock.sendall(stream_encode(json.dumps(obj, separators=(",", ":"))))

    def recv(self, timeout: float = 30.0) -> dict:
        if self._pending:
            return json.loads(self._pending.pop(0))
        self.sock.settimeout(timeout)
        while True:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ControlError("control link closed")
            self._buffer += chunk
            messages, self._buffer = stream_decode(self._buffer)
            if messages:
                self._pending = messages[1:]
                return json.loads(messages[0])

    def request(self, obj: dict, timeout: float = 30.0) -> dict:
        self.send(obj)
        reply = self.recv(timeout)
        if "error" in reply:
            raise ControlError(reply["error"])
        return reply

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ControlServer:
    """Accepts one controller and dispatches its ops to a handler."""

    def __init__(self, listen_addr: tuple[str, int], handler: Callable[[dict], Optional[dict]]):
        self.handler = handler
        self._lsock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._lsock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._lsock.bind(listen_addr)
        self.listen_addr = self._lsock.getsockname()
        self._lsock.listen(1)
        self._thread: Optional[threading.Thread] = None
        self.done = threading.Event()

    def serve_forever(self) -> None:
        try:
            sock, _ = self._lsock.accept()
        except OSError:
            self.done.set()
            return
        channel = MsgChannel(sock)
        while True:
            try:
                request = channel.recv(timeout=3600.0)
            except (ControlError, OSError, socket.timeout):
                break
            try:
                reply = self.handler(request)
            except Exception as exc:  # surface handler errors to the controller
                channel.send({"error": f"{type(exc).__name__}: {exc}"})
                continue
            channel.send(reply if reply is not None else {"ok": True})
            if request.get("op") == "shutdown":
                break
        channel.close()
        self.done.set()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        try:
            self._lsock.close()
        except OSError:
            pass


def connect_with_retry(addr: tuple[str, int], timeout_s: float = 10.0) -> MsgChannel:
    deadline = time.monotonic() + timeout_s
    last_error: Optional[Exception] = None
    while time.monotonic() < deadline:
        try:
            return MsgChannel(socket.create_connection(addr, timeout=2.0))
        except OSError as exc:
            last_error = exc
            time.sleep(0.05)
    raise ControlError(f"could not connect to {addr}: {last_error}")


def pick_free_port(host: str = "127.0.0.1") -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind((host, 0))
        return s.getsockname()[1]
