"""Acoustic-to-TCP bridge.

The relay is a dumb pipe: every frame heard on the modem side is wrapped
in an envelope and fanned out verbatim to every connected TCP client, and
every valid envelope a client submits is queued for acoustic transmission
unchanged. No dedup, no acks, no filtering; end-to-end reliability is the
C2 side's problem.

Client wire protocol, bit-exact: each message is a 4-byte big-endian
length N (1..65536) followed by N bytes of UTF-8 text. Relay-to-client
texts are single-line envelopes with fixed member order::

    {"rx_time_ms":12345,"frame_hex":"a501..."}

Client-to-relay texts use the same shape with rx_time_ms 0.
"""

from __future__ import annotations

import json
import queue
import re
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Optional

from . import frames

MAX_MESSAGE_LEN = 65536
CLIENT_QUEUE_CAP = 1024
_HEX_RE = re.compile(r"^[0-9a-fA-F]*$")


class EnvelopeError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class StreamError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def make_envelope(frame_bytes: bytes, rx_time_ms: int) -> str:
    if not frame_bytes:
        raise ValueError("refusing to wrap an empty frame")
    return '{"rx_time_ms":%d,"frame_hex":"%s"}' % (rx_time_ms, frame_bytes.hex())


def parse_envelope(text: str) -> tuple[bytes, int]:
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise EnvelopeError("MALFORMED_OBJECT", str(exc)) from exc
    if (
        not isinstance(obj, dict)
        or set(obj) != {"rx_time_ms", "frame_hex"}
        or isinstance(obj["rx_time_ms"], bool)
        or not isinstance(obj["rx_time_ms"], int)
        or not isinstance(obj["frame_hex"], str)
    ):
        raise EnvelopeError("MALFORMED_OBJECT", "expected rx_time_ms and frame_hex members")
    hex_str = obj["frame_hex"]
    if len(hex_str) % 2:
        raise EnvelopeError("ODD_HEX_LENGTH", f"{len(hex_str)} hex digits")
    if not _HEX_RE.match(hex_str):
        raise EnvelopeError("NON_HEX_CHAR", "frame_hex contains non-hex characters")
    return bytes.fromhex(hex_str), obj["rx_time_ms"]


def stream_encode(text: str) -> bytes:
    raw = text.encode("utf-8")
    if not 1 <= len(raw) <= MAX_MESSAGE_LEN:
        raise StreamError("LENGTH_OUT_OF_RANGE", f"{len(raw)} bytes")
    return struct.pack(">I", len(raw)) + raw


def stream_decode(buffer: bytes) -> tuple[list[str], bytes]:
    """Extract every complete length-prefixed message; return the remainder."""
    messages: list[str] = []
    pos = 0
    while len(buffer) - pos >= 4:
        (n,) = struct.unpack_from(">I", buffer, pos)
        if n == 0 or n > MAX_MESSAGE_LEN:
            raise StreamError("LENGTH_OUT_OF_RANGE", f"length prefix {n}")
        if len(buffer) - pos - 4 < n:
            break
        messages.append(buffer[pos + 4 : pos + 4 + n].decode("utf-8"))
        pos += 4 + n
    return messages, buffer[pos:]


@dataclass
class RelayCounters:
    acoustic_rx: int = 0
    acoustic_tx: int = 0
    tcp_rx: int = 0
    tcp_tx: int = 0
    dropped_invalid: int = 0

    def as_dict(self) -> dict:
        return {
            "acoustic_rx": self.acoustic_rx,
            "acoustic_tx": self.acoustic_tx,
            "tcp_rx": self.tcp_rx,
            "tcp_tx": self.tcp_tx,
            "dropped_invalid": self.dropped_invalid,
        }


class RelayCore:
    """Bridging rules and counters, free of any socket machinery."""

    def __init__(self, modem_id: int = 0):
        self.modem_id = modem_id
        self.counters = RelayCounters()
        self.clients: list[int] = []  # session ids in accept order

    def client_joined(self, session: int) -> None:
        self.clients.append(session)

    def client_left(self, session: int) -> None:
        if session in self.clients:
            self.clients.remove(session)

    def on_acoustic_rx(self, frame_bytes: bytes, now_ms: int) -> list[tuple[int, str]]:
        """One identical envelope per connected client, in accept order."""
        self.counters.acoustic_rx += 1
        if not self.clients:
            return []
        text = make_envelope(frame_bytes, now_ms)
        self.counters.tcp_tx += len(self.clients)
        return [(session, text) for session in self.clients]

    def on_tcp_rx(self, text: str, now_ms: int) -> Optional[bytes]:
        """Validated client frame for acoustic transmit, or None (drop-and-count)."""
        self.counters.tcp_rx += 1
        try:
            frame_bytes, _ = parse_envelope(text)
            frames.decode_frame(frame_bytes)
        except (EnvelopeError, frames.FrameError):
            self.counters.dropped_invalid += 1
            return None
        self.counters.acoustic_tx += 1
        return frame_bytes


class _ClientSession:
    _next_id = 1
    _id_lock = threading.Lock()

    def __init__(self, sock: socket.socket, server: "RelayServer"):
        with _ClientSession._id_lock:
            self.session_id = _ClientSession._next_id
            _ClientSession._next_id += 1
        self.sock = sock
        self.server = server
        self.outbox: queue.Queue[Optional[bytes]] = queue.Queue(maxsize=CLIENT_QUEUE_CAP)
        self.alive = True
        self.reader = threading.Thread(target=self._read_loop, daemon=True)
        self.writer = threading.Thread(target=self._write_loop, daemon=True)

    def start(self) -> None:
        self.reader.start()
        self.writer.start()

    def send(self, data: bytes) -> bool:
        """Queue outbound bytes; False if the client is too slow to live."""
        try:
            self.outbox.put_nowait(data)
            return True
        except queue.Full:
            return False

    def close(self) -> None:
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        try:
            self.outbox.put_nowait(None)
        except queue.Full:
            pass

    def _read_loop(self) -> None:
        buffer = b""
        while self.alive:
            try:
                chunk = self.sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            buffer += chunk
            try:
                messages, buffer = stream_decode(buffer)
            except StreamError:
                break  # protocol violation: cut the connection
            for text in messages:
                self.server._events.put(("client_msg", self, text))
        self.server._events.put(("client_gone", self))

    def _write_loop(self) -> None:
        while True:
            data = self.outbox.get()
            if data is None:
                return
            try:
                self.sock.sendall(data)
            except OSError:
                self.server._events.put(("client_gone", self))
                return


class RelayServer:
    """TCP fan-out server around a RelayCore.

    All state mutations run on one event-processing thread; socket readers
    and writers only move bytes. The tick/flush calls are the logical-time
    barriers the scenario runner uses: tick applies a batch of modem-side
    deliveries, flush hands back everything clients submitted once an
    expected number of client messages has arrived.
    """

    def __init__(self, listen_addr: tuple[str, int], modem_id: int = 0):
        self.core = RelayCore(modem_id)
        self.listen_addr = listen_addr
        self._events: queue.Queue = queue.Queue()
        self._sessions: dict[int, _ClientSession] = {}
        self._tx_requests: list[bytes] = []
        self._lsock: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self._proc_thread: Optional[threading.Thread] = None
        self._running = False
        self.clock_ms = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._lsock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._lsock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._lsock.bind(self.listen_addr)
        self.listen_addr = self._lsock.getsockname()
        self._lsock.listen(16)
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._proc_thread = threading.Thread(target=self._process_loop, daemon=True)
        self._accept_thread.start()
        self._proc_thread.start()

    def stop(self) -> None:
        self._running = False
        if self._lsock:
            try:
                self._lsock.close()
            except OSError:
                pass
        self._events.put(("stop",))
        for session in list(self._sessions.values()):
            session.close()

    def _accept_loop(self) -> None:
        assert self._lsock is not None
        while self._running:
            try:
                sock, _ = self._lsock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            session = _ClientSession(sock, self)
            self._events.put(("accept", session))
            session.start()

    # -- event processing ----------------------------------------------------

    def _process_loop(self) -> None:
        while True:
            event = self._events.get()
            if event[0] == "stop":
                return
            self._handle(event)

    def _handle(self, event: tuple) -> None:
        kind = event[0]
        if kind == "accept":
            session = event[1]
            self._sessions[session.session_id] = session
            self.core.client_joined(session.session_id)
        elif kind == "client_gone":
            self._drop_session(event[1])
        elif kind == "client_msg":
            session, text = event[1], event[2]
            frame_bytes = self.core.on_tcp_rx(text, self.clock_ms)
            if frame_bytes is not None:
                self._tx_requests.append(frame_bytes)
        elif kind == "tick":
            _, t_ms, deliveries, done = event
            self.clock_ms = t_ms
            for rx_time_ms, frame_bytes in deliveries:
                for session_id, text in self.core.on_acoustic_rx(frame_bytes, rx_time_ms):
                    session = self._sessions.get(session_id)
                    if session and not session.send(stream_encode(text)):
                        self._drop_session(session)  # overflowing queue = dead reader
            done.set()
        elif kind == "flush":
            _, t_ms, expected_rx, box, done = event
            deadline = 10.0
            while self.core.counters.tcp_rx < expected_rx:
                try:
                    sub = self._events.get(timeout=deadline)
                except queue.Empty:
                    break
                if sub[0] in ("accept", "client_gone", "client_msg"):
                    self._handle(sub)
                else:  # pragma: no cover - barriers never overlap
                    self._events.put(sub)
            box.append((list(self._tx_requests), self.core.counters.as_dict()))
            self._tx_requests.clear()
            done.set()

    def _drop_session(self, session: _ClientSession) -> None:
        if session.session_id in self._sessions:
            del self._sessions[session.session_id]
            self.core.client_left(session.session_id)
            session.close()

    # -- runner-facing barriers ----------------------------------------------

    def tick(self, t_ms: int, deliveries: list[tuple[int, bytes]]) -> None:
        done = threading.Event()
        self._events.put(("tick", t_ms, deliveries, done))
        if not done.wait(timeout=10.0):
            raise RuntimeError("relay tick barrier timed out")

    def flush(self, t_ms: int, expected_client_rx: int) -> tuple[list[bytes], dict]:
        box: list = []
        done = threading.Event()
        self._events.put(("flush", t_ms, expected_client_rx, box, done))
        if not done.wait(timeout=15.0):
            raise RuntimeError("relay flush barrier timed out")
        return box[0]

    def client_count(self) -> int:
        return len(self.core.clients)

    def counters(self) -> dict:
        return self.core.counters.as_dict()
