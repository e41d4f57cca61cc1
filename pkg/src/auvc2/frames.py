"""Bit-exact acoustic frame and telemetry payload codecs.

Frame layout, big-endian throughout::

    [0]      0xA5 magic
    [1]      0x01 version
    [2]      src address
    [3]      dst address (255 = broadcast)
    [4]      message type
    [5:7]    16-bit sequence number
    [7]      payload length n (0..64)
    [8:8+n]  payload
    [8+n:]   CRC-16/CCITT-FALSE over bytes [0:8+n]

Payload layouts per message type::

    0x01 Status   >iiHHHBBBB  lat_e7 lon_e7 depth_cm speed_cms heading_cdeg
                              battery_pct fault_bits objective_id objective_pct
    0x02 Event    >BBH        event_code objective_id detail
    0x03 Command  >BB         cmd_code arg
    0x04 Ack      >HB         cmd_seq status
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

MAGIC = 0xA5
VERSION = 0x01
MAX_PAYLOAD = 64
HEADER_LEN = 8
MIN_FRAME_LEN = HEADER_LEN + 2
BROADCAST_ADDR = 255

MSG_STATUS = 0x01
MSG_EVENT = 0x02
MSG_COMMAND = 0x03
MSG_ACK = 0x04

CMD_START_MISSION = 1
CMD_ABORT_TO_RECOVERY = 2
CMD_PING = 3

EVT_OBJ_STARTED = 1
EVT_OBJ_COMPLETED = 2
EVT_FAULT_ONSET = 3
EVT_ABORTING = 4
EVT_MISSION_COMPLETE = 5
EVT_FAULT_CLEARED = 6
EVT_RECOVERED = 7

ACK_OK = 0


class FrameError(ValueError):
    """Codec failure with a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _build_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection or xor-out."""
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


@dataclass(frozen=True)
class AcousticFrame:
    src: int
    dst: int
    msg_type: int
    seq: int
    payload: bytes = b""


def encode_frame(frame: AcousticFrame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise FrameError("OVERSIZE", f"payload {len(frame.payload)} bytes > {MAX_PAYLOAD}")
    try:
        head = struct.pack(
            ">BBBBBHB",
            MAGIC,
            VERSION,
            frame.src,
            frame.dst,
            frame.msg_type,
            frame.seq,
            len(frame.payload),
        )
    except struct.error as exc:
        raise FrameError("FIELD_RANGE", str(exc)) from exc
    body = head + frame.payload
    return body + struct.pack(">H", crc16(body))


def decode_frame(data: bytes) -> AcousticFrame:
    if len(data) < MIN_FRAME_LEN:
        raise FrameError("TRUNCATED", f"{len(data)} bytes < minimum {MIN_FRAME_LEN}")
    if data[0] != MAGIC:
        raise FrameError("BAD_MAGIC", f"0x{data[0]:02x}")
    if data[1] != VERSION:
        raise FrameError("BAD_VERSION", f"0x{data[1]:02x}")
    payload_len = data[7]
    if len(data) != MIN_FRAME_LEN + payload_len:
        raise FrameError(
            "LENGTH_MISMATCH",
            f"{len(data)} bytes but payload_len field says {MIN_FRAME_LEN + payload_len}",
        )
    body, crc_bytes = data[:-2], data[-2:]
    if crc16(body) != struct.unpack(">H", crc_bytes)[0]:
        raise FrameError("BAD_CRC", "checksum mismatch")
    return AcousticFrame(
        src=data[2],
        dst=data[3],
        msg_type=data[4],
        seq=struct.unpack(">H", data[5:7])[0],
        payload=bytes(data[8:-2]),
    )


@dataclass(frozen=True)
class Status:
    """Vehicle state beacon; positions in 1e-7 deg fixed point."""

    lat_e7: int
    lon_e7: int
    depth_cm: int
    speed_cms: int
    heading_cdeg: int
    battery_pct: int
    fault_bits: int
    objective_id: int  # 0 = none
    objective_pct: int

    @property
    def lat(self) -> float:
        return self.lat_e7 / 1e7

    @property
    def lon(self) -> float:
        return self.lon_e7 / 1e7


@dataclass(frozen=True)
class Event:
    event_code: int
    objective_id: int
    detail: int = 0


@dataclass(frozen=True)
class Command:
    cmd_code: int
    arg: int = 0


@dataclass(frozen=True)
class Ack:
    cmd_seq: int
    status: int = ACK_OK


TelemetryMessage = Union[Status, Event, Command, Ack]

_STATUS_FMT = ">iiHHHBBBB"
_EVENT_FMT = ">BBH"
_COMMAND_FMT = ">BB"
_ACK_FMT = ">HB"


def encode_payload(msg: TelemetryMessage) -> tuple[int, bytes]:
    try:
        if isinstance(msg, Status):
            return MSG_STATUS, struct.pack(
                _STATUS_FMT,
                msg.lat_e7,
                msg.lon_e7,
                msg.depth_cm,
                msg.speed_cms,
                msg.heading_cdeg,
                msg.battery_pct,
                msg.fault_bits,
                msg.objective_id,
                msg.objective_pct,
            )
        if isinstance(msg, Event):
            return MSG_EVENT, struct.pack(_EVENT_FMT, msg.event_code, msg.objective_id, msg.detail)
        if isinstance(msg, Command):
            return MSG_COMMAND, struct.pack(_COMMAND_FMT, msg.cmd_code, msg.arg)
        if isinstance(msg, Ack):
            return MSG_ACK, struct.pack(_ACK_FMT, msg.cmd_seq, msg.status)
    except struct.error as exc:
        raise FrameError("FIELD_RANGE", str(exc)) from exc
    raise FrameError("UNKNOWN_TYPE", f"cannot encode {type(msg).__name__}")


def decode_payload(msg_type: int, payload: bytes) -> TelemetryMessage:
    fmt = {
        MSG_STATUS: _STATUS_FMT,
        MSG_EVENT: _EVENT_FMT,
        MSG_COMMAND: _COMMAND_FMT,
        MSG_ACK: _ACK_FMT,
    }.get(msg_type)
    if fmt is None:
        raise FrameError("UNKNOWN_TYPE", f"msg_type 0x{msg_type:02x}")
    if len(payload) != struct.calcsize(fmt):
        raise FrameError(
            "LENGTH_MISMATCH",
            f"msg_type 0x{msg_type:02x} expects {struct.calcsize(fmt)} bytes, got {len(payload)}",
        )
    fields = struct.unpack(fmt, payload)
    if msg_type == MSG_STATUS:
        return Status(*fields)
    if msg_type == MSG_EVENT:
        return Event(*fields)
    if msg_type == MSG_COMMAND:
        return Command(*fields)
    return Ack(*fields)
