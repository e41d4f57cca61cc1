import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from auvc2 import frames
from auvc2.frames import (
    Ack,
    AcousticFrame,
    Command,
    Event,
    FrameError,
    Status,
    crc16,
    decode_frame,
    decode_payload,
    encode_frame,
    encode_payload,
)


def crc16_bitwise(data: bytes) -> int:
    """Independent bit-serial reference (no table)."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else crc << 1
            crc &= 0xFFFF
    return crc


def test_crc_empty_is_init():
    assert crc16(b"") == 0xFFFF


def test_crc_check_value():
    assert crc16(b"123456789") == 0x29B1
    assert crc16_bitwise(b"123456789") == 0x29B1


@given(st.binary(max_size=128))
def test_crc_matches_bitwise_reference(data):
    assert crc16(data) == crc16_bitwise(data)


def test_crc_detects_every_single_bit_flip():
    base = bytes(range(32))
    reference = crc16(base)
    for pos in range(32 * 8):
        flipped = bytearray(base)
        flipped[pos // 8] ^= 1 << (pos % 8)
        assert crc16(bytes(flipped)) != reference


def test_encode_example_frame():
    raw = encode_frame(AcousticFrame(src=1, dst=2, msg_type=3, seq=7, payload=b""))
    assert raw[:8].hex() == "a501010203000700"
    assert raw[8:] == struct.pack(">H", crc16(raw[:8]))
    assert len(raw) == 10


frame_strategy = st.builds(
    AcousticFrame,
    src=st.integers(0, 255),
    dst=st.integers(0, 255),
    msg_type=st.integers(0, 255),
    seq=st.integers(0, 0xFFFF),
    payload=st.binary(max_size=64),
)


@given(frame_strategy)
def test_frame_round_trip(frame):
    assert decode_frame(encode_frame(frame)) == frame


def test_oversize_payload_rejected():
    with pytest.raises(FrameError) as err:
        encode_frame(AcousticFrame(1, 2, 3, 4, b"\x00" * 65))
    assert err.value.code == "OVERSIZE"


def test_decode_rejects_corruption():
    raw = bytearray(encode_frame(AcousticFrame(1, 2, 3, 7, b"hello")))
    raw[-1] ^= 0x01
    with pytest.raises(FrameError) as err:
        decode_frame(bytes(raw))
    assert err.value.code == "BAD_CRC"


def test_decode_rejects_bad_magic_and_version():
    raw = bytearray(encode_frame(AcousticFrame(1, 2, 3, 7)))
    bad_magic = bytes([0x00]) + bytes(raw[1:])
    with pytest.raises(FrameError) as err:
        decode_frame(bad_magic)
    assert err.value.code == "BAD_MAGIC"
    bad_version = bytes([raw[0], 0x02]) + bytes(raw[2:])
    with pytest.raises(FrameError) as err:
        decode_frame(bad_version)
    assert err.value.code == "BAD_VERSION"


def test_decode_rejects_truncation_and_length_mismatch():
    with pytest.raises(FrameError) as err:
        decode_frame(b"\xa5\x01\x01\x02\x03")
    assert err.value.code == "TRUNCATED"
    raw = encode_frame(AcousticFrame(1, 2, 3, 7, b"abc"))
    with pytest.raises(FrameError) as err:
        decode_frame(raw + b"\x00")
    assert err.value.code == "LENGTH_MISMATCH"


@given(st.binary(max_size=120))
def test_decode_total_over_arbitrary_bytes(data):
    # either a clean FrameError or a frame that re-encodes to the same bytes
    try:
        frame = decode_frame(data)
    except FrameError:
        return
    assert encode_frame(frame) == data


def test_status_fixed_point_encoding():
    msg = Status(
        lat_e7=565000000,
        lon_e7=-50000000,
        depth_cm=200,
        speed_cms=129,
        heading_cdeg=9000,
        battery_pct=87,
        fault_bits=0,
        objective_id=1,
        objective_pct=50,
    )
    mt, payload = encode_payload(msg)
    assert mt == frames.MSG_STATUS
    assert len(payload) == 18
    assert payload[:4] == struct.pack(">i", 565000000)
    assert decode_payload(mt, payload) == msg
    assert msg.lat == pytest.approx(56.5)


status_strategy = st.builds(
    Status,
    lat_e7=st.integers(-900000000, 900000000),
    lon_e7=st.integers(-1800000000, 1800000000),
    depth_cm=st.integers(0, 65535),
    speed_cms=st.integers(0, 65535),
    heading_cdeg=st.integers(0, 35999),
    battery_pct=st.integers(0, 100),
    fault_bits=st.integers(0, 15),
    objective_id=st.integers(0, 250),
    objective_pct=st.integers(0, 100),
)
event_strategy = st.builds(
    Event,
    event_code=st.integers(1, 7),
    objective_id=st.integers(0, 250),
    detail=st.integers(0, 0xFFFF),
)
command_strategy = st.builds(Command, cmd_code=st.integers(1, 3), arg=st.integers(0, 255))
ack_strategy = st.builds(Ack, cmd_seq=st.integers(0, 0xFFFF), status=st.integers(0, 255))


@given(st.one_of(status_strategy, event_strategy, command_strategy, ack_strategy))
def test_payload_round_trip(msg):
    mt, payload = encode_payload(msg)
    assert decode_payload(mt, payload) == msg


def test_payload_sizes():
    sizes = {
        encode_payload(Status(0, 0, 0, 0, 0, 0, 0, 0, 0))[0]: 18,
        encode_payload(Event(1, 0, 0))[0]: 4,
        encode_payload(Command(1, 0))[0]: 2,
        encode_payload(Ack(0, 0))[0]: 3,
    }
    for mt, expected in sizes.items():
        assert len(encode_payload(decode_payload(mt, bytes(expected)))[1]) == expected


def test_payload_length_mismatch():
    with pytest.raises(FrameError) as err:
        decode_payload(frames.MSG_EVENT, b"\x01\x02\x03")
    assert err.value.code == "LENGTH_MISMATCH"


def test_unknown_msg_type():
    with pytest.raises(FrameError) as err:
        decode_payload(0x7F, b"")
    assert err.value.code == "UNKNOWN_TYPE"
