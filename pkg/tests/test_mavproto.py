import random
import struct

import pytest

from auvsitl import mavproto
from auvsitl.mavproto import (
    REGISTRY,
    DiagnosticKind,
    FieldDef,
    MessageDef,
    ScalarKind,
    decode_stream,
    encode_frame,
    make_message,
)
from auvsitl.selftest import GOLDEN_PATH, KNOWN_CRC_EXTRA, crc16_reference

GOLDEN_HEARTBEAT = bytes.fromhex("fe0900010100000000000c03000403722d")


def heartbeat(**overrides):
    values = dict(
        type=mavproto.MAV_TYPE_SUBMARINE,
        autopilot=mavproto.MAV_AUTOPILOT_ARDUPILOTMEGA,
        base_mode=0,
        custom_mode=0,
        system_status=mavproto.MAV_STATE_ACTIVE,
        mavlink_version=mavproto.MAVLINK_VERSION,
    )
    values.update(overrides)
    return make_message("HEARTBEAT", **values)


def random_values(defn, rnd):
    """Random field values; floats are pre-rounded to float32."""
    values = {}
    for f in defn.fields:
        if f.kind.is_float:
            values[f.name] = struct.unpack("<f", struct.pack("<f", rnd.uniform(-1e3, 1e3)))[0]
        else:
            lo, hi = f.kind.int_range
            values[f.name] = rnd.randint(lo, hi)
    return values


def test_crc_check_vector():
    assert mavproto.crc16_accumulate(b"123456789") == 0x6F91
    assert mavproto.crc16_accumulate(b"123456789") == crc16_reference(b"123456789")


def test_crc_empty_input_is_init():
    assert mavproto.crc16_accumulate(b"") == 0xFFFF
    assert mavproto.crc16_accumulate(b"", 0x1234) == 0x1234


def test_crc_accumulates_in_chunks():
    data = bytes(range(200))
    assert mavproto.crc16_accumulate(data[120:], mavproto.crc16_accumulate(data[:120])) == (
        mavproto.crc16_accumulate(data)
    )


def test_crc_extra_matches_published_values():
    for name, want in KNOWN_CRC_EXTRA.items():
        assert REGISTRY.by_name(name).crc_extra == want, name


def test_wire_order_is_stable_size_sort():
    order = [f.name for f in mavproto.HEARTBEAT.wire_fields]
    assert order == ["custom_mode", "type", "autopilot", "base_mode", "system_status", "mavlink_version"]
    order = [f.name for f in mavproto.COMMAND_LONG.wire_fields]
    assert order[:7] == [f"param{i}" for i in range(1, 8)]
    assert order[7:] == ["command", "target_system", "target_component", "confirmation"]


def test_payload_sizes():
    sizes = {d.name: d.payload_size for d in REGISTRY}
    assert sizes == {
        "HEARTBEAT": 9,
        "SCALED_PRESSURE": 14,
        "ATTITUDE": 28,
        "SERVO_OUTPUT_RAW": 21,
        "RC_CHANNELS_OVERRIDE": 18,
        "COMMAND_LONG": 33,
        "COMMAND_ACK": 3,
    }


def test_golden_heartbeat_encodes_and_decodes():
    assert encode_frame(heartbeat(), 0, 1, 1) == GOLDEN_HEARTBEAT
    result = decode_stream(GOLDEN_HEARTBEAT)
    assert not result.diagnostics
    assert len(result.messages) == 1
    assert result.messages[0] == heartbeat()
    assert result.messages[0].header == mavproto.FrameHeader(0, 1, 1)


def test_golden_file_loads():
    assert mavproto.load_golden(GOLDEN_PATH) == [GOLDEN_HEARTBEAT]
    assert mavproto.dump_golden([GOLDEN_HEARTBEAT]) == GOLDEN_HEARTBEAT.hex() + "\n"


def test_round_trip_every_message():
    rnd = random.Random(5)
    for defn in REGISTRY:
        for _ in range(1000):
            msg = mavproto.Message(defn, random_values(defn, rnd))
            seq = rnd.randrange(256)
            frame = encode_frame(msg, seq, rnd.randrange(256), rnd.randrange(256))
            assert len(frame) == defn.payload_size + mavproto.FRAME_OVERHEAD
            result = decode_stream(frame)
            assert result.messages == [msg], defn.name
            assert result.messages[0].header.seq == seq


def test_every_single_bit_flip_is_rejected():
    rnd = random.Random(11)
    for defn in REGISTRY:
        frame = encode_frame(mavproto.Message(defn, random_values(defn, rnd)), 7, 1, 1)
        for bit in range(8, len(frame) * 8):
            mangled = bytearray(frame)
            mangled[bit // 8] ^= 1 << (bit % 8)
            result = decode_stream(bytes(mangled))
            assert result.messages == [], f"{defn.name} bit {bit}"
            assert result.diagnostics, f"{defn.name} bit {bit} produced no diagnostic"
            # a flipped msg_id that lands on no known message skips the frame unchecked
            if bit // 8 == 5 and REGISTRY.get(mangled[5]) is None:
                expected = DiagnosticKind.UNKNOWN_MSG_ID
            else:
                expected = DiagnosticKind.CRC_MISMATCH
            assert result.diagnostics[0].kind == expected, f"{defn.name} bit {bit}"


def test_magic_flip_drops_frame_silently():
    mangled = bytes([0xFF]) + GOLDEN_HEARTBEAT[1:]
    result = decode_stream(mangled)
    assert result.messages == []
    assert result.state.pending == b""


def test_unknown_msg_id_skips_whole_frame():
    unknown = MessageDef("MYSTERY", 200, (FieldDef("value", ScalarKind.U16),))
    frame = encode_frame(mavproto.Message(unknown, {"value": 0xFEFE}), 0, 1, 1)
    result = decode_stream(frame + GOLDEN_HEARTBEAT)
    assert [d.kind for d in result.diagnostics] == [DiagnosticKind.UNKNOWN_MSG_ID]
    assert result.messages == [heartbeat()]


def test_wrong_length_for_known_id_is_crc_mismatch():
    frame = bytearray(GOLDEN_HEARTBEAT)
    frame[1] = 8
    result = decode_stream(bytes(frame))
    assert result.messages == []
    assert result.diagnostics[0].kind == DiagnosticKind.CRC_MISMATCH


def test_any_chunking_gives_same_messages():
    rnd = random.Random(3)
    frames = b""
    expected = []
    for i in range(40):
        defn = rnd.choice(list(REGISTRY))
        msg = mavproto.Message(defn, random_values(defn, rnd))
        expected.append(msg)
        frames += encode_frame(msg, i % 256, 1, 1)
    for _ in range(20):
        state = None
        got = []
        pos = 0
        while pos < len(frames):
            size = rnd.randint(1, 50)
            result = decode_stream(frames[pos:pos + size], state)
            got += result.messages
            state = result.state
            pos += size
        assert got == expected
        assert mavproto.flush(state) == []


def test_garbage_between_frames_resyncs():
    broken = GOLDEN_HEARTBEAT[:-1] + b"\x00"
    data = b"\x00\x13abc" + broken + GOLDEN_HEARTBEAT + b"\xaa\xbb" + GOLDEN_HEARTBEAT
    result = decode_stream(data)
    assert result.messages == [heartbeat(), heartbeat()]
    assert [d.kind for d in result.diagnostics] == [DiagnosticKind.CRC_MISMATCH]


def test_truncated_frame_is_held_then_flushed():
    result = decode_stream(GOLDEN_HEARTBEAT[:10])
    assert result.messages == []
    assert result.state.pending == GOLDEN_HEARTBEAT[:10]
    diags = mavproto.flush(result.state)
    assert [d.kind for d in diags] == [DiagnosticKind.TRUNCATED_FRAME]
    result = decode_stream(GOLDEN_HEARTBEAT[10:], result.state)
    assert result.messages == [heartbeat()]


def test_encoder_sequence_wraps():
    enc = mavproto.MavEncoder(1, 1)
    seqs = [enc.encode(heartbeat())[2] for _ in range(258)]
    assert seqs[:3] == [0, 1, 2]
    assert seqs[255:] == [255, 0, 1]


def test_missing_and_out_of_range_fields():
    with pytest.raises(mavproto.MissingFieldValue):
        make_message("COMMAND_ACK", command=400)
    msg = make_message("COMMAND_ACK", command=400, result=256)
    with pytest.raises(mavproto.FieldValueOutOfRange):
        encode_frame(msg, 0, 1, 1)
    with pytest.raises(ValueError):
        encode_frame(heartbeat(), 256, 1, 1)


def test_payload_too_large():
    with pytest.raises(mavproto.PayloadTooLarge):
        MessageDef("BIG", 250, (FieldDef("blob", ScalarKind.U8, 256),))


def test_array_fields_round_trip():
    defn = MessageDef("ARRAYED", 201, (FieldDef("vals", ScalarKind.I16, 4), FieldDef("flag", ScalarKind.U8)))
    registry = mavproto.Registry([defn])
    msg = mavproto.Message(defn, {"vals": (-1, 2, -3, 4), "flag": 9})
    result = decode_stream(encode_frame(msg, 0, 1, 1), registry=registry)
    assert result.messages == [msg]


def test_pymavlink_decodes_our_frames():
    common = pytest.importorskip("pymavlink.dialects.v10.common")
    ref = common.MAVLink(None)
    ref.robust_parsing = True
    rc = make_message(
        "RC_CHANNELS_OVERRIDE",
        target_system=1,
        target_component=1,
        **{f"chan{i}_raw": 1500 + i for i in range(1, 9)},
    )
    decoded = ref.parse_buffer(encode_frame(rc, 3, 255, 190))
    assert len(decoded) == 1
    assert decoded[0].get_type() == "RC_CHANNELS_OVERRIDE"
    assert decoded[0].chan6_raw == 1506
