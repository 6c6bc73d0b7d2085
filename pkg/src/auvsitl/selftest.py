"""
Protocol conformance checks run by `auvsitl selftest`.

The CRC is compared against an independent bit-level implementation, the
CRC_EXTRA seeds against the published per-message values, and the shipped
golden frames must decode without diagnostics. When pymavlink is installed
the encoder output is also checked against it.
"""

import logging
from pathlib import Path
from typing import NamedTuple

from auvsitl import mavproto

GOLDEN_PATH = Path(__file__).parent / "data" / "golden_frames.hex"

# Values from the MAVLink common message set
KNOWN_CRC_EXTRA = {
    "HEARTBEAT": 50,
    "SCALED_PRESSURE": 115,
    "ATTITUDE": 39,
    "SERVO_OUTPUT_RAW": 222,
    "RC_CHANNELS_OVERRIDE": 124,
    "COMMAND_LONG": 152,
    "COMMAND_ACK": 143,
}


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str = ""


def crc16_reference(data, init=0xFFFF):
    """Bitwise reflected CRC-16 with polynomial 0x8408."""
    crc = init
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
    return crc


def check_crc():
    vector = b"123456789"
    got = mavproto.crc16_accumulate(vector)
    want = crc16_reference(vector)
    return CheckResult("crc16 check vector", got == want == 0x6F91, f"0x{got:04x} vs 0x{want:04x}")


def check_crc_extra():
    results = []
    for name, want in KNOWN_CRC_EXTRA.items():
        got = mavproto.REGISTRY.by_name(name).crc_extra
        results.append(CheckResult(f"crc_extra {name}", got == want, f"{got} vs {want}"))
    return results


def check_golden(path=GOLDEN_PATH):
    results = []
    for i, frame in enumerate(mavproto.load_golden(path)):
        result = mavproto.decode_stream(frame)
        ok = len(result.messages) == 1 and not result.diagnostics and not result.state.pending
        detail = result.messages[0].name if result.messages else str(result.diagnostics)
        results.append(CheckResult(f"golden frame {i}", ok, detail))
    return results


def check_pymavlink():
    """Byte-compare a HEARTBEAT against pymavlink; skipped when it is absent."""
    try:
        # pylint: disable=import-outside-toplevel
        from pymavlink.dialects.v10 import common
    except ImportError:
        logging.info("selftest: pymavlink not installed, skipping cross-check")
        return []
    ref = common.MAVLink(None, srcSystem=1, srcComponent=1)
    ref_frame = bytes(
        ref.heartbeat_encode(
            mavproto.MAV_TYPE_SUBMARINE,
            mavproto.MAV_AUTOPILOT_ARDUPILOTMEGA,
            0,
            0,
            mavproto.MAV_STATE_ACTIVE,
            mavproto.MAVLINK_VERSION,
        ).pack(ref)
    )
    ours = mavproto.encode_frame(
        mavproto.make_message(
            "HEARTBEAT",
            type=mavproto.MAV_TYPE_SUBMARINE,
            autopilot=mavproto.MAV_AUTOPILOT_ARDUPILOTMEGA,
            base_mode=0,
            custom_mode=0,
            system_status=mavproto.MAV_STATE_ACTIVE,
            mavlink_version=mavproto.MAVLINK_VERSION,
        ),
        0,
        1,
        1,
    )
    return [CheckResult("pymavlink HEARTBEAT", ours == ref_frame, f"{ours.hex()} vs {ref_frame.hex()}")]


def run_selftest(golden_path=GOLDEN_PATH):
    """Run every check; returns the list of CheckResult."""
    results = [check_crc()]
    results += check_crc_extra()
    results += check_golden(golden_path)
    results += check_pymavlink()
    for r in results:
        log = logging.info if r.ok else logging.error
        log("selftest: [%s] %s %s", "OK" if r.ok else "FAIL", r.name, r.detail)
    return results
