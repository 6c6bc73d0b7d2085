"""
Telemetry logs.

A tlog is a plain concatenation of records: an 8-byte big-endian timestamp in
microseconds followed by one raw MAVLink v1 frame. Frame boundaries come from
the payload length byte of each frame header.
"""

import csv
import io
import struct
from typing import NamedTuple

from auvsitl import mavproto

_STAMP = struct.Struct(">Q")

REPLAY_HEADER = ["time_us", "seq", "sys_id", "comp_id", "msg_id", "name", "fields"]


class CorruptLog(ValueError):
    """A record is truncated or does not start with a frame header."""


class NonMonotonicTimestamp(ValueError):
    """Record timestamps decrease."""


class TlogRecord(NamedTuple):
    timestamp: int
    frame: bytes


def seconds_to_us(t):
    return int(round(t * 1e6))


def write_tlog(records):
    """
    Serialize records.

    Args:
        records (iterable): (timestamp_us, frame) pairs, timestamps non-decreasing.

    Returns:
        bytes: The log file content.
    """
    out = bytearray()
    last = 0
    for i, (timestamp, frame) in enumerate(records):
        if not 0 <= timestamp < 1 << 64:
            raise ValueError(f"record {i}: timestamp {timestamp} outside 64-bit range")
        if timestamp < last:
            raise NonMonotonicTimestamp(f"record {i}: timestamp {timestamp} < previous {last}")
        if len(frame) < mavproto.FRAME_OVERHEAD or frame[0] != mavproto.MAGIC:
            raise ValueError(f"record {i}: not a MAVLink v1 frame")
        last = timestamp
        out += _STAMP.pack(timestamp)
        out += frame
    return bytes(out)


def read_tlog(data):
    """
    Parse a log written by write_tlog.

    Frames are returned as stored, corrupted ones included; checksum
    validation is left to the decoder.

    Raises:
        CorruptLog: on a truncated record or a missing frame magic byte.
        NonMonotonicTimestamp: when timestamps decrease.
    """
    data = bytes(data)
    records = []
    pos = 0
    last = 0
    while pos < len(data):
        if len(data) - pos < _STAMP.size + 2:
            raise CorruptLog(f"truncated record header at byte {pos}")
        (timestamp,) = _STAMP.unpack_from(data, pos)
        start = pos + _STAMP.size
        if data[start] != mavproto.MAGIC:
            raise CorruptLog(f"no frame magic at byte {start}")
        end = start + data[start + 1] + mavproto.FRAME_OVERHEAD
        if end > len(data):
            raise CorruptLog(f"truncated frame at byte {start}")
        if timestamp < last:
            raise NonMonotonicTimestamp(f"timestamp {timestamp} < previous {last} at byte {pos}")
        records.append(TlogRecord(timestamp, data[start:end]))
        last = timestamp
        pos = end
    return records


def _field_text(value):
    if isinstance(value, float):
        return f"{value:.9g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_field_text(v) for v in value)
    return str(value)


def replay_csv(data):
    """
    Decode a tlog into CSV text, one row per message.

    fields holds space-separated key=value pairs in declaration order.
    Decoder diagnostics become rows named after the diagnostic kind.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPLAY_HEADER)
    for record in read_tlog(data):
        result = mavproto.decode_stream(record.frame)
        for msg in result.messages:
            fields = " ".join(f"{f.name}={_field_text(msg[f.name])}" for f in msg.defn.fields)
            writer.writerow(
                [
                    record.timestamp,
                    msg.header.seq,
                    msg.header.sys_id,
                    msg.header.comp_id,
                    msg.defn.msg_id,
                    msg.name,
                    fields,
                ]
            )
        for diag in result.diagnostics + mavproto.flush(result.state):
            writer.writerow(
                [
                    record.timestamp,
                    "",
                    "",
                    "",
                    "" if diag.msg_id is None else diag.msg_id,
                    diag.kind.value,
                    diag.detail,
                ]
            )
    return buf.getvalue()
