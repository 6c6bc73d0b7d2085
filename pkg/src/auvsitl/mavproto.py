"""
MAVLink v1 message codec.

This module provides the message schema types, the compiled-in registry of the
messages exchanged between the companion computer and the flight controller,
the X.25 checksum with per-message CRC_EXTRA seeding, frame encoding and an
incremental, resynchronizing stream decoder.

Frame layout (v1)::

    0xFE | len | seq | sys | comp | msg_id | payload[len] | crc_lo | crc_hi
"""

import logging
import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import NamedTuple, Optional, Tuple

MAGIC = 0xFE
HEADER_LEN = 6  # magic + len + seq + sys + comp + msg_id
FRAME_OVERHEAD = HEADER_LEN + 2
MAX_PAYLOAD = 255

# MAVLink enum values used by the pipeline
MAV_CMD_COMPONENT_ARM_DISARM = 400
MAV_RESULT_ACCEPTED = 0
MAV_TYPE_SUBMARINE = 12
MAV_TYPE_ONBOARD_CONTROLLER = 18
MAV_AUTOPILOT_ARDUPILOTMEGA = 3
MAV_AUTOPILOT_INVALID = 8
MAV_MODE_FLAG_CUSTOM_MODE_ENABLED = 1
MAV_MODE_FLAG_SAFETY_ARMED = 128
MAV_STATE_STANDBY = 3
MAV_STATE_ACTIVE = 4
MAVLINK_VERSION = 3

_NAME_RE = re.compile(r"^[A-Z0-9_]*$")


class PayloadTooLarge(ValueError):
    """The serialized payload does not fit in a v1 frame."""


class MissingFieldValue(ValueError):
    """A message lacks a value for one of its schema fields."""


class FieldValueOutOfRange(ValueError):
    """A value cannot be represented by its field's scalar kind."""


class ScalarKind(Enum):
    """Wire scalar kinds: (short name, struct code, size in bytes, C type)."""

    U8 = ("u8", "B", 1, "uint8_t")
    U16 = ("u16", "H", 2, "uint16_t")
    U32 = ("u32", "I", 4, "uint32_t")
    U64 = ("u64", "Q", 8, "uint64_t")
    I8 = ("i8", "b", 1, "int8_t")
    I16 = ("i16", "h", 2, "int16_t")
    I32 = ("i32", "i", 4, "int32_t")
    I64 = ("i64", "q", 8, "int64_t")
    F32 = ("f32", "f", 4, "float")
    F64 = ("f64", "d", 8, "double")

    @property
    def code(self):
        return self.value[1]

    @property
    def size(self):
        return self.value[2]

    @property
    def ctype(self):
        return self.value[3]

    @property
    def is_float(self):
        return self.value[1] in "fd"

    @property
    def int_range(self):
        """Inclusive (min, max) for integer kinds."""
        bits = 8 * self.size
        if self.value[0].startswith("u"):
            return 0, (1 << bits) - 1
        return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


class FieldDef(NamedTuple):
    """One schema field; array_len > 1 makes it a fixed-length array."""

    name: str
    kind: ScalarKind
    array_len: int = 1


def wire_order(defn):
    """
    Return the fields of a message definition in serialization order.

    Fields are sorted by scalar size, largest first; the sort is stable so
    fields of equal size keep their declaration order.
    """
    return tuple(sorted(defn.fields, key=lambda f: f.kind.size, reverse=True))


def crc16_accumulate(data, init=0xFFFF):
    """
    Accumulate bytes into an X.25 (CRC-16/MCRF4XX) checksum.

    Args:
        data (bytes): Bytes to fold in.
        init (int): 16-bit accumulator to start from.

    Returns:
        int: The updated 16-bit accumulator.
    """
    acc = init & 0xFFFF
    for b in data:
        tmp = b ^ (acc & 0xFF)
        tmp = (tmp ^ (tmp << 4)) & 0xFF
        acc = ((acc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4)) & 0xFFFF
    return acc


def crc_extra(defn):
    """
    Compute the CRC_EXTRA seed byte of a message definition.

    The checksum runs over "NAME " then, per field in wire order,
    "ctype name " and, for arrays, one raw byte holding the array length.
    The 16-bit result is folded to 8 bits (low XOR high).
    """
    acc = crc16_accumulate((defn.name + " ").encode("ascii"))
    for f in wire_order(defn):
        acc = crc16_accumulate((f.kind.ctype + " ").encode("ascii"), acc)
        acc = crc16_accumulate((f.name + " ").encode("ascii"), acc)
        if f.array_len > 1:
            acc = crc16_accumulate(bytes([f.array_len]), acc)
    return (acc & 0xFF) ^ (acc >> 8)


@dataclass(frozen=True)
class MessageDef:
    """
    Schema of one message: name, numeric id and declaration-ordered fields.

    Attributes:
        name (str): Uppercase identifier.
        msg_id (int): Message id, 0-255.
        fields (tuple): FieldDef entries in declaration order.
    """

    name: str
    msg_id: int
    fields: Tuple[FieldDef, ...]

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"message name '{self.name}' is not an uppercase identifier")
        if not 0 <= self.msg_id <= 255:
            raise ValueError(f"{self.name}: msg_id {self.msg_id} outside 0-255")
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise ValueError(f"{self.name}: duplicate field names")
        for f in self.fields:
            if f.array_len < 1:
                raise ValueError(f"{self.name}.{f.name}: array_len must be >= 1")
        if self.payload_size > MAX_PAYLOAD:
            raise PayloadTooLarge(
                f"{self.name}: payload of {self.payload_size} bytes exceeds {MAX_PAYLOAD}"
            )

    @cached_property
    def wire_fields(self):
        return wire_order(self)

    @cached_property
    def payload_size(self):
        return sum(f.kind.size * f.array_len for f in self.fields)

    @cached_property
    def crc_extra(self):
        return crc_extra(self)

    @cached_property
    def _struct(self):
        parts = []
        for f in self.wire_fields:
            parts.append(f"{f.array_len}{f.kind.code}" if f.array_len > 1 else f.kind.code)
        return struct.Struct("<" + "".join(parts))

    def pack(self, values):
        """Serialize a field-name -> value mapping into a little-endian payload."""
        flat = []
        for f in self.wire_fields:
            if f.name not in values:
                raise MissingFieldValue(f"{self.name}: missing value for '{f.name}'")
            value = values[f.name]
            items = value if f.array_len > 1 else (value,)
            if len(items) != f.array_len:
                raise FieldValueOutOfRange(
                    f"{self.name}.{f.name}: expected {f.array_len} elements, got {len(items)}"
                )
            for item in items:
                flat.append(_check_scalar(self.name, f, item))
        try:
            payload = self._struct.pack(*flat)
        except (struct.error, OverflowError) as e:
            raise FieldValueOutOfRange(f"{self.name}: {e}") from e
        if len(payload) > MAX_PAYLOAD:
            raise PayloadTooLarge(f"{self.name}: payload of {len(payload)} bytes")
        return payload

    def unpack(self, payload):
        """Deserialize a payload into a field-name -> value dict."""
        flat = self._struct.unpack(payload)
        values = {}
        i = 0
        for f in self.wire_fields:
            if f.array_len > 1:
                values[f.name] = tuple(flat[i:i + f.array_len])
            else:
                values[f.name] = flat[i]
            i += f.array_len
        return values


def _check_scalar(msg_name, fdef, item):
    if fdef.kind.is_float:
        return float(item)
    if isinstance(item, float):
        if not item.is_integer():
            raise FieldValueOutOfRange(f"{msg_name}.{fdef.name}: {item} is not an integer")
        item = int(item)
    lo, hi = fdef.kind.int_range
    if not lo <= item <= hi:
        raise FieldValueOutOfRange(
            f"{msg_name}.{fdef.name}: {item} outside {fdef.kind.value[0]} range [{lo}, {hi}]"
        )
    return item


class FrameHeader(NamedTuple):
    """Header fields of the frame a message was decoded from."""

    seq: int
    sys_id: int
    comp_id: int


@dataclass(frozen=True)
class Message:
    """
    A decoded or to-be-encoded message.

    Equality compares the definition and the values only; the header of the
    frame a message arrived in is carried along but not compared.
    """

    defn: MessageDef
    values: dict
    header: Optional[FrameHeader] = field(default=None, compare=False)

    @property
    def name(self):
        return self.defn.name

    def __getitem__(self, key):
        return self.values[key]


class Registry:
    """Immutable id/name lookup over a set of message definitions."""

    def __init__(self, defs):
        by_id = {}
        by_name = {}
        for defn in defs:
            if defn.msg_id in by_id:
                raise ValueError(f"duplicate msg_id {defn.msg_id}")
            if defn.name in by_name:
                raise ValueError(f"duplicate message name {defn.name}")
            by_id[defn.msg_id] = defn
            by_name[defn.name] = defn
        self._by_id = MappingProxyType(by_id)
        self._by_name = MappingProxyType(by_name)

    def get(self, msg_id):
        return self._by_id.get(msg_id)

    def by_name(self, name):
        return self._by_name[name]

    def __contains__(self, msg_id):
        return msg_id in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self):
        return len(self._by_id)


def _channels(prefix, count, kind=ScalarKind.U16):
    return [FieldDef(f"{prefix}{i}_raw", kind) for i in range(1, count + 1)]


U8, U16, U32, I16, F32 = (
    ScalarKind.U8,
    ScalarKind.U16,
    ScalarKind.U32,
    ScalarKind.I16,
    ScalarKind.F32,
)

HEARTBEAT = MessageDef(
    "HEARTBEAT",
    0,
    (
        FieldDef("type", U8),
        FieldDef("autopilot", U8),
        FieldDef("base_mode", U8),
        FieldDef("custom_mode", U32),
        FieldDef("system_status", U8),
        FieldDef("mavlink_version", U8),
    ),
)
SCALED_PRESSURE = MessageDef(
    "SCALED_PRESSURE",
    29,
    (
        FieldDef("time_boot_ms", U32),
        FieldDef("press_abs", F32),
        FieldDef("press_diff", F32),
        FieldDef("temperature", I16),
    ),
)
ATTITUDE = MessageDef(
    "ATTITUDE",
    30,
    (
        FieldDef("time_boot_ms", U32),
        FieldDef("roll", F32),
        FieldDef("pitch", F32),
        FieldDef("yaw", F32),
        FieldDef("rollspeed", F32),
        FieldDef("pitchspeed", F32),
        FieldDef("yawspeed", F32),
    ),
)
SERVO_OUTPUT_RAW = MessageDef(
    "SERVO_OUTPUT_RAW",
    36,
    (FieldDef("time_usec", U32), FieldDef("port", U8), *_channels("servo", 8)),
)
RC_CHANNELS_OVERRIDE = MessageDef(
    "RC_CHANNELS_OVERRIDE",
    70,
    (
        FieldDef("target_system", U8),
        FieldDef("target_component", U8),
        *_channels("chan", 8),
    ),
)
COMMAND_LONG = MessageDef(
    "COMMAND_LONG",
    76,
    (
        FieldDef("target_system", U8),
        FieldDef("target_component", U8),
        FieldDef("command", U16),
        FieldDef("confirmation", U8),
        *[FieldDef(f"param{i}", F32) for i in range(1, 8)],
    ),
)
COMMAND_ACK = MessageDef(
    "COMMAND_ACK",
    77,
    (FieldDef("command", U16), FieldDef("result", U8)),
)

REGISTRY = Registry(
    [
        HEARTBEAT,
        SCALED_PRESSURE,
        ATTITUDE,
        SERVO_OUTPUT_RAW,
        RC_CHANNELS_OVERRIDE,
        COMMAND_LONG,
        COMMAND_ACK,
    ]
)


def make_message(name, registry=REGISTRY, **values):
    """Build a Message for a registry definition; every field must be given."""
    defn = registry.by_name(name)
    missing = [f.name for f in defn.fields if f.name not in values]
    if missing:
        raise MissingFieldValue(f"{name}: missing value(s) for {', '.join(missing)}")
    unknown = set(values) - {f.name for f in defn.fields}
    if unknown:
        raise ValueError(f"{name}: unknown field(s) {', '.join(sorted(unknown))}")
    return Message(defn, dict(values))


def encode_frame(msg, seq, sys_id, comp_id):
    """
    Encode a message into a complete MAVLink v1 frame.

    Args:
        msg (Message): The message to encode.
        seq (int): Packet sequence number, 0-255.
        sys_id (int): Sender system id, 0-255.
        comp_id (int): Sender component id, 0-255.

    Returns:
        bytes: 8 + payload_len bytes, checksum low byte first.
    """
    for label, value in (("seq", seq), ("sys_id", sys_id), ("comp_id", comp_id)):
        if not 0 <= value <= 255:
            raise ValueError(f"{label} {value} outside 0-255")
    payload = msg.defn.pack(msg.values)
    header = bytes([len(payload), seq, sys_id, comp_id, msg.defn.msg_id])
    crc = crc16_accumulate(header + payload)
    crc = crc16_accumulate(bytes([msg.defn.crc_extra]), crc)
    return bytes([MAGIC]) + header + payload + struct.pack("<H", crc)


class MavEncoder:
    """Encoder for one outbound stream; the sequence number wraps mod 256."""

    def __init__(self, sys_id, comp_id):
        self.sys_id = sys_id
        self.comp_id = comp_id
        self.seq = 0

    def encode(self, msg):
        frame = encode_frame(msg, self.seq, self.sys_id, self.comp_id)
        self.seq = (self.seq + 1) % 256
        return frame


class DiagnosticKind(Enum):
    """Non-fatal decoder faults."""

    CRC_MISMATCH = "CrcMismatch"
    UNKNOWN_MSG_ID = "UnknownMsgId"
    TRUNCATED_FRAME = "TruncatedFrame"


class Diagnostic(NamedTuple):
    kind: DiagnosticKind
    msg_id: Optional[int]
    detail: str


@dataclass(frozen=True)
class ParserState:
    """Bytes held back until a frame can be judged complete."""

    pending: bytes = b""


class DecodeResult(NamedTuple):
    messages: list
    diagnostics: list
    state: ParserState


def decode_stream(buffer, state=None, registry=REGISTRY):
    """
    Decode MAVLink v1 frames from a chunk of a byte stream.

    Any split of a stream into chunks yields the same message sequence.
    Faulty frames are dropped with a diagnostic and scanning resumes at the
    next magic byte after the rejected frame start.

    Args:
        buffer (bytes): Newly received bytes.
        state (ParserState): State returned by the previous call, or None.
        registry (Registry): Known message definitions.

    Returns:
        DecodeResult: (messages, diagnostics, state for the next call)
    """
    data = (state.pending if state else b"") + bytes(buffer)
    n = len(data)
    messages = []
    diagnostics = []
    pos = 0
    while True:
        start = data.find(MAGIC, pos)
        if start < 0:
            pos = n
            break
        if n - start < HEADER_LEN:
            pos = start
            break
        payload_len = data[start + 1]
        msg_id = data[start + 5]
        defn = registry.get(msg_id)
        if defn is not None and payload_len != defn.payload_size:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.CRC_MISMATCH,
                    msg_id,
                    f"payload length {payload_len}, {defn.name} expects {defn.payload_size}",
                )
            )
            pos = start + 1
            continue
        end = start + payload_len + FRAME_OVERHEAD
        if end > n:
            pos = start
            break
        if defn is None:
            diagnostics.append(
                Diagnostic(DiagnosticKind.UNKNOWN_MSG_ID, msg_id, f"{payload_len} byte payload discarded")
            )
            pos = end
            continue
        crc = crc16_accumulate(data[start + 1:end - 2])
        crc = crc16_accumulate(bytes([defn.crc_extra]), crc)
        received = data[end - 2] | (data[end - 1] << 8)
        if crc != received:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.CRC_MISMATCH,
                    msg_id,
                    f"{defn.name}: checksum 0x{received:04x}, computed 0x{crc:04x}",
                )
            )
            pos = start + 1
            continue
        header = FrameHeader(data[start + 2], data[start + 3], data[start + 4])
        values = defn.unpack(data[start + HEADER_LEN:end - 2])
        messages.append(Message(defn, values, header))
        pos = end

    for diag in diagnostics:
        logging.debug("decoder: %s (msg_id=%s) %s", diag.kind.value, diag.msg_id, diag.detail)
    return DecodeResult(messages, diagnostics, ParserState(data[pos:]))


def flush(state):
    """Report bytes still held by the parser at end of stream."""
    if state is None or not state.pending:
        return []
    return [
        Diagnostic(
            DiagnosticKind.TRUNCATED_FRAME,
            None,
            f"{len(state.pending)} byte(s) pending at end of stream",
        )
    ]


def load_golden(path):
    """Read a golden-vector file: one frame per line, lowercase hex."""
    frames = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            frames.append(bytes.fromhex(line))
    return frames


def dump_golden(frames):
    """Format frames in the golden-vector layout."""
    return "".join(frame.hex() + "\n" for frame in frames)
