"""
Scenario files.

A scenario is a JSON object describing the vehicle, its starting pose, the
link, controller and guidance tuning, the camera model and the objects in the
water. Every section is optional except "objects"; absent keys take the
defaults documented in docs/scenario_schema.md. Unknown keys are logged and
ignored.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np

from auvsitl import hydro
from auvsitl.fcu import PidGains
from auvsitl.guidance import GuidanceConfig
from auvsitl.link import LATENCY_PRESETS, LinkConfig
from auvsitl.percept import CameraIntrinsics, PerceptConfig, SceneObject

DEFAULT_UDP_PORT = 14550


class ParseError(ValueError):
    """The scenario text is not valid JSON."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(ValueError):
    """One or more scenario fields violate their constraints."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class InitialPose(NamedTuple):
    """Starting pose; attitude in radians."""

    position: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    attitude: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    v_body: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    w_body: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_state(self):
        return hydro.VehicleState(
            np.array(self.position, dtype=float),
            np.array(self.attitude, dtype=float),
            np.array(self.v_body, dtype=float),
            np.array(self.w_body, dtype=float),
            0.0,
        )


@dataclass(frozen=True)
class Scenario:
    """
    A fully validated simulation setup.

    Attributes:
        name (str): Short label used in reports.
        description (str): Free text.
        seed (int): Base seed of every random stream.
        duration (float): Simulated seconds, > 0.
        vehicle (VehicleParams): Physical constants.
        initial (InitialPose): Starting pose.
        geometry (ThrusterGeometry): Thruster layout.
        link (LinkConfig): Transport parameters.
        gains (PidGains): Flight-controller gains.
        rc_timeout (float): RC override staleness timeout, s.
        guidance (GuidanceConfig): Guidance tuning.
        percept (PerceptConfig): Camera and detector model.
        objects (tuple): SceneObject entries.
        udp (tuple): (host, port) of the telemetry mirror, or None.
    """

    name: str = "scenario"
    description: str = ""
    seed: int = 0
    duration: float = 120.0
    vehicle: hydro.VehicleParams = field(default_factory=hydro.VehicleParams)
    initial: InitialPose = InitialPose()
    geometry: hydro.ThrusterGeometry = field(default_factory=hydro.ThrusterGeometry.default)
    link: LinkConfig = field(default_factory=LinkConfig)
    gains: PidGains = field(default_factory=PidGains)
    rc_timeout: float = 1.0
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    percept: PerceptConfig = field(default_factory=PerceptConfig)
    objects: Tuple[SceneObject, ...] = ()
    udp: Optional[Tuple[str, int]] = None

    def with_overrides(self, seed=None, duration=None, udp=None):
        """Copy with command-line overrides applied; the link seed follows the scenario seed."""
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
            changes["link"] = replace(self.link, seed=int(seed))
        if duration is not None:
            if not duration > 0:
                raise ValidationError([f"duration: must be > 0, got {duration}"])
            changes["duration"] = float(duration)
        if udp is not None:
            changes["udp"] = parse_udp(udp)
        return replace(self, **changes)


def parse_udp(text):
    """'host:port' or 'host' (port 14550) to a (host, port) tuple."""
    host, _, port = str(text).rpartition(":")
    if not host:
        host, port = port, str(DEFAULT_UDP_PORT)
    try:
        port = int(port)
    except ValueError as e:
        raise ValidationError([f"udp: invalid port in '{text}'"]) from e
    if not 0 < port < 65536:
        raise ValidationError([f"udp: port {port} outside 1-65535"])
    return host, port


def _number(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {value!r}")
    return float(value)


def _integer(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _optional_number(value):
    return None if value is None else _number(value)


def _string(value):
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _vector(size):
    def convert(value):
        if not isinstance(value, list) or len(value) != size:
            raise ValueError(f"expected a list of {size} numbers")
        return tuple(_number(v) for v in value)

    return convert


def _angles_deg(value):
    return tuple(math.radians(v) for v in _vector(3)(value))


def _matrix(rows, cols):
    def convert(value):
        if not isinstance(value, list) or len(value) != rows:
            raise ValueError(f"expected {rows} rows of {cols} numbers")
        return [list(_vector(cols)(row)) for row in value]

    return convert


VEHICLE_KEYS = {
    "mass": _number,
    "inertia": _vector(3),
    "buoyancy": _optional_number,
    "cob_offset": _vector(3),
    "linear_drag": _vector(6),
    "quadratic_drag": _vector(6),
    "max_thrust": _number,
    "deadband_us": _number,
}
INITIAL_KEYS = {
    "position": _vector(3),
    "attitude_deg": _angles_deg,
    "v_body": _vector(3),
    "w_body": _vector(3),
}
THRUSTER_KEYS = {"positions": _matrix(6, 3), "directions": _matrix(6, 3)}
LINK_KEYS = {
    "preset": _string,
    "latency": _number,
    "bit_corruption_prob": _number,
    "heartbeat_interval": _number,
    "failsafe_timeout": _number,
}
FCU_KEYS = {
    "roll_rate_p": _number,
    "yaw_rate_p": _number,
    "pitch_coupling": _number,
    "roll_rate_d": _number,
    "rc_timeout": _number,
}
GUIDANCE_KEYS = {
    "score_threshold": _number,
    "deadband_px": _number,
    "pwm_step": _integer,
    "confirm_frames": _integer,
    "align_frames": _integer,
    "pass_duration": _number,
    "search_yaw_pwm": _integer,
    "lost_timeout": _number,
    "stale_after": _number,
    "touch_box_height": _number,
    "touch_duration": _number,
    "surface_depth": _number,
    "arm_retry": _number,
    "rate_hz": _number,
}
CAMERA_KEYS = {"width": _integer, "height": _integer, "hfov_deg": _number, "fps": _number}
PERCEPT_KEYS = {
    "latency": _number,
    "score_base": _number,
    "score_per_m": _number,
    "score_per_rad": _number,
    "noise": _number,
    "min_depth": _number,
    "max_range": _number,
    "false_positive_rate": _number,
    **CAMERA_KEYS,
}
OBJECT_KEYS = {
    "type": _string,
    "position": _vector(3),
    "yaw_deg": _number,
    "width": _number,
    "height": _number,
    "radius": _number,
}
TOP_LEVEL_KEYS = {
    "name",
    "description",
    "seed",
    "duration",
    "vehicle",
    "initial",
    "thrusters",
    "link",
    "fcu",
    "guidance",
    "percept",
    "objects",
    "udp",
}


def _section(data, key, schema, errors):
    """Convert the known keys of one section; unknown keys only warn."""
    raw = data.get(key, {})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errors.append(f"{key}: expected an object")
        return {}
    out = {}
    for name, value in raw.items():
        if name not in schema:
            logging.warning("scenario: ignoring unknown key '%s.%s'", key, name)
            continue
        try:
            out[name] = schema[name](value)
        except ValueError as e:
            errors.append(f"{key}.{name}: {e}")
    return out


def _build(label, factory, kwargs, errors):
    try:
        return factory(**kwargs)
    except ValueError as e:
        errors.append(f"{label}: {e}")
        return None


def _objects(data, errors):
    if "objects" not in data:
        errors.append("objects: required (may be an empty list)")
        return ()
    raw = data["objects"]
    if not isinstance(raw, list):
        errors.append("objects: expected a list")
        return ()
    objects = []
    for i, item in enumerate(raw):
        label = f"objects[{i}]"
        if not isinstance(item, dict):
            errors.append(f"{label}: expected an object")
            continue
        before = len(errors)
        values = _section({label: item}, label, OBJECT_KEYS, errors)
        if len(errors) > before:
            continue
        kind = values.get("type")
        if "position" not in values:
            errors.append(f"{label}.position: required")
            continue
        if kind == "gate":
            obj = _build(
                label,
                SceneObject.gate,
                {
                    "position": values["position"],
                    "yaw": math.radians(values.get("yaw_deg", 0.0)),
                    "width": values.get("width", 1.5),
                    "height": values.get("height", 1.0),
                },
                errors,
            )
        elif kind == "flare":
            obj = _build(
                label,
                SceneObject.flare,
                {
                    "position": values["position"],
                    "radius": values.get("radius", 0.08),
                    "height": values.get("height", 1.2),
                },
                errors,
            )
        else:
            errors.append(f"{label}.type: expected 'gate' or 'flare', got {kind!r}")
            continue
        if obj is not None:
            objects.append(obj)
    return tuple(objects)


def _link(values, seed, errors):
    preset = values.pop("preset", "wired")
    if preset not in LATENCY_PRESETS:
        errors.append(f"link.preset: expected one of {sorted(LATENCY_PRESETS)}, got {preset!r}")
        preset = "wired"
    values.setdefault("latency", LATENCY_PRESETS[preset])
    return _build("link", LinkConfig, {**values, "seed": seed}, errors)


# pylint: disable=too-many-locals
def scenario_from_dict(data):
    """
    Validate a decoded scenario object.

    Raises:
        ValidationError: listing every offending field.
    """
    if not isinstance(data, dict):
        raise ValidationError(["scenario: root element is not a JSON object"])
    errors = []
    for key in data:
        if key not in TOP_LEVEL_KEYS:
            logging.warning("scenario: ignoring unknown key '%s'", key)

    top = {}
    for key, convert in (
        ("name", _string),
        ("description", _string),
        ("seed", _integer),
        ("duration", _number),
    ):
        if key in data:
            try:
                top[key] = convert(data[key])
            except ValueError as e:
                errors.append(f"{key}: {e}")
    seed = top.get("seed", 0)
    if seed < 0:
        errors.append(f"seed: must be >= 0, got {seed}")
    duration = top.get("duration", 120.0)
    if not duration > 0:
        errors.append(f"duration: must be > 0, got {duration}")

    vehicle = _build("vehicle", hydro.VehicleParams, _section(data, "vehicle", VEHICLE_KEYS, errors), errors)
    initial = _section(data, "initial", INITIAL_KEYS, errors)
    if "attitude_deg" in initial:
        initial["attitude"] = initial.pop("attitude_deg")
    thrusters = _section(data, "thrusters", THRUSTER_KEYS, errors)
    geometry = hydro.ThrusterGeometry.default()
    if thrusters:
        if set(thrusters) != set(THRUSTER_KEYS):
            errors.append("thrusters: both 'positions' and 'directions' are required")
        else:
            geometry = _build("thrusters", hydro.ThrusterGeometry, thrusters, errors)
    link = _link(_section(data, "link", LINK_KEYS, errors), seed, errors)
    fcu = _section(data, "fcu", FCU_KEYS, errors)
    rc_timeout = fcu.pop("rc_timeout", 1.0)
    if not rc_timeout > 0:
        errors.append(f"fcu.rc_timeout: must be > 0, got {rc_timeout}")
    gains = _build("fcu", PidGains, fcu, errors)
    guidance = _build("guidance", GuidanceConfig, _section(data, "guidance", GUIDANCE_KEYS, errors), errors)
    percept_values = _section(data, "percept", PERCEPT_KEYS, errors)
    camera = _build(
        "percept",
        CameraIntrinsics,
        {k: percept_values.pop(k) for k in CAMERA_KEYS if k in percept_values},
        errors,
    )
    percept = None
    if camera is not None:
        percept = _build("percept", PerceptConfig, {**percept_values, "camera": camera}, errors)
    objects = _objects(data, errors)
    udp = None
    if data.get("udp") is not None:
        try:
            udp = parse_udp(data["udp"])
        except ValidationError as e:
            errors.extend(e.errors)

    if errors:
        raise ValidationError(errors)
    return Scenario(
        name=top.get("name", "scenario"),
        description=top.get("description", ""),
        seed=seed,
        duration=duration,
        vehicle=vehicle,
        initial=InitialPose(**initial),
        geometry=geometry,
        link=link,
        gains=gains,
        rc_timeout=rc_timeout,
        guidance=guidance,
        percept=percept,
        objects=objects,
        udp=udp,
    )


def load_scenario(text):
    """
    Parse and validate scenario JSON text.

    Raises:
        ParseError: with the line and column of the JSON fault.
        ValidationError: listing every offending field.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from e
    return scenario_from_dict(data)


def load_scenario_file(path):
    """Load a scenario file; the file stem names scenarios without a "name" key."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw.count(b"\n", 0, e.start) + 1
        column = e.start - raw.rfind(b"\n", 0, e.start)
        raise ParseError("not UTF-8 text", line, column) from e
    scenario = load_scenario(text)
    if "name" not in json.loads(text):
        scenario = replace(scenario, name=path.stem)
    return scenario


def default_scenario():
    """Gate 6 m ahead, 1 m to the right and 0.5 m deeper than the start; flare beyond it."""
    return Scenario(
        name="default",
        description="gate then flare, desk-scale mission",
        objects=(
            SceneObject.gate((6.0, 1.0, 1.5)),
            SceneObject.flare((16.0, 1.0, 1.5)),
        ),
    )
