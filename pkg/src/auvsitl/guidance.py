"""
Companion-computer guidance.

Turns delayed detections into motion: the centre of the chosen bounding box is
compared with the frame centre, classified as Left/Right/Above/Below/Exact
front, and mapped to one motion primitive sent as an RC override. A small
mission state machine sequences gate passage, flare touch and surfacing.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum, auto
from typing import NamedTuple, Optional

from auvsitl import mavproto
from auvsitl.fcu import RcChannels
from auvsitl.percept import CameraIntrinsics, Detection

NEUTRAL = 1500


class Horizontal(Enum):
    LEFT = "Left"
    RIGHT = "Right"
    CENTERED = "Centered"


class Vertical(Enum):
    ABOVE = "Above"
    BELOW = "Below"
    CENTERED = "Centered"


class Direction(NamedTuple):
    """Where the target sits relative to the frame centre."""

    horizontal: Horizontal
    vertical: Vertical

    @property
    def exact_front(self):
        return self.horizontal == Horizontal.CENTERED and self.vertical == Vertical.CENTERED


class Primitive(Enum):
    """Motion function codes issued by the main loop."""

    HOLD = auto()
    ARM = auto()
    DISARM = auto()
    SURGE_FORWARD = auto()
    SURGE_BACKWARD = auto()
    SWAY_LEFT = auto()
    SWAY_RIGHT = auto()
    HEAVE_UP = auto()
    DIVE = auto()
    YAW_SEARCH = auto()


class Phase(Enum):
    IDLE = "Idle"
    SEARCH_GATE = "SearchGate"
    ALIGN_GATE = "AlignGate"
    PASS_GATE = "PassGate"
    SEARCH_FLARE = "SearchFlare"
    ALIGN_FLARE = "AlignFlare"
    TOUCH_FLARE = "TouchFlare"
    SURFACE = "Surface"
    DISARMED = "Disarmed"


SEARCH_LABEL = {Phase.SEARCH_GATE: "gate", Phase.SEARCH_FLARE: "flare"}
ALIGN_LABEL = {Phase.ALIGN_GATE: "gate", Phase.ALIGN_FLARE: "flare"}
NEXT_ALIGN = {Phase.SEARCH_GATE: Phase.ALIGN_GATE, Phase.SEARCH_FLARE: Phase.ALIGN_FLARE}
FALLBACK_SEARCH = {Phase.ALIGN_GATE: Phase.SEARCH_GATE, Phase.ALIGN_FLARE: Phase.SEARCH_FLARE}


@dataclass(frozen=True)
class GuidanceConfig:
    """
    Tuning of the guidance loop. Only the 0.75 score threshold is a measured
    vehicle setting; the rest are defaults that make the default scenario
    converge.
    """

    score_threshold: float = 0.75
    deadband_px: float = 30.0
    pwm_step: int = 150
    confirm_frames: int = 3
    align_frames: int = 10
    pass_duration: float = 8.0
    search_yaw_pwm: int = 1550
    lost_timeout: float = 5.0
    stale_after: float = 1.0
    touch_box_height: float = 500.0
    touch_duration: float = 3.0
    surface_depth: float = 0.2
    arm_retry: float = 1.0
    rate_hz: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError(f"score_threshold must be in (0, 1), got {self.score_threshold}")
        if self.deadband_px <= 0:
            raise ValueError(f"deadband_px must be > 0, got {self.deadband_px}")
        if not 0 < self.pwm_step <= 400:
            raise ValueError(f"pwm_step must be in (0, 400], got {self.pwm_step}")
        if not 1100 <= self.search_yaw_pwm <= 1900:
            raise ValueError(f"search_yaw_pwm must be in [1100, 1900], got {self.search_yaw_pwm}")
        if self.confirm_frames < 1 or self.align_frames < 1:
            raise ValueError("confirm_frames and align_frames must be >= 1")
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be > 0, got {self.rate_hz}")


@dataclass(frozen=True)
class MissionState:
    """
    Mission progress. Only mission_step and rearm produce new values.

    Attributes:
        phase (Phase): Current phase.
        phase_entry_t (float): Time the phase was entered.
        sightings (int): Consecutive ticks with the searched object in view.
        centered (int): Consecutive guidance ticks classified Exact front.
        last_seen_t (float): Last tick the aligned object was seen.
        last_arm_tx (float): Last time an arm or disarm command was sent.
    """

    phase: Phase = Phase.IDLE
    phase_entry_t: float = 0.0
    sightings: int = 0
    centered: int = 0
    last_seen_t: float = 0.0
    last_arm_tx: float = float("-inf")


class GuidanceOutput(NamedTuple):
    primitive: Primitive
    rc: RcChannels
    commands: list
    target: Optional[Detection] = None
    offset: Optional[tuple] = None
    direction: Optional[Direction] = None


def center_offset(det, intrinsics=None):
    """Pixel offset of the box centre from the frame centre (x right, y down)."""
    intrinsics = intrinsics or CameraIntrinsics()
    u, v = det.center
    return u - intrinsics.cx, v - intrinsics.cy


def classify(dx, dy, deadband):
    if deadband <= 0:
        raise ValueError(f"deadband must be > 0, got {deadband}")
    if dx < -deadband:
        horizontal = Horizontal.LEFT
    elif dx > deadband:
        horizontal = Horizontal.RIGHT
    else:
        horizontal = Horizontal.CENTERED
    if dy < -deadband:
        vertical = Vertical.ABOVE
    elif dy > deadband:
        vertical = Vertical.BELOW
    else:
        vertical = Vertical.CENTERED
    return Direction(horizontal, vertical)


def direction_to_primitive(direction):
    """One primitive per tick; sway is corrected before heave."""
    if direction.horizontal == Horizontal.LEFT:
        return Primitive.SWAY_LEFT
    if direction.horizontal == Horizontal.RIGHT:
        return Primitive.SWAY_RIGHT
    if direction.vertical == Vertical.ABOVE:
        return Primitive.HEAVE_UP
    if direction.vertical == Vertical.BELOW:
        return Primitive.DIVE
    return Primitive.SURGE_FORWARD


def primitive_to_rc(primitive, config=None):
    """
    RC override channels for a primitive (or a Direction).
    Channels a primitive does not use stay at 1500; ch1, ch7, ch8 are never moved.
    """
    config = config or GuidanceConfig()
    if isinstance(primitive, Direction):
        primitive = direction_to_primitive(primitive)
    step = config.pwm_step
    channels = {
        Primitive.SWAY_LEFT: {"ch6": NEUTRAL - step},
        Primitive.SWAY_RIGHT: {"ch6": NEUTRAL + step},
        Primitive.HEAVE_UP: {"ch3": NEUTRAL + step},
        Primitive.DIVE: {"ch3": NEUTRAL - step},
        Primitive.SURGE_FORWARD: {"ch5": NEUTRAL + step},
        Primitive.SURGE_BACKWARD: {"ch5": NEUTRAL - step},
        Primitive.YAW_SEARCH: {"ch4": config.search_yaw_pwm},
    }.get(primitive, {})
    return RcChannels()._replace(**channels)


def rc_override_message(rc, target_system=1, target_component=1):
    chans = {f"chan{i}_raw": value for i, value in enumerate(rc, start=1)}
    return mavproto.make_message(
        "RC_CHANNELS_OVERRIDE",
        target_system=target_system,
        target_component=target_component,
        **chans,
    )


def arm_message(arm, target_system=1, target_component=1):
    params = {f"param{i}": 0.0 for i in range(1, 8)}
    params["param1"] = 1.0 if arm else 0.0
    return mavproto.make_message(
        "COMMAND_LONG",
        target_system=target_system,
        target_component=target_component,
        command=mavproto.MAV_CMD_COMPONENT_ARM_DISARM,
        confirmation=0,
        **params,
    )


def select_target(detections, label, now, config):
    """
    Largest confident, fresh detection of a label, or None.

    Scores must be strictly above the threshold; detections older than
    stale_after are ignored. Ties on area go to the lowest xmin.
    """
    candidates = [
        d
        for d in detections
        if d.label == label
        and d.score > config.score_threshold
        and now - d.t_capture <= config.stale_after
    ]
    if not candidates:
        return None
    return max(candidates, key=lambda d: (d.area, -d.box[0]))


def _enter(ms, phase, now):
    logging.info("guidance: %s -> %s at t=%.2fs", ms.phase.value, phase.value, now)
    return replace(ms, phase=phase, phase_entry_t=now, sightings=0, centered=0, last_seen_t=now)


def rearm(ms, now):
    """Leave Disarmed explicitly; the mission restarts from Idle."""
    return _enter(ms, Phase.IDLE, now)


# pylint: disable=too-many-arguments,too-many-branches,too-many-statements
def mission_step(ms, detections, depth, now, config=None, armed=True, intrinsics=None):
    """
    Advance the mission by one guidance tick.

    Args:
        ms (MissionState): Current mission state.
        detections (list): Detections delivered since the previous tick.
        depth (float): Latest depth estimate, m.
        now (float): Current time, s.
        config (GuidanceConfig): Guidance tuning.
        armed (bool): Whether the flight controller reports armed.
        intrinsics (CameraIntrinsics): Frame geometry for the centre offset.

    Returns:
        tuple: (new MissionState, GuidanceOutput)
    """
    config = config or GuidanceConfig()
    phase = ms.phase
    commands = []
    primitive = Primitive.HOLD
    target = None
    offset = None
    direction = None

    if phase not in (Phase.IDLE, Phase.DISARMED) and not armed:
        logging.warning("guidance: vehicle reported disarmed during %s", phase.value)
        ms = _enter(ms, Phase.DISARMED, now)
        phase = ms.phase

    if phase == Phase.IDLE:
        if armed:
            ms = _enter(ms, Phase.SEARCH_GATE, now)
        else:
            primitive = Primitive.ARM
            if now - ms.last_arm_tx >= config.arm_retry:
                commands.append(arm_message(True))
                ms = replace(ms, last_arm_tx=now)

    elif phase in SEARCH_LABEL:
        target = select_target(detections, SEARCH_LABEL[phase], now, config)
        sightings = ms.sightings + 1 if target else 0
        ms = replace(ms, sightings=sightings)
        if sightings >= config.confirm_frames:
            ms = _enter(ms, NEXT_ALIGN[phase], now)
        else:
            primitive = Primitive.YAW_SEARCH

    elif phase in ALIGN_LABEL:
        target = select_target(detections, ALIGN_LABEL[phase], now, config)
        if target is None:
            if now - ms.last_seen_t > config.lost_timeout:
                ms = _enter(ms, FALLBACK_SEARCH[phase], now)
        elif phase == Phase.ALIGN_FLARE and target.height > config.touch_box_height:
            ms = _enter(ms, Phase.TOUCH_FLARE, now)
            primitive = Primitive.SURGE_FORWARD
        else:
            offset = center_offset(target, intrinsics)
            direction = classify(offset[0], offset[1], config.deadband_px)
            centered = ms.centered + 1 if direction.exact_front else 0
            ms = replace(ms, centered=centered, last_seen_t=now)
            primitive = direction_to_primitive(direction)
            if phase == Phase.ALIGN_GATE and centered >= config.align_frames:
                ms = _enter(ms, Phase.PASS_GATE, now)
                primitive = Primitive.SURGE_FORWARD

    elif phase == Phase.PASS_GATE:
        primitive = Primitive.SURGE_FORWARD
        if now - ms.phase_entry_t >= config.pass_duration:
            ms = _enter(ms, Phase.SEARCH_FLARE, now)

    elif phase == Phase.TOUCH_FLARE:
        primitive = Primitive.SURGE_FORWARD
        if now - ms.phase_entry_t >= config.touch_duration:
            ms = _enter(ms, Phase.SURFACE, now)
            primitive = Primitive.HEAVE_UP

    elif phase == Phase.SURFACE:
        primitive = Primitive.HEAVE_UP
        if depth < config.surface_depth:
            ms = replace(_enter(ms, Phase.DISARMED, now), last_arm_tx=now)
            primitive = Primitive.DISARM
            commands.append(arm_message(False))

    elif phase == Phase.DISARMED and armed:
        # the controller has not confirmed yet
        primitive = Primitive.DISARM
        if now - ms.last_arm_tx >= config.arm_retry:
            commands.append(arm_message(False))
            ms = replace(ms, last_arm_tx=now)

    rc = primitive_to_rc(primitive, config)
    if ms.phase != Phase.DISARMED or armed:
        commands.insert(0, rc_override_message(rc))
    return ms, GuidanceOutput(primitive, rc, commands, target, offset, direction)
