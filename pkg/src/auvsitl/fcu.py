"""
Simulated flight controller.

Consumes MAVLink commands from the companion computer (arm/disarm, RC
override), runs rate stabilization, mixes axis demands into six thruster
PWM outputs and emits telemetry.

Axis/channel map follows the ArduSub convention:
ch2 roll, ch3 heave (+up), ch4 yaw, ch5 surge, ch6 sway.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import numpy as np

from auvsitl import hydro
from auvsitl import mavproto
from auvsitl.link import LinkState

SURFACE_PRESSURE_HPA = 1013.25
WATER_DENSITY = 1000.0
# rho * g * h, in hPa per metre of depth
HPA_PER_METRE = WATER_DENSITY * hydro.GRAVITY / 100.0

RC_RELEASED = 0
RC_MIN = hydro.PWM_MIN
RC_MAX = hydro.PWM_MAX

ATTITUDE_PERIOD = 0.1
PRESSURE_PERIOD = 0.1
SERVO_PERIOD = 0.2
HEARTBEAT_PERIOD = 1.0

FCU_SYS_ID = 1
FCU_COMP_ID = 1


class InvalidRcChannels(ValueError):
    """An RC override channel outside [1100, 1900] and not 0."""


class RcChannels(NamedTuple):
    """Eight RC override channels in us; 0 means released."""

    ch1: int = 1500
    ch2: int = 1500
    ch3: int = 1500
    ch4: int = 1500
    ch5: int = 1500
    ch6: int = 1500
    ch7: int = 1500
    ch8: int = 1500

    @classmethod
    def validated(cls, values):
        values = [int(v) for v in values]
        if len(values) != 8:
            raise InvalidRcChannels(f"expected 8 channels, got {len(values)}")
        for i, v in enumerate(values, start=1):
            if v != RC_RELEASED and not RC_MIN <= v <= RC_MAX:
                raise InvalidRcChannels(f"ch{i}={v} outside [{RC_MIN}, {RC_MAX}] and not 0")
        return cls(*values)


@dataclass(frozen=True)
class PidGains:
    """
    Rate-loop gains. roll_rate_p, yaw_rate_p and pitch_coupling are the
    hand-tuned vehicle values; roll_rate_d is added damping for the simulator.
    """

    roll_rate_p: float = 0.100
    yaw_rate_p: float = 0.00
    pitch_coupling: float = 1.1
    roll_rate_d: float = 0.02

    def __post_init__(self):
        for name in ("roll_rate_p", "yaw_rate_p", "pitch_coupling", "roll_rate_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _clamp(value, lo=-1.0, hi=1.0):
    return min(hi, max(lo, value))


class AxisCommands(NamedTuple):
    """Normalized axis demands in [-1, 1]."""

    surge: float = 0.0
    sway: float = 0.0
    heave: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0

    def clamped(self):
        return AxisCommands(*(_clamp(v) for v in self))


NEUTRAL_PWM = (hydro.PWM_NEUTRAL,) * 6


@dataclass
class FcuState:
    """
    Mutable flight-controller state.

    Attributes:
        armed (bool): Motors enabled.
        rc (RcChannels): Last received override.
        gains (PidGains): Stabilization gains.
        last_rc_rx (float): Time of the last RC override.
        seq (int): Outbound frame sequence, mod 256.
        last_roll_rate (float): Previous roll rate for the derivative term.
        pwm (tuple): Last mixer output.
        disarm_reason (str): Why the vehicle last disarmed, if it did.
    """

    armed: bool = False
    rc: RcChannels = field(default_factory=RcChannels)
    gains: PidGains = field(default_factory=PidGains)
    last_rc_rx: float = -math.inf
    seq: int = 0
    last_roll_rate: float = 0.0
    pwm: Tuple[int, ...] = NEUTRAL_PWM
    disarm_reason: str = ""
    last_heartbeat_rx: float = -math.inf
    last_tx: dict = field(default_factory=dict)


def rc_to_axes(rc):
    """Map RC channels to normalized axis demands; released channels give 0."""

    def norm(pwm):
        if pwm == RC_RELEASED:
            return 0.0
        return (pwm - hydro.PWM_NEUTRAL) / hydro.PWM_HALF_RANGE

    return AxisCommands(
        surge=norm(rc.ch5),
        sway=norm(rc.ch6),
        heave=norm(rc.ch3),
        yaw=norm(rc.ch4),
        roll=norm(rc.ch2),
    )


def stabilize(gains, rates, axes, dt, last_roll_rate=0.0):
    """
    Apply rate-loop corrections to the pilot demands.

    Args:
        gains (PidGains): Loop gains.
        rates (sequence): Measured body rates (p, q, r), rad/s.
        axes (AxisCommands): Demands before correction.
        dt (float): Loop period, > 0.
        last_roll_rate (float): Roll rate at the previous call.

    Returns:
        AxisCommands: Corrected and clamped demands. Pitch is unactuated.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    p, _, r = rates
    roll_accel = (p - last_roll_rate) / dt
    roll = axes.roll - gains.roll_rate_p * p - gains.roll_rate_d * roll_accel
    yaw = axes.yaw - gains.yaw_rate_p * r
    return axes._replace(roll=roll, yaw=yaw).clamped()


def mix_commands(axes, allocation):
    """Per-thruster normalized commands before clamping."""
    return allocation @ np.asarray(axes, dtype=float)


def mix(axes, allocation, armed=True):
    """
    Mix axis demands into six thruster PWM values.

    Args:
        axes (AxisCommands): Clamped demands.
        allocation (ndarray): 6x5 matrix from hydro.allocation_matrix.
        armed (bool): Disarmed output is neutral on every thruster.

    Returns:
        tuple: Six PWM values in [1100, 1900].
    """
    if not armed:
        return NEUTRAL_PWM
    cmds = np.clip(mix_commands(axes, allocation), -1.0, 1.0)
    return tuple(int(round(hydro.PWM_NEUTRAL + hydro.PWM_HALF_RANGE * c)) for c in cmds)


def pitch_restoring_estimate(attitude, params, gains):
    """Passive pitch restoring moment (N*m), scaled by the pitch coupling factor."""
    pitch = attitude[1]
    lever = -params.cob_offset[2]
    return -gains.pitch_coupling * lever * params.buoyancy_force * math.sin(pitch)


def depth_to_pressure(depth):
    """Absolute pressure (hPa) at a depth in metres."""
    return SURFACE_PRESSURE_HPA + HPA_PER_METRE * depth


def pressure_to_depth(press_abs):
    return (press_abs - SURFACE_PRESSURE_HPA) / HPA_PER_METRE


class FlightController:
    """
    Pixhawk stand-in running a single stabilized-manual mode.

    Args:
        gains (PidGains): Stabilization gains.
        geometry (ThrusterGeometry): Thruster layout for the allocation matrix.
        params (VehicleParams): Used by diagnostics only.
        rc_timeout (float): Seconds after which a stale override is released.
        temperature_cdeg (int): Reported water temperature, 0.01 degC.
        endpoint (LinkEndpoint): Outbound link side; receives heartbeat bookkeeping.
    """

    def __init__(
        self,
        gains=None,
        geometry=None,
        params=None,
        rc_timeout=1.0,
        temperature_cdeg=1500,
        endpoint=None,
    ):
        self.state = FcuState(gains=gains or PidGains())
        self.geometry = geometry or hydro.ThrusterGeometry.default()
        self.params = params or hydro.VehicleParams()
        self.allocation = hydro.allocation_matrix(self.geometry)
        self.rc_timeout = rc_timeout
        self.temperature_cdeg = temperature_cdeg
        self.endpoint = endpoint

    def handle_message(self, msg, now):
        """
        Apply one received message.

        Returns:
            list: Reply messages (COMMAND_ACK for arm/disarm).
        """
        st = self.state
        if msg.name == "COMMAND_LONG" and msg["command"] == mavproto.MAV_CMD_COMPONENT_ARM_DISARM:
            arm = msg["param1"] >= 0.5
            if arm and not st.armed:
                logging.info("fcu: armed at t=%.2fs", now)
                st.disarm_reason = ""
            elif not arm and st.armed:
                logging.info("fcu: disarmed by command at t=%.2fs", now)
                st.disarm_reason = "command"
            st.armed = arm
            return [
                mavproto.make_message(
                    "COMMAND_ACK",
                    command=mavproto.MAV_CMD_COMPONENT_ARM_DISARM,
                    result=mavproto.MAV_RESULT_ACCEPTED,
                )
            ]
        if msg.name == "RC_CHANNELS_OVERRIDE":
            try:
                st.rc = RcChannels.validated(msg[f"chan{i}_raw"] for i in range(1, 9))
            except InvalidRcChannels as e:
                logging.warning("fcu: override rejected: %s", e)
                return []
            st.last_rc_rx = now
            return []
        if msg.name == "HEARTBEAT":
            st.last_heartbeat_rx = max(st.last_heartbeat_rx, now)
            if self.endpoint is not None:
                self.endpoint.note_heartbeat_rx(now)
        return []

    def update(self, vehicle, now, dt, link_state=None):
        """
        Run one control tick: failsafe, RC staleness, stabilization and mixing.

        link_state defaults to the endpoint's failsafe state, or Ok without one.

        Returns:
            tuple: Six PWM outputs for this tick.
        """
        st = self.state
        if link_state is None:
            link_state = self.endpoint.failsafe_state(now) if self.endpoint else LinkState.OK
        if link_state == LinkState.LOST and st.armed:
            logging.warning("fcu: link lost at t=%.2fs, disarming", now)
            st.armed = False
            st.disarm_reason = "link_lost"

        if now - st.last_rc_rx > self.rc_timeout:
            axes = AxisCommands()
        else:
            axes = rc_to_axes(st.rc)
        p = float(vehicle.w_body[0])
        axes = stabilize(st.gains, vehicle.w_body, axes, dt, st.last_roll_rate)
        st.last_roll_rate = p
        st.pwm = mix(axes, self.allocation, st.armed)
        logging.debug(
            "fcu: pitch restoring estimate %.3f N*m",
            pitch_restoring_estimate(vehicle.attitude, self.params, st.gains),
        )
        return st.pwm

    def _due(self, stream, now, period):
        last = self.state.last_tx.get(stream)
        if last is None or now - last >= period - 1e-9:
            self.state.last_tx[stream] = now
            return True
        return False

    def telemetry_tick(self, vehicle, now):
        """
        Telemetry due at this instant: ATTITUDE and SCALED_PRESSURE at 10 Hz,
        SERVO_OUTPUT_RAW at 5 Hz, HEARTBEAT at 1 Hz.
        """
        st = self.state
        out = []
        time_boot_ms = int(round(now * 1000.0)) & 0xFFFFFFFF
        if self._due("heartbeat", now, HEARTBEAT_PERIOD):
            base_mode = mavproto.MAV_MODE_FLAG_CUSTOM_MODE_ENABLED
            if st.armed:
                base_mode |= mavproto.MAV_MODE_FLAG_SAFETY_ARMED
            out.append(
                mavproto.make_message(
                    "HEARTBEAT",
                    type=mavproto.MAV_TYPE_SUBMARINE,
                    autopilot=mavproto.MAV_AUTOPILOT_ARDUPILOTMEGA,
                    base_mode=base_mode,
                    custom_mode=0,
                    system_status=(
                        mavproto.MAV_STATE_ACTIVE if st.armed else mavproto.MAV_STATE_STANDBY
                    ),
                    mavlink_version=mavproto.MAVLINK_VERSION,
                )
            )
        if self._due("attitude", now, ATTITUDE_PERIOD):
            roll, pitch, yaw = (float(a) for a in vehicle.attitude)
            p, q, r = (float(w) for w in vehicle.w_body)
            out.append(
                mavproto.make_message(
                    "ATTITUDE",
                    time_boot_ms=time_boot_ms,
                    roll=roll,
                    pitch=pitch,
                    yaw=yaw,
                    rollspeed=p,
                    pitchspeed=q,
                    yawspeed=r,
                )
            )
        if self._due("pressure", now, PRESSURE_PERIOD):
            depth = vehicle.depth
            out.append(
                mavproto.make_message(
                    "SCALED_PRESSURE",
                    time_boot_ms=time_boot_ms,
                    press_abs=depth_to_pressure(depth),
                    press_diff=HPA_PER_METRE * depth,
                    temperature=self.temperature_cdeg,
                )
            )
        if self._due("servo", now, SERVO_PERIOD):
            servos = {f"servo{i}_raw": st.pwm[i - 1] for i in range(1, 7)}
            servos.update(servo7_raw=0, servo8_raw=0)
            out.append(
                mavproto.make_message(
                    "SERVO_OUTPUT_RAW",
                    time_usec=int(round(now * 1e6)) & 0xFFFFFFFF,
                    port=0,
                    **servos,
                )
            )
        return out

    def encode(self, msg):
        """Frame a message on the controller's outbound stream."""
        frame = mavproto.encode_frame(msg, self.state.seq, FCU_SYS_ID, FCU_COMP_ID)
        self.state.seq = (self.state.seq + 1) % 256
        return frame
