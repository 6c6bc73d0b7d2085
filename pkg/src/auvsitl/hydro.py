"""
Underwater rigid-body dynamics.

Five actuated degrees of freedom (surge, sway, heave, roll, yaw); pitch is
unactuated and held passively by the centre of buoyancy sitting above the
centre of mass. World frame is NED (depth = +z), body frame is FRD.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from auvsitl import wrap_angle

GRAVITY = 9.81
PWM_NEUTRAL = 1500
PWM_MIN = 1100
PWM_MAX = 1900
PWM_HALF_RANGE = 400.0
MAX_PITCH = math.radians(60.0)

# Actuated wrench rows (Fx, Fy, Fz, tau_x, tau_z) of the 6-row wrench map
_ACTUATED_ROWS = [0, 1, 2, 3, 5]


class OutOfRange(ValueError):
    """A PWM value outside the ESC input range."""


class NonFiniteState(RuntimeError):
    """Integration produced NaN/inf or left the supported envelope."""


class AttitudeOutOfEnvelope(NonFiniteState):
    """Pitch reached the Euler-angle envelope limit."""


@dataclass(frozen=True)
class VehicleParams:
    """
    Physical constants of the vehicle. None of them are measured figures;
    they sit near published small-ROV values and can be overridden per scenario.

    Attributes:
        mass (float): kg.
        inertia (tuple): Principal moments (Ixx, Iyy, Izz) in kg*m^2.
        buoyancy (float): Buoyancy force in N; None means neutral (mass * g).
        cob_offset (tuple): Centre of buoyancy relative to CoM, body FRD, m.
        linear_drag (tuple): (u, v, w, p, q, r) linear coefficients.
        quadratic_drag (tuple): (u, v, w, p, q, r) quadratic coefficients.
        max_thrust (float): Thrust at full PWM deflection, N.
        deadband_us (float): PWM half-width around neutral that yields no thrust.
    """

    mass: float = 11.0
    inertia: Tuple[float, float, float] = (0.20, 0.25, 0.30)
    buoyancy: Optional[float] = None
    cob_offset: Tuple[float, float, float] = (0.0, 0.0, -0.02)
    linear_drag: Tuple[float, ...] = (5.0, 20.0, 20.0, 1.0, 1.0, 2.0)
    quadratic_drag: Tuple[float, ...] = (15.0, 60.0, 60.0, 0.5, 0.5, 2.0)
    max_thrust: float = 40.0
    deadband_us: float = 25.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if len(self.inertia) != 3 or min(self.inertia) <= 0:
            raise ValueError(f"inertia must be three positive values, got {self.inertia}")
        if len(self.linear_drag) != 6 or len(self.quadratic_drag) != 6:
            raise ValueError("linear_drag and quadratic_drag need six coefficients each")
        if min(self.linear_drag) < 0 or min(self.quadratic_drag) < 0:
            raise ValueError("drag coefficients must be >= 0")
        if self.buoyancy is not None and self.buoyancy < 0:
            raise ValueError(f"buoyancy must be >= 0, got {self.buoyancy}")
        if self.max_thrust <= 0:
            raise ValueError(f"max_thrust must be > 0, got {self.max_thrust}")

    @property
    def weight(self):
        return self.mass * GRAVITY

    @property
    def buoyancy_force(self):
        return self.weight if self.buoyancy is None else self.buoyancy


@dataclass(eq=False)
class VehicleState:
    """
    Pose, body velocities and time of the vehicle.

    Attributes:
        position (ndarray): x north, y east, z down (depth), m.
        attitude (ndarray): roll, pitch, yaw, rad, each in (-pi, pi].
        v_body (ndarray): u, v, w in m/s.
        w_body (ndarray): p, q, r in rad/s.
        t (float): Simulation time, s.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    @property
    def depth(self):
        return float(self.position[2])

    def as_vector(self):
        """All 12 state components followed by t."""
        return np.concatenate([self.position, self.attitude, self.v_body, self.w_body, [self.t]])


class Wrench(NamedTuple):
    """Body-frame force (N) and torque (N*m)."""

    force: np.ndarray
    torque: np.ndarray


class ThrusterGeometry:
    """
    Positions (body FRD, m) and unit thrust directions of the six thrusters.

    The default layout is the vectored frame: four horizontal thrusters at
    +/-45 degrees on the corners and two vertical thrusters left and right.
    """

    def __init__(self, positions, directions):
        self.positions = np.array(positions, dtype=float)
        self.directions = np.array(directions, dtype=float)
        if self.positions.shape != (6, 3) or self.directions.shape != (6, 3):
            raise ValueError("thruster geometry needs 6 positions and 6 directions")
        norms = np.linalg.norm(self.directions, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError(f"thruster directions must be unit vectors, norms {norms}")
        if np.linalg.matrix_rank(self.wrench_matrix()[_ACTUATED_ROWS]) != 5:
            raise ValueError("thruster layout does not span surge/sway/heave/roll/yaw")

    def __eq__(self, other):
        if not isinstance(other, ThrusterGeometry):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(self.directions, other.directions)

    def __hash__(self):
        return hash((tuple(self.positions.ravel().tolist()), tuple(self.directions.ravel().tolist())))

    @classmethod
    def default(cls):
        def horizontal(az_deg):
            az = math.radians(az_deg)
            return (math.cos(az), math.sin(az), 0.0)

        positions = [
            (0.16, 0.11, 0.0),  # T1 front-right
            (0.16, -0.11, 0.0),  # T2 front-left
            (-0.16, 0.11, 0.0),  # T3 rear-right
            (-0.16, -0.11, 0.0),  # T4 rear-left
            (0.0, -0.11, 0.0),  # T5 mid-left
            (0.0, 0.11, 0.0),  # T6 mid-right
        ]
        directions = [
            horizontal(-45.0),
            horizontal(45.0),
            horizontal(45.0),
            horizontal(-45.0),
            (0.0, 0.0, -1.0),
            (0.0, 0.0, -1.0),
        ]
        return cls(positions, directions)

    def wrench_matrix(self):
        """6x6 map from thrusts to (Fx, Fy, Fz, tau_x, tau_y, tau_z)."""
        torques = np.cross(self.positions, self.directions)
        return np.vstack([self.directions.T, torques.T])


def allocation_matrix(geometry):
    """
    Build the 6x5 allocation matrix for axis order (surge, sway, heave, yaw, roll).

    Each column is the minimum-norm thrust pattern (pseudo-inverse of the
    actuated wrench map) for a unit demand on one axis, scaled so that its
    largest entry has magnitude 1. Heave is positive up, i.e. -Fz.
    """
    pinv = np.linalg.pinv(geometry.wrench_matrix()[_ACTUATED_ROWS])
    columns = [pinv[:, 0], pinv[:, 1], -pinv[:, 2], pinv[:, 4], pinv[:, 3]]
    return np.column_stack([c / np.max(np.abs(c)) for c in columns])


def pwm_to_thrust(pwm, params=None):
    """
    Convert an ESC pulse width to thrust.

    Args:
        pwm (float): Pulse width in microseconds, 1100-1900.
        params (VehicleParams): Source of max_thrust and deadband.

    Returns:
        float: Thrust in N, quadratic in the normalized command.
    """
    params = params or VehicleParams()
    if not PWM_MIN <= pwm <= PWM_MAX:
        raise OutOfRange(f"pwm {pwm} outside [{PWM_MIN}, {PWM_MAX}]")
    if abs(pwm - PWM_NEUTRAL) <= params.deadband_us:
        return 0.0
    s = min(1.0, max(-1.0, (pwm - PWM_NEUTRAL) / PWM_HALF_RANGE))
    return params.max_thrust * s * abs(s)


def thruster_wrench(thrusts, geometry):
    """Net body wrench of six thrusts (N) through the geometry."""
    w = geometry.wrench_matrix() @ np.asarray(thrusts, dtype=float)
    return Wrench(w[:3], w[3:])


def rotation_matrix(roll, pitch, yaw):
    """Body-to-world rotation, ZYX Euler convention."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def _euler_rates(attitude, w_body):
    roll, pitch, _ = attitude
    p, q, r = w_body
    cr, sr = math.cos(roll), math.sin(roll)
    cp, tp = math.cos(pitch), math.tan(pitch)
    return np.array(
        [
            p + sr * tp * q + cr * tp * r,
            cr * q - sr * r,
            (sr * q + cr * r) / cp,
        ]
    )


def restoring_wrench(attitude, params):
    """Weight at the CoM and buoyancy at the CoB, expressed in the body frame."""
    down_body = rotation_matrix(*attitude).T @ np.array([0.0, 0.0, 1.0])
    force = (params.weight - params.buoyancy_force) * down_body
    torque = np.cross(np.asarray(params.cob_offset), -params.buoyancy_force * down_body)
    return Wrench(force, torque)


def integrate(state, wrench, params, dt):
    """
    Advance the state by dt under an applied body wrench.

    Semi-implicit Euler: velocities are updated from the total wrench
    (applied + restoring + drag), then the pose from the new velocities.
    """
    restoring = restoring_wrench(state.attitude, params)
    lin = np.asarray(params.linear_drag)
    quad = np.asarray(params.quadratic_drag)
    v = state.v_body
    w = state.w_body

    force = wrench.force + restoring.force - lin[:3] * v - quad[:3] * v * np.abs(v)
    torque = wrench.torque + restoring.torque - lin[3:] * w - quad[3:] * w * np.abs(w)

    v_new = v + dt * force / params.mass
    w_new = w + dt * torque / np.asarray(params.inertia)
    position = state.position + dt * (rotation_matrix(*state.attitude) @ v_new)
    attitude = state.attitude + dt * _euler_rates(state.attitude, w_new)
    attitude = np.array([wrap_angle(a) for a in attitude])

    new_state = VehicleState(position, attitude, v_new, w_new, state.t + dt)
    if not np.all(np.isfinite(new_state.as_vector())):
        raise NonFiniteState(f"non-finite vehicle state at t={new_state.t:.2f}s")
    if abs(attitude[1]) >= MAX_PITCH:
        raise AttitudeOutOfEnvelope(
            f"pitch {math.degrees(attitude[1]):.1f} deg at t={new_state.t:.2f}s"
        )
    return new_state


def step(state, pwm, params, geometry, dt):
    """
    Advance the vehicle one physics tick under six thruster PWM outputs.

    Args:
        state (VehicleState): Current state.
        pwm (sequence): Six pulse widths, us.
        params (VehicleParams): Physical constants.
        geometry (ThrusterGeometry): Thruster layout.
        dt (float): Time step, s.

    Returns:
        VehicleState: The state at t + dt.
    """
    thrusts = [pwm_to_thrust(p, params) for p in pwm]
    return integrate(state, thruster_wrench(thrusts, geometry), params, dt)


def kinetic_energy(state, params):
    return 0.5 * params.mass * float(state.v_body @ state.v_body) + 0.5 * float(
        np.asarray(params.inertia) @ (state.w_body * state.w_body)
    )
