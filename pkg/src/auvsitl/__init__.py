"""Software-in-the-loop simulator of a companion-computer guided AUV.

The companion computer (perception + guidance) talks MAVLink v1 to a simulated
flight controller, which drives a 5-DOF underwater vehicle model.
"""

import math

__version__ = "0.1.0"

# Physics tick (s). Every scheduler rate is an integer multiple of it.
DT = 0.01


def wrap_angle(angle):
    """Wrap an angle in radians to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped == -math.pi:
        return math.pi
    return wrapped
