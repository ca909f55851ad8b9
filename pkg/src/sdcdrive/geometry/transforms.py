"""Global <-> ego-local coordinate transforms.

The local BEV frame puts the ego at the origin with the forward direction
along -y and the left direction along +x: a vehicle with heading theta_v
(degrees, math convention in the global frame) sees a point straight ahead
at local (0, -d).
"""

import math
from dataclasses import dataclass


def normalize_angle_deg(a):
    """Wrap an angle in degrees to (-180, 180]."""
    a = math.fmod(a, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


@dataclass
class VehiclePose:
    x: float
    y: float
    theta_deg: float

    def __post_init__(self):
        self.theta_deg = normalize_angle_deg(self.theta_deg)


def global_to_local(p_global, pose):
    """Rotate a global point into the ego-local BEV frame.

    Applies the transpose of the 2D rotation by (90 deg + theta_v) to the
    translated point.
    """
    ang = math.radians(90.0 + pose.theta_deg)
    c, s = math.cos(ang), math.sin(ang)
    dx = p_global[0] - pose.x
    dy = p_global[1] - pose.y
    return (c * dx + s * dy, -s * dx + c * dy)


def local_to_global(p_local, pose):
    """Inverse of :func:`global_to_local`."""
    ang = math.radians(90.0 + pose.theta_deg)
    c, s = math.cos(ang), math.sin(ang)
    xl, yl = p_local
    return (c * xl - s * yl + pose.x, s * xl + c * yl + pose.y)
