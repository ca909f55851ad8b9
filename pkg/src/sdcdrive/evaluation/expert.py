"""Privileged expert driver.

Lateral control is a PID on the heading error toward the next route point
at least 3.5 m ahead; longitudinal control tracks a three-level target
speed ladder (cruise 4.0 m/s, 3.0 m/s inside intersections, 0.0 m/s when a
hazard is predicted) with its own PID.
"""

import math

import numpy as np

from ..control import (
    ControlCommand,
    LAT_GAINS,
    LON_GAINS,
    PidController,
    STEER_RANGE,
    TARGET_SPEED,
    THROTTLE_MAX,
)
from ..geometry import global_to_local
from ..world import CLS_PEDESTRIAN, CLS_VEHICLE, point_at_arc, project_to_route

AIM_DISTANCE = 3.5
INTERSECTION_SPEED = 3.0
OVERSHOOT_BRAKE_MARGIN = 1.0
RED_LIGHT_STOP_RANGE = 12.0
LEAD_STOP_RANGE = 10.0
PEDESTRIAN_STOP_RANGE = 9.0
STOP_SIGN_RANGE = 8.0


def expert_policy(pose, speed, route, lat_pid, lon_pid, dt,
                  hazard=False, in_intersection=False):
    """One control step from privileged information."""
    ego_s, _ = project_to_route(route, (pose.x, pose.y))
    ax, ay, _ = point_at_arc(route, ego_s + AIM_DISTANCE)
    xl, yl = global_to_local((ax, ay), pose)
    # positive = aim point to the left; steer negative toward it
    alpha = math.atan2(xl, -yl) if (abs(xl) > 1e-9 or abs(yl) > 1e-9) else 0.0
    steering = float(np.clip(lat_pid.step(-alpha, dt), *STEER_RANGE))

    target = 0.0 if hazard else (INTERSECTION_SPEED if in_intersection
                                 else TARGET_SPEED)
    u = lon_pid.step(target - speed, dt)
    brake = int(target < 0.1 or speed > target + OVERSHOOT_BRAKE_MARGIN)
    throttle = 0.0 if brake else float(np.clip(u, 0.0, THROTTLE_MAX))
    return ControlCommand(steering, throttle, brake)


def detect_hazard(scene, pose, speed, ego_s):
    """Privileged hazard flag: red light, lead actor, or unserved stop sign
    close ahead on the route."""
    for light in scene.lights:
        if light.state == "red" and 0.0 <= light.stop_s - ego_s <= RED_LIGHT_STOP_RANGE:
            return True
    for sign in scene.stop_signs:
        if getattr(sign, "satisfied", False) or getattr(sign, "crossed", False):
            continue
        if 0.0 <= sign.stop_s - ego_s <= STOP_SIGN_RANGE:
            if speed < 0.1:
                sign.satisfied = True
            else:
                return True
    heading = math.radians(pose.theta_deg)
    fwd = (math.cos(heading), math.sin(heading))
    for npc in scene.npcs:
        if not npc.active:
            continue
        dx, dy = npc.x - pose.x, npc.y - pose.y
        ahead = dx * fwd[0] + dy * fwd[1]
        lateral = abs(-dx * fwd[1] + dy * fwd[0])
        stop_range = (PEDESTRIAN_STOP_RANGE if npc.cls == CLS_PEDESTRIAN
                      else LEAD_STOP_RANGE)
        if 0.0 < ahead <= stop_range and lateral < 2.5:
            return True
    return False


def in_intersection(scene, ego_s):
    return any(lo <= ego_s <= hi for lo, hi in scene.intersection_zones)


class ExpertAgent:
    """Closed-loop agent wrapper around the expert policy."""

    privileged = True

    def __init__(self):
        self.lat_pid = PidController(*LAT_GAINS)
        self.lon_pid = PidController(*LON_GAINS)

    def reset(self):
        self.lat_pid.reset()
        self.lon_pid.reset()

    def step_privileged(self, scene, state, dt):
        ego_s, _ = project_to_route(scene.route, (state.pose.x, state.pose.y))
        hazard = detect_hazard(scene, state.pose, state.speed, ego_s)
        cmd = expert_policy(state.pose, state.speed, scene.route,
                            self.lat_pid, self.lon_pid, dt,
                            hazard=hazard,
                            in_intersection=in_intersection(scene, ego_s))
        return cmd, None
