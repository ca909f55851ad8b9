"""Kinematic bicycle simulator with infraction detection.

Throttle maps to forward acceleration minus a speed-proportional drag,
brake to a fixed deceleration, steering to a front-wheel angle; heading
integrates at the bicycle-model yaw rate.  Everything is deterministic.
"""

import math
from dataclasses import dataclass

from ..control import ControlCommand
from ..geometry import VehiclePose
from ..world import CLS_PEDESTRIAN, CLS_VEHICLE, project_to_route


@dataclass
class SimParams:
    wheelbase: float = 2.5
    max_steer_rad: float = 0.6
    accel_gain: float = 4.0      # m/s^2 at full (1.0) throttle
    brake_decel: float = 6.0
    drag: float = 0.15           # per-second speed decay
    ego_radius: float = 1.0


@dataclass
class SimState:
    pose: VehiclePose
    speed: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


def simulate_step(state: SimState, cmd: ControlCommand, dt, params=None):
    """Advance one step; returns a new SimState (the input is untouched)."""
    if not 0.0 < dt <= 0.5:
        raise ValueError(f"dt must lie in (0, 0.5], got {dt}")
    p = params or SimParams()
    v = state.speed
    if cmd.brake:
        accel = -p.brake_decel
    else:
        accel = p.accel_gain * cmd.throttle - p.drag * v
    v_new = max(v + accel * dt, 0.0)

    # negative steering turns left (counterclockwise, increasing heading)
    yaw_rate = v / p.wheelbase * math.tan(-cmd.steering * p.max_steer_rad)
    theta = math.radians(state.pose.theta_deg)
    mid = theta + 0.5 * yaw_rate * dt
    x = state.pose.x + v * dt * math.cos(mid)
    y = state.pose.y + v * dt * math.sin(mid)
    theta_new = math.degrees(theta + yaw_rate * dt)
    return SimState(pose=VehiclePose(x, y, theta_new), speed=v_new,
                    time=state.time + dt)


def _point_rect_distance(px, py, rx0, rx1, ry0, ry1):
    dx = max(rx0 - px, 0.0, px - rx1)
    dy = max(ry0 - py, 0.0, py - ry1)
    return math.hypot(dx, dy)


def detect_infractions(scene, state, prev_s, params=None):
    """Collision and rule infractions for the current step.

    Returns a list of (type, position) tuples and mutates per-actor /
    per-rule flags on the scene so each event fires once."""
    p = params or SimParams()
    events = []
    ex, ey = state.pose.x, state.pose.y
    for npc in scene.npcs:
        if not npc.active or npc.collided:
            continue
        d = _point_rect_distance(ex, ey, npc.x - npc.half_x, npc.x + npc.half_x,
                                 npc.y - npc.half_y, npc.y + npc.half_y)
        if d < p.ego_radius:
            npc.collided = True
            kind = ("collision_pedestrian" if npc.cls == CLS_PEDESTRIAN
                    else "collision_vehicle" if npc.cls == CLS_VEHICLE
                    else "collision_static")
            events.append((kind, (ex, ey)))
    ego_s, _ = project_to_route(scene.route, (ex, ey))
    for light in scene.lights:
        if getattr(light, "crossed", False):
            continue
        if prev_s is not None and prev_s < light.stop_s <= ego_s:
            light.crossed = True
            if light.state == "red":
                events.append(("red_light", (ex, ey)))
    for sign in scene.stop_signs:
        if getattr(sign, "crossed", False):
            continue
        if sign.stop_s - ego_s < 10.0 and state.speed < 0.1:
            sign.satisfied = True
        if prev_s is not None and prev_s < sign.stop_s <= ego_s:
            sign.crossed = True
            if not getattr(sign, "satisfied", False):
                events.append(("stop_sign", (ex, ey)))
    return events, ego_s
