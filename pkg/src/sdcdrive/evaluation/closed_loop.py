"""Closed-loop route evaluation.

Steps the simulator, feeds agents either privileged state (expert) or
rendered observations (model agents), collects infractions, and scores the
route with RC / IP / DS.  Everything is deterministic for a fixed
(scene, agent, dt, seed).
"""

import copy
import json
import os

import numpy as np

from ..geometry import VehiclePose, global_to_local
from ..geometry.depth import encode_depth
from ..world import (
    CrossingTrigger,
    Scene,
    advance_npcs,
    build_scene,
    point_at_arc,
    project_to_route,
    render_panorama,
    route_length,
)
from .expert import detect_hazard
from .metrics import InfractionEvent, RouteResult, infraction_penalty, route_completion
from .simulator import SimParams, SimState, detect_infractions, simulate_step

BLOCKED_TIMEOUT_S = 90.0
ROUTE_POINT_LOOKAHEAD = 12.0


def save_route_file(path, scene_or_spec):
    if isinstance(scene_or_spec, Scene):
        spec = {
            "waypoints": np.asarray(scene_or_spec.route, float).tolist(),
            "triggers": [{"s": t.s} for t in scene_or_spec.triggers],
        }
    else:
        spec = scene_or_spec
    with open(path, "w") as f:
        json.dump(spec, f, indent=2, sort_keys=True)


def load_route_file(path):
    """Route file: either {"scenario": name, "seed": n} or an explicit
    {"waypoints": [[x, y], ...], "triggers": [{"s": arc_pos}, ...]}."""
    with open(path) as f:
        spec = json.load(f)
    return scene_from_spec(spec)


def scene_from_spec(spec):
    if "waypoints" in spec:
        scene = Scene(route=np.asarray(spec["waypoints"], float))
        for t in spec.get("triggers", []):
            scene.triggers.append(CrossingTrigger(**t))
        return scene
    return build_scene(spec.get("scenario", "straight"), spec.get("seed", 0))


def current_command(scene, ego_s, pose, speed):
    """Navigational command for the observation stream."""
    if detect_hazard(scene, pose, speed, ego_s):
        return "stop"
    route = np.asarray(scene.route, float)
    if len(route) > 2:
        # approaching a corner: command the turn direction
        s_corner = 0.0
        for a, b in zip(route[:-1], route[1:]):
            s_corner += float(np.hypot(*(b - a)))
            if s_corner - float(np.hypot(*(route[-1] - route[-2]))) > ego_s - 1e-9:
                break
        corner_s = s_corner - float(np.hypot(*(route[-1] - route[-2])))
        if 0.0 <= corner_s - ego_s <= 15.0:
            v1 = route[-2] - route[-3] if len(route) >= 3 else route[1] - route[0]
            v2 = route[-1] - route[-2]
            cross = v1[0] * v2[1] - v1[1] * v2[0]
            return "left" if cross > 0 else "right"
    return "follow"


def _observation(scene, state, ego_s):
    rgb, depth, _ = render_panorama(scene, state.pose)
    gx, gy, _ = point_at_arc(scene.route, ego_s + ROUTE_POINT_LOOKAHEAD)
    route_point = global_to_local((gx, gy), state.pose)
    return {
        "rgb": rgb,
        "depth": encode_depth(depth),
        "speed": state.speed,
        "command": current_command(scene, ego_s, state.pose, state.speed),
        "route_point": route_point,
    }


def run_closed_loop(agent, scene, mode="normal", dt=0.05, max_time=None,
                    params=None, log_dir=None, route_name="route"):
    """Drive one route; returns (RouteResult, trace dict)."""
    if mode not in ("normal", "adversarial"):
        raise ValueError(f"unknown mode {mode!r}")
    scene = copy.deepcopy(scene)
    params = params or SimParams()
    total_len = route_length(scene.route)
    if max_time is None:
        max_time = 30.0 + 3.0 * total_len / 4.0

    x0, y0, heading = point_at_arc(scene.route, 0.0)
    state = SimState(pose=VehiclePose(x0, y0, heading), speed=0.0)
    agent.reset()

    path = [(x0, y0)]
    events = []
    trace = {"dt": dt, "mode": mode, "steps": []}
    prev_s = 0.0
    blocked_for = 0.0
    termination = "timeout"

    while state.time < max_time:
        try:
            if getattr(agent, "privileged", False):
                cmd, wps = agent.step_privileged(scene, state, dt)
            else:
                ego_s, _ = project_to_route(scene.route, (state.pose.x, state.pose.y))
                cmd, wps = agent.step(_observation(scene, state, ego_s))
        except Exception as exc:  # noqa: BLE001 - scored, not propagated
            termination = f"agent_error: {type(exc).__name__}"
            break

        advance_npcs(scene, state.pose, dt, adversarial=(mode == "adversarial"))
        state = simulate_step(state, cmd, dt, params)
        path.append((state.pose.x, state.pose.y))

        step_events, ego_s = detect_infractions(scene, state, prev_s, params)
        for kind, pos in step_events:
            events.append(InfractionEvent(kind, pos, state.time))
        prev_s = ego_s

        trace["steps"].append({
            "t": round(state.time, 6),
            "x": state.pose.x, "y": state.pose.y,
            "theta": state.pose.theta_deg, "speed": state.speed,
            "steering": cmd.steering, "throttle": cmd.throttle,
            "brake": cmd.brake,
            "waypoints": None if wps is None else np.asarray(wps).tolist(),
        })

        if ego_s >= total_len - 1e-6:
            termination = "finished"
            break
        blocked_for = blocked_for + dt if state.speed < 0.1 else 0.0
        if blocked_for >= BLOCKED_TIMEOUT_S:
            termination = "blocked"
            break

    rc = route_completion(path, scene.route)
    ip = infraction_penalty(events)
    result = RouteResult(rc=rc, ip=ip, infractions=events, termination=termination)
    trace["result"] = {
        "rc": rc, "ip": ip, "ds": result.ds, "termination": termination,
        "infractions": [{"type": e.type, "time": e.time} for e in events],
    }
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        with open(os.path.join(log_dir, f"{route_name}.json"), "w") as f:
            json.dump(trace, f, indent=2, sort_keys=True)
    return result, trace
