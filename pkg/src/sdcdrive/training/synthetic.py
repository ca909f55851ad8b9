"""Synthetic sample generation and the on-disk dataset format.

Each sample is one rendered panoramic observation with exact depth and
segmentation, plus expert-consistent waypoints and controls.  On disk a
sample is a directory holding rgb.png, depth.png (24-bit encoded),
seg.png (per-pixel class index) and meta.json.
"""

import json
import os

import numpy as np

from ..control import PidController, LAT_GAINS, LON_GAINS, TARGET_SPEED
from ..geometry import VehiclePose, global_to_local
from ..geometry.depth import encode_depth, load_depth_png, save_depth_png
from ..world import (
    SCENARIOS,
    build_scene,
    labels_to_onehot,
    point_at_arc,
    render_panorama,
    route_length,
)

WAYPOINT_DT = 0.5
N_WAYPOINTS = 3
ROUTE_POINT_LOOKAHEAD = 12.0
SIGNAL_VISIBLE_RANGE = 20.0


def _placement_window(scenario, scene):
    total = route_length(scene.route)
    if scenario == "red_light":
        return 5.0, scene.lights[0].stop_s - 4.0
    if scenario == "lead_vehicle":
        return 5.0, scene.npcs[0].x - 11.0
    return 5.0, max(total - 40.0, 10.0)


def generate_synthetic_sample(seed, scenario):
    """Render one deterministic training sample for a scenario."""
    from ..evaluation.expert import detect_hazard, expert_policy, in_intersection

    scene = build_scene(scenario, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))

    lo, hi = _placement_window(scenario, scene)
    ego_s = float(rng.uniform(lo, max(hi, lo + 1.0)))
    x, y, heading = point_at_arc(scene.route, ego_s)
    pose = VehiclePose(x, y, heading)

    hazard = detect_hazard(scene, pose, 1.0, ego_s)
    inside = in_intersection(scene, ego_s)
    target = 0.0 if hazard else (3.0 if inside else TARGET_SPEED)
    if hazard:
        speed = float(rng.uniform(0.0, 2.5))
    else:
        speed = float(rng.uniform(max(target - 1.0, 0.5), target + 0.5))

    rgb, depth, labels = render_panorama(scene, pose)

    if target > 0.0:
        waypoints = []
        for i in range(1, N_WAYPOINTS + 1):
            gx, gy, _ = point_at_arc(scene.route, ego_s + target * WAYPOINT_DT * i)
            waypoints.append(global_to_local((gx, gy), pose))
        waypoints = np.array(waypoints)
    else:
        waypoints = np.zeros((N_WAYPOINTS, 2))

    cmd = expert_policy(pose, speed, scene.route,
                        PidController(*LAT_GAINS), PidController(*LON_GAINS),
                        dt=0.05, hazard=hazard, in_intersection=inside)

    traffic_light = int(any(
        l.state == "red" and 0.0 <= l.stop_s - ego_s <= SIGNAL_VISIBLE_RANGE
        for l in scene.lights))
    stop_sign = int(any(0.0 <= s.stop_s - ego_s <= SIGNAL_VISIBLE_RANGE
                        for s in scene.stop_signs))

    gx, gy, _ = point_at_arc(scene.route, ego_s + ROUTE_POINT_LOOKAHEAD)
    route_point = global_to_local((gx, gy), pose)

    if scenario == "turn":
        command = "left" if scene.route[-1][1] > scene.route[0][1] else "right"
    elif hazard:
        command = "stop"
    else:
        command = "follow"

    return {
        "rgb": rgb,
        "depth": encode_depth(depth),
        "seg": labels_to_onehot(labels),
        "seg_labels": labels.astype(np.uint8),
        "waypoints": waypoints,
        "steering": cmd.steering,
        "throttle": cmd.throttle,
        "brake": float(cmd.brake),
        "traffic_light": float(traffic_light),
        "stop_sign": float(stop_sign),
        "speed": speed,
        "command": command,
        "route_point": tuple(route_point),
        "pose": (pose.x, pose.y, pose.theta_deg),
        "scenario": scenario,
        "seed": int(seed),
    }


def save_sample(sample_dir, sample):
    from PIL import Image

    os.makedirs(sample_dir, exist_ok=True)
    Image.fromarray(sample["rgb"], mode="RGB").save(os.path.join(sample_dir, "rgb.png"))
    Image.fromarray(sample["depth"], mode="RGB").save(os.path.join(sample_dir, "depth.png"))
    Image.fromarray(sample["seg_labels"], mode="L").save(os.path.join(sample_dir, "seg.png"))
    meta = {
        "waypoints": np.asarray(sample["waypoints"]).tolist(),
        "steering": sample["steering"],
        "throttle": sample["throttle"],
        "brake": sample["brake"],
        "traffic_light": sample["traffic_light"],
        "stop_sign": sample["stop_sign"],
        "speed": sample["speed"],
        "command": sample["command"],
        "route_point": list(sample["route_point"]),
        "pose": list(sample["pose"]),
        "scenario": sample.get("scenario", "unknown"),
        "seed": sample.get("seed", -1),
    }
    with open(os.path.join(sample_dir, "meta.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)


def load_sample(sample_dir, n_classes=23):
    from PIL import Image

    rgb = np.asarray(Image.open(os.path.join(sample_dir, "rgb.png")).convert("RGB"))
    depth_enc = np.asarray(Image.open(os.path.join(sample_dir, "depth.png")).convert("RGB"))
    labels = np.asarray(Image.open(os.path.join(sample_dir, "seg.png"))).astype(np.int64)
    with open(os.path.join(sample_dir, "meta.json")) as f:
        meta = json.load(f)
    sample = {
        "rgb": rgb,
        "depth": depth_enc,
        "seg": labels_to_onehot(labels, n_classes),
        "seg_labels": labels.astype(np.uint8),
        "waypoints": np.asarray(meta["waypoints"], float),
        "route_point": tuple(meta["route_point"]),
        "pose": tuple(meta["pose"]),
    }
    for key in ("steering", "throttle", "brake", "traffic_light", "stop_sign",
                "speed", "command", "scenario", "seed"):
        sample[key] = meta[key]
    return sample


def make_dataset(out_dir, count, seed=0, scenario="mixed"):
    """Write ``count`` samples under ``out_dir``; returns the sample dirs."""
    if scenario != "mixed" and scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    os.makedirs(out_dir, exist_ok=True)
    dirs = []
    for i in range(count):
        scen = SCENARIOS[i % len(SCENARIOS)] if scenario == "mixed" else scenario
        sample = generate_synthetic_sample(seed + i, scen)
        d = os.path.join(out_dir, f"sample_{i:05d}")
        save_sample(d, sample)
        dirs.append(d)
    return dirs


def load_dataset(data_dir):
    dirs = sorted(d for d in os.listdir(data_dir) if d.startswith("sample_"))
    if not dirs:
        raise FileNotFoundError(f"no sample_* directories under {data_dir}")
    return [load_sample(os.path.join(data_dir, d)) for d in dirs]
