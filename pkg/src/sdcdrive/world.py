"""Procedural toy road world and its flat-shaded renderer.

The world is a ground plane carrying a polyline route (road, lane marking,
sidewalk, terrain bands), plus axis-aligned boxes for buildings, vehicles,
pedestrians, traffic lights and stop signs.  A pinhole camera renders RGB,
exact metric depth, and exact per-pixel class labels; the three-camera
panorama matches the composite layout the model consumes.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraSpec, FRONT_CAMERA, LEFT_CAMERA, RIGHT_CAMERA, VehiclePose
from .geometry.depth import MAX_RANGE_M

# semantic classes (23 channels; higher indices unused by the generator)
CLS_UNLABELED = 0
CLS_ROAD = 1
CLS_LANE_MARK = 2
CLS_SIDEWALK = 3
CLS_TERRAIN = 4
CLS_VEHICLE = 5
CLS_PEDESTRIAN = 6
CLS_TRAFFIC_LIGHT = 7
CLS_BUILDING = 8
CLS_STOP_SIGN = 9
N_WORLD_CLASSES = 23

PALETTE = np.zeros((N_WORLD_CLASSES, 3), dtype=np.float64)
PALETTE[CLS_UNLABELED] = (70, 130, 180)   # sky
PALETTE[CLS_ROAD] = (90, 90, 90)
PALETTE[CLS_LANE_MARK] = (240, 240, 210)
PALETTE[CLS_SIDEWALK] = (160, 150, 140)
PALETTE[CLS_TERRAIN] = (80, 140, 60)
PALETTE[CLS_VEHICLE] = (30, 60, 170)
PALETTE[CLS_PEDESTRIAN] = (200, 60, 60)
PALETTE[CLS_TRAFFIC_LIGHT] = (60, 60, 60)
PALETTE[CLS_BUILDING] = (140, 110, 90)
PALETTE[CLS_STOP_SIGN] = (180, 30, 30)

CAMERA_HEIGHT = 1.5
LANE_MARK_HALF = 0.12
SIDEWALK_WIDTH = 2.0


@dataclass
class WorldBox:
    """Axis-aligned box: ground footprint [x0,x1]x[y0,y1], height [up0,up1]."""
    x0: float
    x1: float
    y0: float
    y1: float
    up0: float
    up1: float
    cls: int
    color: tuple = None  # optional RGB override (e.g. lit traffic light head)


@dataclass
class Npc:
    x: float
    y: float
    vx: float
    vy: float
    half_x: float
    half_y: float
    height: float
    cls: int
    active: bool = True
    collided: bool = False

    def box(self):
        return WorldBox(self.x - self.half_x, self.x + self.half_x,
                        self.y - self.half_y, self.y + self.half_y,
                        0.0, self.height, self.cls)


@dataclass
class TrafficLight:
    x: float
    y: float
    stop_s: float       # arc position of the stop line on the route
    state: str = "red"  # "red" or "green"


@dataclass
class StopSign:
    x: float
    y: float
    stop_s: float


@dataclass
class CrossingTrigger:
    """Adversarial event: a pedestrian starts crossing when the ego comes
    within ``trigger_range`` of arc position ``s``."""
    s: float
    trigger_range: float = 15.0
    walk_speed: float = 1.5
    fired: bool = False


@dataclass
class Scene:
    route: np.ndarray
    road_half_width: float = 3.5
    boxes: list = field(default_factory=list)
    npcs: list = field(default_factory=list)
    lights: list = field(default_factory=list)
    stop_signs: list = field(default_factory=list)
    triggers: list = field(default_factory=list)
    intersection_zones: list = field(default_factory=list)  # (s_lo, s_hi)


# ---------------------------------------------------------------------------
# route helpers

def route_length(route):
    return float(np.sum(np.hypot(*np.diff(np.asarray(route, float), axis=0).T)))


def project_to_route(route, p):
    """Project a point onto the polyline; returns (arc position, distance)."""
    route = np.asarray(route, float)
    best_s, best_d = 0.0, float("inf")
    s_acc = 0.0
    for a, b in zip(route[:-1], route[1:]):
        ab = b - a
        seg_len = float(np.hypot(*ab))
        if seg_len < 1e-12:
            continue
        t = float(np.clip(np.dot(p - a, ab) / seg_len**2, 0.0, 1.0))
        q = a + t * ab
        d = float(np.hypot(*(p - q)))
        if d < best_d:
            best_d = d
            best_s = s_acc + t * seg_len
        s_acc += seg_len
    return best_s, best_d


def point_at_arc(route, s):
    """Point and tangent heading (degrees) at arc position ``s``; clamps to
    the route ends."""
    route = np.asarray(route, float)
    s = max(s, 0.0)
    for a, b in zip(route[:-1], route[1:]):
        ab = b - a
        seg_len = float(np.hypot(*ab))
        if seg_len < 1e-12:
            continue
        if s <= seg_len:
            q = a + (s / seg_len) * ab
            return q[0], q[1], math.degrees(math.atan2(ab[1], ab[0]))
        s -= seg_len
    ab = route[-1] - route[-2]
    return route[-1][0], route[-1][1], math.degrees(math.atan2(ab[1], ab[0]))


def _dist_to_route_grid(route, px, py):
    """Min distance from each grid point to the route polyline (vectorized
    over the pixel grid, looped over the few segments)."""
    best = np.full(px.shape, np.inf)
    route = np.asarray(route, float)
    for a, b in zip(route[:-1], route[1:]):
        ab = b - a
        seg2 = float(ab @ ab)
        if seg2 < 1e-12:
            continue
        t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / seg2, 0.0, 1.0)
        d = np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))
        np.minimum(best, d, out=best)
    return best


# ---------------------------------------------------------------------------
# rendering

def _all_boxes(scene):
    boxes = list(scene.boxes)
    boxes += [n.box() for n in scene.npcs if n.active]
    for light in scene.lights:
        boxes.append(WorldBox(light.x - 0.25, light.x + 0.25,
                              light.y - 0.25, light.y + 0.25,
                              0.0, 2.6, CLS_TRAFFIC_LIGHT))
        color = (220, 40, 40) if light.state == "red" else (40, 200, 60)
        boxes.append(WorldBox(light.x - 0.4, light.x + 0.4,
                              light.y - 0.4, light.y + 0.4,
                              2.6, 3.6, CLS_TRAFFIC_LIGHT, color=color))
    for sign in scene.stop_signs:
        boxes.append(WorldBox(sign.x - 0.35, sign.x + 0.35,
                              sign.y - 0.35, sign.y + 0.35,
                              1.2, 2.2, CLS_STOP_SIGN))
    return boxes


def render_camera(scene, pose: VehiclePose, cam: CameraSpec):
    """Render one camera; returns (rgb uint8 HxWx3, depth m HxW, labels HxW).

    Depth is the forward (camera axis) distance; sky pixels get depth 0 so
    they never project into the BEV grid.
    """
    w, h = cam.image_width, cam.image_height
    heading = math.radians(pose.theta_deg + cam.yaw_offset_deg)
    fwd = np.array([math.cos(heading), math.sin(heading)])
    right = np.array([math.sin(heading), -math.cos(heading)])
    f = cam.focal_px()

    xn = (np.arange(w) + 0.5 - w / 2.0) / f           # (w,)
    dn = ((np.arange(h) + 0.5 - h / 2.0) / f)[:, None]  # (h,1), positive = down
    dx = fwd[0] + xn[None, :] * right[0]
    dy = fwd[1] + xn[None, :] * right[1]

    labels = np.full((h, w), CLS_UNLABELED, dtype=np.int64)
    color = np.empty((h, w, 3))
    color[:] = PALETTE[CLS_UNLABELED]
    best_z = np.full((h, w), np.inf)

    # ground plane
    with np.errstate(divide="ignore"):
        z_g = np.where(dn > 1e-9, CAMERA_HEIGHT / np.where(dn > 1e-9, dn, 1.0), np.inf)
    z_g = np.broadcast_to(z_g, (h, w))
    hit = np.isfinite(z_g)
    z_safe = np.where(hit, z_g, 0.0)
    gx = pose.x + z_safe * dx
    gy = pose.y + z_safe * dy
    d_route = _dist_to_route_grid(scene.route, gx, gy)
    g_lab = np.full((h, w), CLS_TERRAIN, dtype=np.int64)
    g_lab[d_route <= scene.road_half_width + SIDEWALK_WIDTH] = CLS_SIDEWALK
    g_lab[d_route <= scene.road_half_width] = CLS_ROAD
    g_lab[d_route <= LANE_MARK_HALF] = CLS_LANE_MARK
    sel = hit & (z_g < best_z)
    best_z[sel] = z_g[sel]
    labels[sel] = g_lab[sel]
    color[sel] = PALETTE[g_lab[sel]]

    # boxes
    up_dir = -dn  # (h,1)
    for box in _all_boxes(scene):
        z_lo, z_hi = _slab(box.x0 - pose.x, box.x1 - pose.x, dx)
        y_lo, y_hi = _slab(box.y0 - pose.y, box.y1 - pose.y, dy)
        u_lo, u_hi = _slab(box.up0 - CAMERA_HEIGHT, box.up1 - CAMERA_HEIGHT, up_dir)
        tmin = np.maximum(np.maximum(z_lo, y_lo), u_lo)
        tmax = np.minimum(np.minimum(z_hi, y_hi), u_hi)
        hit = (tmax >= tmin) & (tmin > 0.1) & (tmin < best_z)
        best_z[hit] = tmin[hit]
        labels[hit] = box.cls
        color[hit] = box.color if box.color is not None else PALETTE[box.cls]

    depth = np.where(np.isfinite(best_z), np.minimum(best_z, MAX_RANGE_M), 0.0)
    shade = np.where(np.isfinite(best_z), 1.0 / (1.0 + 0.015 * depth), 1.0)
    rgb = np.clip(color * shade[..., None], 0, 255).astype(np.uint8)
    return rgb, depth, labels


def _slab(lo, hi, d):
    """Entering/exit parameters of an axis slab for direction component d."""
    d = np.asarray(d, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(np.abs(d) > 1e-12, lo / d, np.where((lo <= 0) & (hi >= 0), -np.inf, np.inf))
        t1 = np.where(np.abs(d) > 1e-12, hi / d, np.where((lo <= 0) & (hi >= 0), np.inf, -np.inf))
    return np.minimum(t0, t1), np.maximum(t0, t1)


def render_panorama(scene, pose):
    """Three-camera composite in left|front|right order.

    Returns (rgb uint8 160x768x3, depth m 160x768, labels 160x768)."""
    parts = [render_camera(scene, pose, cam)
             for cam in (LEFT_CAMERA, FRONT_CAMERA, RIGHT_CAMERA)]
    rgb = np.concatenate([p[0] for p in parts], axis=1)
    depth = np.concatenate([p[1] for p in parts], axis=1)
    labels = np.concatenate([p[2] for p in parts], axis=1)
    return rgb, depth, labels


def labels_to_onehot(labels, n_classes=N_WORLD_CLASSES):
    onehot = np.zeros((n_classes,) + labels.shape, dtype=np.uint8)
    ri, ci = np.indices(labels.shape).reshape(2, -1)
    onehot[labels.ravel(), ri, ci] = 1
    return onehot


# ---------------------------------------------------------------------------
# scenario construction

SCENARIOS = ("straight", "turn", "red_light", "lead_vehicle")


def build_scene(scenario, seed):
    """Deterministic scene for a scenario; raises on unknown names."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; pick one of {SCENARIOS}")
    rng = np.random.default_rng(seed)
    if scenario == "straight":
        length = float(rng.uniform(80, 120))
        scene = Scene(route=np.array([[0.0, 0.0], [length, 0.0]]))
        if rng.random() < 0.3:
            s_sign = float(rng.uniform(25, length - 20))
            scene.stop_signs.append(StopSign(s_sign, -(scene.road_half_width + 0.8), s_sign))
    elif scenario == "turn":
        a = float(rng.uniform(28, 40))
        b = float(rng.uniform(28, 40))
        side = 1.0 if rng.random() < 0.5 else -1.0
        scene = Scene(route=np.array([[0.0, 0.0], [a, 0.0], [a, side * b]]))
        scene.intersection_zones.append((a - 8.0, a + 8.0))
    elif scenario == "red_light":
        length = float(rng.uniform(55, 80))
        scene = Scene(route=np.array([[0.0, 0.0], [length, 0.0]]))
        stop_s = float(rng.uniform(22, 30))
        scene.lights.append(
            TrafficLight(stop_s, scene.road_half_width + 1.0, stop_s, state="red"))
    else:  # lead_vehicle
        length = float(rng.uniform(80, 120))
        scene = Scene(route=np.array([[0.0, 0.0], [length, 0.0]]))
        lead_s = float(rng.uniform(14, 22))
        scene.npcs.append(Npc(lead_s, 0.0, 2.0, 0.0, 2.2, 1.0, 1.6, CLS_VEHICLE))

    # a few buildings off the road for visual structure
    n_build = int(rng.integers(2, 6))
    total = route_length(scene.route)
    for _ in range(n_build):
        s = float(rng.uniform(5, max(total - 5, 10)))
        bx, by, heading = point_at_arc(scene.route, s)
        side = 1.0 if rng.random() < 0.5 else -1.0
        off = scene.road_half_width + SIDEWALK_WIDTH + float(rng.uniform(2, 8))
        n = math.radians(heading + 90.0)
        cx = bx + side * off * math.cos(n)
        cy = by + side * off * math.sin(n)
        half = float(rng.uniform(2, 5))
        scene.boxes.append(WorldBox(cx - half, cx + half, cy - half, cy + half,
                                    0.0, float(rng.uniform(4, 9)), CLS_BUILDING))
    return scene


def advance_npcs(scene, ego_pose, dt, adversarial=False):
    """Move dynamic actors one step; fire adversarial crossings in range."""
    ego_s, _ = project_to_route(scene.route, np.array([ego_pose.x, ego_pose.y]))
    for trig in scene.triggers:
        if adversarial and not trig.fired and trig.s - ego_s <= trig.trigger_range:
            trig.fired = True
            px, py, heading = point_at_arc(scene.route, trig.s)
            n = math.radians(heading + 90.0)
            off = scene.road_half_width + 1.0
            scene.npcs.append(Npc(
                px + off * math.cos(n), py + off * math.sin(n),
                -trig.walk_speed * math.cos(n), -trig.walk_speed * math.sin(n),
                0.4, 0.4, 1.8, CLS_PEDESTRIAN))
    for npc in scene.npcs:
        if npc.active:
            npc.x += npc.vx * dt
            npc.y += npc.vy * dt
