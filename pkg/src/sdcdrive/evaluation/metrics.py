"""Driving-score metrics and per-task evaluation metrics.

A route is scored by DS = RC * IP: the fraction of the route driven
correctly times a multiplicative penalty that starts at 1.0 and shrinks
by a per-type factor for every infraction.
"""

from dataclasses import dataclass, field

import numpy as np

INFRACTION_TYPES = (
    "collision_pedestrian",
    "collision_vehicle",
    "collision_static",
    "red_light",
    "stop_sign",
)

# leaderboard-convention defaults; overridable per evaluation
DEFAULT_PENALTIES = {
    "collision_pedestrian": 0.50,
    "collision_vehicle": 0.60,
    "collision_static": 0.65,
    "red_light": 0.70,
    "stop_sign": 0.80,
}

LANE_CORRIDOR_HALF_WIDTH = 1.75


@dataclass
class InfractionEvent:
    type: str
    position: tuple
    time: float

    def __post_init__(self):
        if self.type not in INFRACTION_TYPES:
            raise ValueError(f"unknown infraction type {self.type!r}")


@dataclass
class RouteResult:
    rc: float
    ip: float
    infractions: list = field(default_factory=list)
    termination: str = "finished"

    @property
    def ds(self):
        return self.rc * self.ip


def infraction_penalty(events, penalty_table=None):
    """Product of per-type penalties over all events; 1.0 when clean."""
    table = dict(DEFAULT_PENALTIES)
    if penalty_table:
        table.update(penalty_table)
    ip = 1.0
    for ev in events:
        etype = ev.type if isinstance(ev, InfractionEvent) else ev
        if etype not in table:
            raise ValueError(f"no penalty configured for infraction {etype!r}")
        p = table[etype]
        if not 0.0 < p < 1.0:
            raise ValueError(f"penalty for {etype!r} must lie in (0, 1), got {p}")
        ip *= p
    return ip


def route_completion(driven_path, route, corridor=LANE_CORRIDOR_HALF_WIDTH):
    """Fraction of the route length driven correctly.

    Arc-length progress along the route only counts while the vehicle stays
    inside the lane corridor; off-corridor driving contributes nothing.
    """
    from ..world import project_to_route, route_length

    driven_path = np.asarray(driven_path, float)
    if driven_path.ndim != 2 or len(driven_path) == 0:
        raise ValueError("driven path must be a non-empty sequence of points")
    total = route_length(route)
    correct = 0.0
    prev_s = None
    for p in driven_path:
        s, d = project_to_route(route, p)
        if d <= corridor:
            if prev_s is not None and s > prev_s:
                correct += s - prev_s
            prev_s = s
        else:
            prev_s = None
    return min(correct / total, 1.0)


def driving_score(results):
    """Mean of per-route RC * IP."""
    results = list(results)
    if not results:
        raise ValueError("driving_score needs at least one route result")
    return sum(r.rc * r.ip for r in results) / len(results)


def task_metrics(predictions, ground_truths):
    """Per-task metrics over aligned prediction/ground-truth dicts.

    Accuracy at threshold 0.5 for the traffic-light state, plain BCE for
    segmentation, mean absolute error for everything else."""
    if not predictions or len(predictions) != len(ground_truths):
        raise ValueError("need non-empty, aligned prediction/ground-truth sets")

    def stack(key):
        return (np.array([np.asarray(p[key], float) for p in predictions]),
                np.array([np.asarray(g[key], float) for g in ground_truths]))

    out = {}
    tl_p, tl_g = stack("traffic_light")
    out["acc_tl"] = float(np.mean((tl_p >= 0.5) == (tl_g >= 0.5)))
    sp_p, sp_g = stack("speed")
    out["mae_sp"] = float(np.mean(np.abs(sp_p - sp_g)))
    seg_p, seg_g = stack("seg")
    p = np.clip(seg_p, 1e-7, 1.0 - 1e-7)
    out["bce_seg"] = float(-np.mean(seg_g * np.log(p) + (1 - seg_g) * np.log(1 - p)))
    wp_p, wp_g = stack("waypoints")
    out["mae_wp"] = float(np.mean(np.abs(wp_p - wp_g)))
    for key, name in (("steering", "mae_st"), ("throttle", "mae_th"),
                      ("brake", "mae_br")):
        a, b = stack(key)
        out[name] = float(np.mean(np.abs(a - b)))
    return out
