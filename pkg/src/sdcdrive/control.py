"""Control stack: feature fusion, GRU waypoint/control branches, control
denormalization, PID controllers, and arbitration between the two.

The network side emits three future waypoints plus a normalized control
triple in [0,1]^3; the PID side follows the predicted waypoints.  The final
command blends the two per component with a configurable weight.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import ScaleConfig

N_WAYPOINTS = 3
STEER_RANGE = (-1.0, 1.0)
THROTTLE_MAX = 0.75
BRAKE_THRESHOLD = 0.5
PID_BUFFER_SIZE = 40

# expert gains: longitudinal then lateral
LON_GAINS = (5.0, 0.5, 1.0)
LAT_GAINS = (1.25, 0.75, 0.3)
TARGET_SPEED = 4.0

COMMANDS = ("left", "right", "straight", "follow", "stop", "other")


@dataclass
class ControlCommand:
    steering: float
    throttle: float
    brake: int

    def __post_init__(self):
        if not (STEER_RANGE[0] <= self.steering <= STEER_RANGE[1]):
            raise ValueError(f"steering {self.steering} out of [-1, 1]")
        if not (0.0 <= self.throttle <= THROTTLE_MAX):
            raise ValueError(f"throttle {self.throttle} out of [0, {THROTTLE_MAX}]")
        if self.brake not in (0, 1):
            raise ValueError(f"brake {self.brake} must be 0 or 1")


@dataclass
class MeasurementVector:
    speed: float
    command: str
    route_point: tuple  # (x, y) next sparse goal in the local frame

    def to_tensor(self):
        vec = torch.zeros(9)
        vec[0] = self.speed
        vec[1 + COMMANDS.index(self.command)] = 1.0
        vec[7] = self.route_point[0]
        vec[8] = self.route_point[1]
        return vec


class FeatureFusion(nn.Module):
    """Concat RGB and grid features, batch-norm, pool, append measurements,
    project to the fused state used as the GRU initial hidden."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        ch = config.rgb_feature_channels + config.sdc_out_channels
        self.bn = nn.BatchNorm2d(ch)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.proj = nn.Linear(ch + config.measurement_dim, config.fused_dim)

    def forward(self, rgb_features, sdc_features, measurements):
        if rgb_features.shape[-2:] != sdc_features.shape[-2:]:
            raise ValueError(
                f"feature grids disagree: {tuple(rgb_features.shape)} vs "
                f"{tuple(sdc_features.shape)}"
            )
        x = torch.cat([rgb_features, sdc_features], dim=1)
        x = self.pool(self.bn(x)).flatten(1)
        return self.proj(torch.cat([x, measurements], dim=1))


class BiasModule(nn.Module):
    """Adaptive global pooling plus a linear layer over the RGB features."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.proj = nn.Linear(config.rgb_feature_channels, config.fused_dim)

    def forward(self, rgb_features):
        return self.proj(self.pool(rgb_features).flatten(1))


class WaypointBranch(nn.Module):
    """GRU rolled three steps; each step consumes the current waypoint and the
    route point and a linear head emits the waypoint delta.  The final hidden
    state plus the bypass vector feeds the control MLP."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.gru = nn.GRUCell(4, config.fused_dim)
        self.delta_head = nn.Linear(config.fused_dim, 2)
        hidden = config.control_hidden
        self.control_mlp = nn.Sequential(
            nn.Linear(config.fused_dim, hidden), nn.ReLU(), nn.Linear(hidden, 3)
        )

    def forward(self, fused, route_point, bypass):
        b = fused.shape[0]
        wp = fused.new_zeros(b, 2)  # first GRU input waypoint is the origin
        h = fused
        waypoints = []
        for _ in range(N_WAYPOINTS):
            h = self.gru(torch.cat([wp, route_point], dim=1), h)
            wp = wp + self.delta_head(h)
            waypoints.append(wp)
        biased = torch.sigmoid(h + bypass)
        raw_control = torch.sigmoid(self.control_mlp(biased))
        return torch.stack(waypoints, dim=1), raw_control


class DynamicBranch(nn.Module):
    """One GRU step driven by the waypoint branch's control output; its hidden
    state concatenated with the bypass feeds an MLP with sigmoid output."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.gru = nn.GRUCell(3, config.fused_dim)
        hidden = config.control_hidden
        self.mlp = nn.Sequential(
            nn.Linear(2 * config.fused_dim, hidden), nn.ReLU(), nn.Linear(hidden, 3)
        )

    def forward(self, fused, raw_control, bypass):
        h = self.gru(raw_control, fused)
        return torch.sigmoid(self.mlp(torch.cat([h, bypass], dim=1)))


def denormalize_controls(s):
    """Map a normalized [0,1]^3 triple to continuous control values.

    Returns (steering, throttle, brake_prob); brake stays continuous here so
    training can regress it, binarize with BRAKE_THRESHOLD when acting.
    """
    steering = 2.0 * s[..., 0] - 1.0
    throttle = THROTTLE_MAX * s[..., 1]
    return steering, throttle, s[..., 2]


def combine_controls(raw, adjustment, mode="mean"):
    """Merge the two branch outputs and denormalize to a ControlCommand.

    ``mean`` averages the triples; ``clamp`` sums and clips to [0, 1].
    """
    raw = np.asarray(raw, dtype=np.float64)
    adjustment = np.asarray(adjustment, dtype=np.float64)
    if mode == "mean":
        s = (raw + adjustment) / 2.0
    elif mode == "clamp":
        s = np.clip(raw + adjustment, 0.0, 1.0)
    else:
        raise ValueError(f"unknown combine mode {mode!r}")
    return ControlCommand(
        steering=float(2.0 * s[0] - 1.0),
        throttle=float(THROTTLE_MAX * s[1]),
        brake=int(s[2] >= BRAKE_THRESHOLD),
    )


class PidController:
    """PID with a bounded running-average integral term.

    output = Kp*e + Ki*mean(buffer) + Kd*(e - e_prev)/dt, where the buffer
    keeps the last ``PID_BUFFER_SIZE`` errors.
    """

    def __init__(self, kp, ki, kd, buffer_size=PID_BUFFER_SIZE):
        self.kp, self.ki, self.kd = kp, ki, kd
        self.buffer = deque(maxlen=buffer_size)
        self.prev_error = 0.0

    def reset(self):
        self.buffer.clear()
        self.prev_error = 0.0

    def step(self, error, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.buffer.append(error)
        integral = sum(self.buffer) / len(self.buffer)
        derivative = (error - self.prev_error) / dt
        self.prev_error = error
        return self.kp * error + self.ki * integral + self.kd * derivative


def make_lateral_pid():
    return PidController(*LAT_GAINS)


def make_longitudinal_pid():
    return PidController(*LON_GAINS)


def pid_control(waypoints, speed, lat_pid, lon_pid, dt,
                waypoint_dt=0.5, max_target_speed=TARGET_SPEED,
                brake_speed=0.4, brake_margin=1.0):
    """Follow predicted waypoints with the two PID controllers.

    The aim point is the average of the first two waypoints (local frame,
    forward is -y); desired speed comes from the spacing of the first two
    waypoints.  Degenerate waypoints at the origin command a full stop.
    """
    wp = np.asarray(waypoints, dtype=np.float64)
    if wp.shape != (N_WAYPOINTS, 2):
        raise ValueError(f"expected {N_WAYPOINTS} waypoints, got shape {wp.shape}")
    aim = (wp[0] + wp[1]) / 2.0
    if np.hypot(*aim) < 1e-6:
        return ControlCommand(0.0, 0.0, 1)

    # positive angle = aim point to the left (+x); steer negative toward it
    angle = math.atan2(aim[0], -aim[1])
    steering = float(np.clip(lat_pid.step(-angle, dt), *STEER_RANGE))

    desired = min(float(np.hypot(*(wp[1] - wp[0]))) / waypoint_dt, max_target_speed)
    throttle = float(np.clip(lon_pid.step(desired - speed, dt), 0.0, THROTTLE_MAX))
    brake = int(desired < brake_speed or speed > desired + brake_margin)
    if brake:
        throttle = 0.0
    return ControlCommand(steering, throttle, brake)


def control_arbitration(mlp_cmd, pid_cmd, beta=0.5):
    """Blend the network and PID commands: beta weights the network side;
    brake is the OR of the two binary brakes."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta == 1.0:
        return mlp_cmd
    if beta == 0.0:
        return pid_cmd
    return ControlCommand(
        steering=beta * mlp_cmd.steering + (1 - beta) * pid_cmd.steering,
        throttle=beta * mlp_cmd.throttle + (1 - beta) * pid_cmd.throttle,
        brake=int(bool(mlp_cmd.brake) or bool(pid_cmd.brake)),
    )


class ControlModule(nn.Module):
    """Fusion + bias + waypoint branch (+ dynamic branch unless ``no_vc``)."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.config = config
        self.fusion = FeatureFusion(config)
        self.bias_module = BiasModule(config)
        self.waypoint_branch = WaypointBranch(config)
        self.dynamic_branch = None if config.no_vc else DynamicBranch(config)

    def forward(self, rgb_features, sdc_features, measurements, route_point):
        fused = self.fusion(rgb_features, sdc_features, measurements)
        bypass = self.bias_module(rgb_features)
        waypoints, raw = self.waypoint_branch(fused, route_point, bypass)
        out = {"fused": fused, "waypoints": waypoints, "raw_control": raw}
        if self.dynamic_branch is not None:
            adj = self.dynamic_branch(fused, raw, bypass)
            out["adjustment"] = adj
            s = (raw + adj) / 2.0
        else:
            s = raw
        steering, throttle, brake = denormalize_controls(s)
        out.update(control_norm=s, steering=steering, throttle=throttle, brake=brake)
        return out
