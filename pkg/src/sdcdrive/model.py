"""Full driving model and the inference-time agent.

The agent consumes a panoramic observation (left|front|right composites of
RGB and encoded depth), rebuilds the BEV semantic grid from decoded depth
and its own segmentation prediction, and emits a control command plus the
three predicted waypoints.
"""

import numpy as np
import torch
from torch import nn

from . import geometry
from .config import ScaleConfig
from .control import (
    BRAKE_THRESHOLD,
    ControlCommand,
    ControlModule,
    MeasurementVector,
    combine_controls,
    control_arbitration,
    make_lateral_pid,
    make_longitudinal_pid,
    pid_control,
)
from .geometry import (
    FRONT_CAMERA,
    LEFT_CAMERA,
    RIGHT_CAMERA,
    build_camera_sdc,
    decode_depth,
    merge_sdc,
)
from .perception import PerceptionModule

# panoramic composite layout, widths in pixels
SIDE_W = 224
FRONT_W = 320
COMPOSITE_W = SIDE_W + FRONT_W + SIDE_W


def split_composite(img, axis=-1):
    """Split a panoramic composite into (left, front, right) views."""
    if img.shape[axis] != COMPOSITE_W:
        raise ValueError(f"composite width {img.shape[axis]} != {COMPOSITE_W}")
    left, front, right = np.split(np.asarray(img), [SIDE_W, SIDE_W + FRONT_W], axis=axis)
    return left, front, right


def build_sdc_from_composites(depth_composite, seg_composite, no_sdc_sides=False):
    """Assemble the merged BEV grid from panoramic depth (meters) and
    per-pixel class scores (n_classes x H x W)."""
    dl, df, dr = split_composite(depth_composite, axis=-1)
    sl, sf, sr = split_composite(seg_composite, axis=-1)
    n_classes = seg_composite.shape[0]
    front = build_camera_sdc(df, sf, FRONT_CAMERA, n_classes=n_classes)
    if no_sdc_sides:
        left = np.zeros((n_classes, geometry.SIDE_GRID.rows, geometry.SIDE_GRID.cols),
                        dtype=np.uint8)
        right = left
    else:
        left = build_camera_sdc(dl, sl, LEFT_CAMERA, n_classes=n_classes)
        right = build_camera_sdc(dr, sr, RIGHT_CAMERA, n_classes=n_classes)
    return merge_sdc(front, left, right)


class DrivingModel(nn.Module):
    """Perception module plus control module behind one forward call."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.config = config
        self.perception = PerceptionModule(config)
        self.control = ControlModule(config)

    def forward(self, rgb, sdc, measurements, route_point):
        out = self.perception(rgb, sdc)
        out.update(self.control(out["rgb_features"], out["sdc_features"],
                                measurements, route_point))
        return out


def save_checkpoint(path, model, extra=None):
    payload = {
        "state_dict": model.state_dict(),
        "config": model.config.to_dict(),
        "config_digest": model.config.digest(),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = ScaleConfig.from_dict(payload["config"])
    if config.digest() != payload["config_digest"]:
        raise ValueError("checkpoint config digest mismatch")
    model = DrivingModel(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})


class ModelAgent:
    """Closed-loop driver around a trained DrivingModel.

    step() takes one observation dict with keys ``rgb`` (H x W x 3 uint8
    panorama), ``depth`` (H x W x 3 uint8 encoded panorama), ``speed``,
    ``command``, ``route_point`` and returns (ControlCommand, waypoints).
    """

    def __init__(self, model: DrivingModel, beta=0.5, dt=0.05):
        self.model = model.eval()
        self.beta = beta
        self.dt = dt
        self.lat_pid = make_lateral_pid()
        self.lon_pid = make_longitudinal_pid()

    def reset(self):
        self.lat_pid.reset()
        self.lon_pid.reset()

    @torch.no_grad()
    def step(self, obs):
        cfg = self.model.config
        rgb = torch.from_numpy(
            np.ascontiguousarray(obs["rgb"], dtype=np.float32).transpose(2, 0, 1) / 255.0
        ).unsqueeze(0)
        depth_m = decode_depth(obs["depth"])

        feats, skips = self.model.perception.encode_rgb(rgb)
        seg = self.model.perception.seg_decoder(feats, skips)[0].numpy()
        sdc = build_sdc_from_composites(depth_m, seg, cfg.no_sdc_sides)
        sdc_t = torch.from_numpy(sdc.grid.astype(np.float32)).unsqueeze(0)

        meas = MeasurementVector(obs["speed"], obs["command"],
                                 tuple(obs["route_point"])).to_tensor().unsqueeze(0)
        route = torch.tensor([obs["route_point"]], dtype=torch.float32)
        ctrl = self.model.control(feats, self.model.perception.sdc_encoder(sdc_t),
                                  meas, route)

        wps = ctrl["waypoints"][0].numpy().astype(np.float64)
        wps[:, 0] = np.clip(wps[:, 0], -32.0, 32.0)
        wps[:, 1] = np.clip(wps[:, 1], -64.0, 0.0)

        pid_cmd = pid_control(wps, obs["speed"], self.lat_pid, self.lon_pid, self.dt)
        if cfg.no_vc or self.beta == 0.0:
            return pid_cmd, wps
        raw = ctrl["raw_control"][0].numpy()
        adj = ctrl["adjustment"][0].numpy()
        mlp_cmd = combine_controls(raw, adj)
        return control_arbitration(mlp_cmd, pid_cmd, self.beta), wps
