"""Semantic BEV occupancy grid assembly.

Each camera's depth map and predicted segmentation are scattered into a
per-camera top-down label grid (height is discarded), the side grids are
rotated toward their mounting direction, and the three grids are merged
into a single one-hot 23-channel tensor covering 64 m ahead of the ego.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels

N_CLASSES = 23
FORWARD_RANGE_M = 64.0
SIDE_ROTATION_DEG = 42.0

MERGED_ROWS = 160
MERGED_COLS = 768


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    cell_forward: float
    cell_lateral: float

    @property
    def forward_range(self):
        return self.rows * self.cell_forward


@dataclass(frozen=True)
class CameraSpec:
    yaw_offset_deg: float
    image_width: int
    image_height: int
    horizontal_fov_deg: float = 60.0

    def focal_px(self):
        return (self.image_width / 2.0) / math.tan(
            math.radians(self.horizontal_fov_deg) / 2.0
        )


@dataclass
class SdcMap:
    grid: np.ndarray  # n_classes x rows x cols, {0,1}
    cell_forward: float
    cell_lateral: float


_CELL_FWD = FORWARD_RANGE_M / MERGED_ROWS  # 0.4 m per row
_CELL_LAT = FORWARD_RANGE_M / MERGED_COLS  # ~8.33 cm per column

FRONT_GRID = GridSpec(MERGED_ROWS, 320, _CELL_FWD, _CELL_LAT)
SIDE_GRID = GridSpec(MERGED_ROWS, 224, _CELL_FWD, _CELL_LAT)
MERGED_GRID = GridSpec(MERGED_ROWS, MERGED_COLS, _CELL_FWD, _CELL_LAT)

FRONT_CAMERA = CameraSpec(0.0, 320, 160)
LEFT_CAMERA = CameraSpec(60.0, 224, 160)   # positive yaw = counterclockwise
RIGHT_CAMERA = CameraSpec(-60.0, 224, 160)


def _labels_to_onehot(label_grid, n_classes):
    onehot = np.zeros((n_classes,) + label_grid.shape, dtype=np.uint8)
    ri, ci = np.nonzero(label_grid >= 0)
    onehot[label_grid[ri, ci], ri, ci] = 1
    return onehot


def _onehot_to_labels(grid):
    occupied = grid.sum(axis=0) > 0
    labels = np.where(occupied, grid.argmax(axis=0), -1)
    return np.ascontiguousarray(labels.astype(np.int64))


def build_camera_sdc(depth, seg, cam, grid=None, n_classes=N_CLASSES):
    """Project one camera's pixels into a one-hot top-down grid.

    depth: H x W meters; seg: n_classes x H x W per-pixel class scores.
    Pixels keep the argmax class of their segmentation; only the forward
    and lateral coordinates survive the projection.  Returns an array of
    shape (n_classes, grid.rows, grid.cols) in {0, 1}.
    """
    depth = np.ascontiguousarray(depth, dtype=np.float64)
    seg = np.asarray(seg)
    if grid is None:
        grid = FRONT_GRID if cam.image_width == FRONT_GRID.cols else SIDE_GRID
    if depth.shape != (cam.image_height, cam.image_width):
        raise ValueError(
            f"depth shape {depth.shape} does not match camera "
            f"{cam.image_height}x{cam.image_width}"
        )
    if seg.shape != (n_classes,) + depth.shape:
        raise ValueError(f"segmentation shape {seg.shape} does not match depth")

    labels = np.ascontiguousarray(seg.argmax(axis=0).astype(np.int64))
    u = np.arange(cam.image_width, dtype=np.float64) + 0.5 - cam.image_width / 2.0
    xlat = np.ascontiguousarray(u[None, :] / cam.focal_px() * depth)

    label_grid = kernels.project_to_grid(
        depth, labels, xlat, grid.rows, grid.cols, grid.cell_forward, grid.cell_lateral
    )
    return _labels_to_onehot(label_grid, n_classes)


def merge_sdc(front, left, right, merged=None, side_rotation_deg=SIDE_ROTATION_DEG):
    """Merge the three per-camera grids into one wide BEV map.

    The front grid is copied unrotated into the central columns and takes
    priority; the left/right grids are rotated by +/-``side_rotation_deg``
    about the shared ego origin (bottom-center) and splatted into their
    respective halves, never overwriting occupied cells.
    """
    front = np.asarray(front)
    left = np.asarray(left)
    right = np.asarray(right)
    n_classes = front.shape[0]
    if left.shape[0] != n_classes or right.shape[0] != n_classes:
        raise ValueError("camera grids disagree on channel count")
    if left.shape != right.shape:
        raise ValueError(f"side grid shapes differ: {left.shape} vs {right.shape}")
    if merged is None:
        merged = MERGED_GRID
    if front.shape[1] != merged.rows or left.shape[1] != merged.rows:
        raise ValueError("camera grids disagree with merged row count")
    if front.shape[2] > merged.cols:
        raise ValueError("front grid wider than merged grid")

    dest = np.full((merged.rows, merged.cols), -1, dtype=np.int64)
    off = (merged.cols - front.shape[2]) // 2
    dest[:, off : off + front.shape[2]] = _onehot_to_labels(front)

    half = merged.cols // 2
    kernels.splat_rotated(
        _onehot_to_labels(left), +side_rotation_deg,
        merged.cell_forward, merged.cell_lateral, dest, 0, half,
    )
    kernels.splat_rotated(
        _onehot_to_labels(right), -side_rotation_deg,
        merged.cell_forward, merged.cell_lateral, dest, half, merged.cols,
    )
    return SdcMap(
        grid=_labels_to_onehot(dest, n_classes),
        cell_forward=merged.cell_forward,
        cell_lateral=merged.cell_lateral,
    )


def save_sdc(path_prefix, sdc):
    """Dump an SdcMap as a raw binary tensor plus a JSON sidecar."""
    grid = np.ascontiguousarray(sdc.grid, dtype=np.uint8)
    with open(str(path_prefix) + ".bin", "wb") as f:
        f.write(grid.tobytes())
    meta = {
        "shape": list(grid.shape),
        "dtype": "uint8",
        "cell_forward": sdc.cell_forward,
        "cell_lateral": sdc.cell_lateral,
    }
    with open(str(path_prefix) + ".json", "w") as f:
        json.dump(meta, f, indent=2)


def load_sdc(path_prefix):
    with open(str(path_prefix) + ".json") as f:
        meta = json.load(f)
    with open(str(path_prefix) + ".bin", "rb") as f:
        grid = np.frombuffer(f.read(), dtype=meta["dtype"]).reshape(meta["shape"])
    return SdcMap(grid=grid.copy(), cell_forward=meta["cell_forward"],
                  cell_lateral=meta["cell_lateral"])
