from .depth import decode_depth, encode_depth, load_depth_png, save_depth_png
from .transforms import VehiclePose, global_to_local, local_to_global
from .sdc import (
    CameraSpec,
    GridSpec,
    SdcMap,
    FRONT_GRID,
    SIDE_GRID,
    MERGED_GRID,
    FRONT_CAMERA,
    LEFT_CAMERA,
    RIGHT_CAMERA,
    N_CLASSES,
    SIDE_ROTATION_DEG,
    build_camera_sdc,
    merge_sdc,
    save_sdc,
    load_sdc,
)
from ._backend import HAVE_EXT, backend_name

__all__ = [
    "decode_depth",
    "encode_depth",
    "load_depth_png",
    "save_depth_png",
    "VehiclePose",
    "global_to_local",
    "local_to_global",
    "CameraSpec",
    "GridSpec",
    "SdcMap",
    "FRONT_GRID",
    "SIDE_GRID",
    "MERGED_GRID",
    "FRONT_CAMERA",
    "LEFT_CAMERA",
    "RIGHT_CAMERA",
    "N_CLASSES",
    "SIDE_ROTATION_DEG",
    "build_camera_sdc",
    "merge_sdc",
    "save_sdc",
    "load_sdc",
    "HAVE_EXT",
    "backend_name",
]
