"""Camera models, rectification, disparity/depth mapping and view selection."""

from .calibration import load_calibration, rig_from_dict, rig_to_dict, save_calibration
from .camera import (
    CameraIntrinsics,
    CameraPose,
    CameraRig,
    ProjectionMatrix,
    project_point,
    project_points,
    unproject_pixel,
    unproject_pixels,
)
from .disparity import DISPARITY_EPSILON, DepthMap, depth_to_disparity, disparity_to_depth
from .rectify import RectifiedPair, bilinear_sample, rectify_pair, warp_homography
from .selection import select_source_pair

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "CameraRig",
    "ProjectionMatrix",
    "RectifiedPair",
    "DepthMap",
    "DISPARITY_EPSILON",
    "project_point",
    "project_points",
    "unproject_pixel",
    "unproject_pixels",
    "disparity_to_depth",
    "depth_to_disparity",
    "rectify_pair",
    "warp_homography",
    "bilinear_sample",
    "select_source_pair",
    "load_calibration",
    "save_calibration",
    "rig_from_dict",
    "rig_to_dict",
]
