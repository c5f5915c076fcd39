"""Tile-based software splat renderer with analytic gradients."""

from ._kernels import ALPHA_MIN, Q_MAX, TRANSMITTANCE_EPS
from .camera_project import (
    BLUR_FLOOR,
    FOOTPRINT_SIGMA,
    NEAR_PLANE,
    ProjectedCloud,
    ProjectedGaussian2D,
    project_cloud,
    project_gaussian,
)
from .covariance import build_covariance, build_covariances, normalize_quaternions, quaternion_to_matrix
from .gradients import RenderGradients, render_with_gradients
from .rasterizer import RenderConfig, RenderedFrame, composite, render, warmup
from .tiles import TILE_SIZE, TileBins, bin_and_sort

__all__ = [
    "ALPHA_MIN",
    "Q_MAX",
    "TRANSMITTANCE_EPS",
    "BLUR_FLOOR",
    "NEAR_PLANE",
    "FOOTPRINT_SIGMA",
    "TILE_SIZE",
    "RenderConfig",
    "RenderedFrame",
    "RenderGradients",
    "ProjectedCloud",
    "ProjectedGaussian2D",
    "TileBins",
    "build_covariance",
    "build_covariances",
    "normalize_quaternions",
    "quaternion_to_matrix",
    "project_cloud",
    "project_gaussian",
    "bin_and_sort",
    "composite",
    "render",
    "render_with_gradients",
    "warmup",
]
