"""Pixel-wise Gaussian parameter maps and their lifting to 3D clouds."""

from .cloud import (
    VIEW_TAG_LEFT,
    VIEW_TAG_NONE,
    VIEW_TAG_RIGHT,
    GaussianCloud,
    empty_cloud,
    lift_to_gaussians,
    merge_views,
)
from .maps import (
    DEFAULT_BASE_SCALE_PX,
    GAMMA_CHANNELS,
    RESIDUAL_GAMMA,
    SCALE_MAX,
    SCALE_MIN,
    GaussianFeatureMap,
    GaussianHeads,
    GaussianMapperWeights,
    GaussianParameterMaps,
    activate_heads,
    color_map,
    raw_head_outputs,
    regress_parameter_features,
)
from .ply import load_ply, save_ply

__all__ = [
    "GaussianCloud",
    "GaussianFeatureMap",
    "GaussianHeads",
    "GaussianMapperWeights",
    "GaussianParameterMaps",
    "GAMMA_CHANNELS",
    "RESIDUAL_GAMMA",
    "SCALE_MIN",
    "SCALE_MAX",
    "DEFAULT_BASE_SCALE_PX",
    "VIEW_TAG_LEFT",
    "VIEW_TAG_RIGHT",
    "VIEW_TAG_NONE",
    "activate_heads",
    "color_map",
    "empty_cloud",
    "lift_to_gaussians",
    "load_ply",
    "merge_views",
    "raw_head_outputs",
    "regress_parameter_features",
    "save_ply",
]
