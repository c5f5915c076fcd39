"""Binocular stereo matching: features, attention, cost volume, updates."""

from .attention import EpipolarAttentionWeights, attention_term, epipolar_attention
from .cost_volume import CostVolume, build_cost_volume, lookup_cost, sample_cost_triplet
from .features import (
    ConvStackExtractor,
    FeaturePyramid,
    HandcraftedExtractor,
    extract_features,
    pool2,
    to_gray,
)
from .matcher import StereoBackend, StereoConfig, StereoResult, estimate_depth_pair, estimate_disparity, match_pair
from .update import DisparityField, GruUpdater, MaskUpsampler, convex_upsample, init_from_volume, iterative_update
from .weights_io import WeightsBundle, conv2d, run_layers, save_weights

__all__ = [
    "CostVolume",
    "DisparityField",
    "EpipolarAttentionWeights",
    "FeaturePyramid",
    "ConvStackExtractor",
    "HandcraftedExtractor",
    "GruUpdater",
    "MaskUpsampler",
    "StereoBackend",
    "StereoConfig",
    "StereoResult",
    "WeightsBundle",
    "attention_term",
    "build_cost_volume",
    "conv2d",
    "convex_upsample",
    "epipolar_attention",
    "estimate_depth_pair",
    "estimate_disparity",
    "extract_features",
    "init_from_volume",
    "iterative_update",
    "lookup_cost",
    "match_pair",
    "pool2",
    "run_layers",
    "sample_cost_triplet",
    "save_weights",
    "to_gray",
]
