"""End-to-end binocular depth estimation for a rectified pair.

Both views get a depth map from one shared-parameter chain:
features -> epipolar attention -> cost volume -> iterative refinement ->
convex upsampling (-> optional photometric sub-pixel polish) -> depth.
The right view is handled by mirroring both images horizontally and
reusing the left-reference chain, so the two directions are exactly
symmetric.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError
from ..geometry.disparity import DepthMap, disparity_to_depth
from ..geometry.rectify import RectifiedPair, bilinear_sample
from .attention import EpipolarAttentionWeights, epipolar_attention
from .cost_volume import build_cost_volume
from .features import (
    DEFAULT_CHANNELS,
    DEFAULT_LEVELS,
    ConvStackExtractor,
    HandcraftedExtractor,
    to_gray,
)
from .update import DisparityField, GruUpdater, MaskUpsampler, convex_upsample, iterative_update
from .weights_io import WeightsBundle

POLISH_DAMPING = 0.8
POLISH_MAX_STEP = 0.5
POLISH_WINDOW = 5


@dataclass(frozen=True)
class StereoConfig:
    """Matcher settings; the JSON config file carries the same keys."""

    backend: str = "handcrafted"
    iterations: int = 8
    lookup_radius: int = 4
    heads: int = 4
    confidence_threshold: float = 0.3
    levels: int = DEFAULT_LEVELS
    channels: tuple = DEFAULT_CHANNELS
    subpixel_polish: bool = True
    polish_iterations: int = 3
    lr_consistency_px: float = 1.5  # 0 disables the left-right check
    encoder_weights: str | None = None
    update_weights: str | None = None
    update_hidden: int = 32
    upsample_weights: str | None = None

    @classmethod
    def from_json(cls, path) -> "StereoConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in cls.__dataclass_fields__.values()}
        fields = {k: v for k, v in data.items() if k in known}
        if "channels" in fields:
            fields["channels"] = tuple(fields["channels"])
        return cls(**fields)

    def to_json(self, path) -> None:
        data = {
            "backend": self.backend,
            "iterations": self.iterations,
            "lookup_radius": self.lookup_radius,
            "heads": self.heads,
            "confidence_threshold": self.confidence_threshold,
            "levels": self.levels,
            "channels": list(self.channels),
            "subpixel_polish": self.subpixel_polish,
            "polish_iterations": self.polish_iterations,
            "encoder_weights": self.encoder_weights,
            "update_weights": self.update_weights,
            "update_hidden": self.update_hidden,
            "upsample_weights": self.upsample_weights,
        }
        Path(path).write_text(json.dumps(data, indent=2), encoding="utf-8")


class StereoBackend:
    """Immutable bundle of extractor, attention and update operators."""

    def __init__(self, config: StereoConfig, attention: EpipolarAttentionWeights | None = None):
        self.config = config
        self.upsampler = None
        if config.backend == "handcrafted":
            self.extractor = HandcraftedExtractor(levels=config.levels, channels=config.channels)
            self.updater = None
        elif config.backend == "weights":
            if config.encoder_weights is None:
                raise InvalidInputError("weights backend needs encoder_weights")
            bundle = WeightsBundle.load(config.encoder_weights)
            self.extractor = ConvStackExtractor(
                bundle=bundle, levels=config.levels, channels=config.channels
            )
            self.updater = None
            if config.update_weights is not None:
                self.updater = GruUpdater(WeightsBundle.load(config.update_weights), config.update_hidden)
            if config.upsample_weights is not None:
                self.upsampler = MaskUpsampler(WeightsBundle.load(config.upsample_weights), 1 << config.levels)
        else:
            raise InvalidInputError(f"unknown stereo backend {config.backend!r}")
        dim = config.channels[config.levels - 1]
        self.attention = attention or EpipolarAttentionWeights.passthrough(dim, config.heads)


def _photometric_polish(
    disparity: np.ndarray,
    validity: np.ndarray,
    gray_left: np.ndarray,
    gray_right: np.ndarray,
    iterations: int,
    smoothing_stages: tuple = (2.5, 1.0),
) -> np.ndarray:
    """Damped Gauss-Newton sub-pixel correction along scanlines.

    Minimizes the windowed photometric residual I_l(u) - I_r(u - d) using
    the right image's horizontal gradient. Coarse-to-fine smoothing widens
    the convergence basin beyond a pixel before the fine stage locks in
    sub-pixel alignment.
    """
    h, w = gray_left.shape
    vv, uu = np.mgrid[0:h, 0:w].astype(np.float64)
    d = disparity.copy()
    for stage, sigma in enumerate(smoothing_stages):
        gl = ndimage.gaussian_filter(gray_left, sigma, mode="nearest")
        gr = ndimage.gaussian_filter(gray_right, sigma, mode="nearest")
        grx = np.gradient(gr, axis=1)
        step_cap = POLISH_MAX_STEP * max(sigma, 1.0)
        for _ in range(iterations):
            x_match = uu - d
            ir, ok = bilinear_sample(gr, x_match, vv)
            gx, _ = bilinear_sample(grx, x_match, vv)
            e = (gl - ir) * ok * validity
            gx = gx * ok * validity
            num = ndimage.uniform_filter(e * gx, POLISH_WINDOW, mode="nearest")
            den = ndimage.uniform_filter(gx * gx, POLISH_WINDOW, mode="nearest") + 1e-8
            step = np.clip(-POLISH_DAMPING * num / den, -step_cap, step_cap)
            d = np.maximum(d + step * validity, 0.0)
    return d


def _upsample_confidence(confidence: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(np.repeat(confidence, factor, axis=0), factor, axis=1)


def estimate_disparity(
    left_image: np.ndarray,
    right_image: np.ndarray,
    backend: StereoBackend,
) -> tuple[DisparityField, np.ndarray]:
    """Left-reference disparity (full resolution) and confidence map."""
    cfg = backend.config
    pyr_l = backend.extractor(left_image)
    pyr_r = backend.extractor(right_image)
    f_l, f_r = epipolar_attention(pyr_l.last, pyr_r.last, backend.attention)
    volume = build_cost_volume(f_l, f_r)
    context = pyr_l.last
    coarse, confidence = iterative_update(
        volume,
        context,
        iterations=cfg.iterations,
        lookup_radius=cfg.lookup_radius,
        updater=backend.updater,
    )
    factor = 1 << cfg.levels
    if backend.upsampler is not None:
        fine = convex_upsample(coarse, factor, weights=backend.upsampler(context))
    else:
        fine = convex_upsample(coarse, factor, guidance=left_image)
    if cfg.subpixel_polish:
        gl = to_gray(np.asarray(left_image, dtype=np.float64))
        gr = to_gray(np.asarray(right_image, dtype=np.float64))
        polished = _photometric_polish(
            fine.values, fine.validity, gl, gr, cfg.polish_iterations
        )
        fine = DisparityField(values=polished, validity=fine.validity, trace=fine.trace)
    conf_full = _upsample_confidence(confidence, factor)
    return fine, conf_full


@dataclass
class StereoResult:
    """Depth maps plus the underlying disparity fields (traces included)."""

    depth_left: DepthMap
    depth_right: DepthMap
    disparity_left: DisparityField
    disparity_right: DisparityField


def estimate_depth_pair(
    pair: RectifiedPair,
    config: StereoConfig | None = None,
    backend: StereoBackend | None = None,
) -> tuple[DepthMap, DepthMap]:
    """Depth maps for both rectified views with one shared backend."""
    result = match_pair(pair, config=config, backend=backend)
    return result.depth_left, result.depth_right


def match_pair(
    pair: RectifiedPair,
    config: StereoConfig | None = None,
    backend: StereoBackend | None = None,
) -> StereoResult:
    """Full stereo result for a rectified pair.

    Validity requires rectification coverage, an in-bounds match column,
    and confidence at or above the configured threshold; depth conversion
    marks near-zero disparities invalid on top of that.
    """
    if backend is None:
        backend = StereoBackend(config or StereoConfig())
    cfg = backend.config

    disp_l, conf_l = estimate_disparity(pair.left_image, pair.right_image, backend)
    mirror_l = pair.right_image[:, ::-1]
    mirror_r = pair.left_image[:, ::-1]
    disp_r_m, conf_r_m = estimate_disparity(mirror_l, mirror_r, backend)
    disp_r = DisparityField(
        values=disp_r_m.values[:, ::-1].copy(),
        validity=disp_r_m.validity[:, ::-1].copy(),
        trace=[t[:, ::-1].copy() for t in disp_r_m.trace],
    )
    conf_r = conf_r_m[:, ::-1].copy()

    h, w = pair.shape
    uu = np.arange(w)[None, :].astype(np.float64)
    fx = pair.left_K.fx

    valid_l = (
        disp_l.validity
        & pair.left_mask
        & (uu - disp_l.values >= -0.5)
        & (conf_l >= cfg.confidence_threshold)
    )
    valid_r = (
        disp_r.validity
        & pair.right_mask
        & (uu + disp_r.values <= w - 0.5)
        & (conf_r >= cfg.confidence_threshold)
    )
    if cfg.lr_consistency_px > 0:
        # mutual agreement kills confident mismatches and occlusions
        vv = np.repeat(np.arange(h)[:, None], w, axis=1).astype(np.float64)
        d_r_at_l, ok_l = bilinear_sample(disp_r.values, uu - disp_l.values, vv)
        d_l_at_r, ok_r = bilinear_sample(disp_l.values, uu + disp_r.values, vv)
        valid_l &= ok_l & (np.abs(disp_l.values - d_r_at_l) <= cfg.lr_consistency_px)
        valid_r &= ok_r & (np.abs(disp_r.values - d_l_at_r) <= cfg.lr_consistency_px)

    depth_l = disparity_to_depth(disp_l.values, fx, pair.baseline, validity=valid_l)
    depth_r = disparity_to_depth(disp_r.values, fx, pair.baseline, validity=valid_r)
    return StereoResult(
        depth_left=DepthMap(values=depth_l.values, validity=depth_l.validity, confidence=conf_l),
        depth_right=DepthMap(values=depth_r.values, validity=depth_r.validity, confidence=conf_r),
        disparity_left=disp_l,
        disparity_right=disp_r,
    )
