"""Per-pixel Gaussian parameter maps regressed on a rectified source view.

A fused feature tensor (the image encodings concatenated with a
multi-scale depth encoding and decoded to full resolution) feeds four
heads whose raw outputs pass through fixed activations:

    rotation       unit-normalized quaternion
    scale          softplus * scale_gain, clamped to [s_min, s_max]
    opacity        sigmoid
    depth residual RESIDUAL_GAMMA * tanh, i.e. bounded to (-0.5, 0.5) m

The handcrafted backend emits raw head values that realize simple
deterministic heuristics (identity rotations; pixel-footprint scales that
shrink on high-texture pixels; opacity from stereo confidence; zero
residual); the weights backend runs small loaded conv stacks instead.
Both meet the same activation/range contract.

Fused-feature channel layout (GAMMA_CHANNELS = 64), fixed so tests and
heads can address channels by meaning:
    0        depth (meters, full resolution)
    1, 2     d/dx, d/dy of log depth
    3        5x5 variance of log depth
    4        5x5 variance of gray (texture busyness)
    5-7      source RGB
    8-10     3x3 box-filtered RGB
    11       gray gradient magnitude
    12-23    per-level depth encodings, upsampled (z, dlogz/dx, dlogz/dy,
             var(log z)) for levels 1..3
    24-63    per-level image features, upsampled (14 + 14 + 12 channels)
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError, WeightLoadError
from ..geometry.disparity import DepthMap
from ..stereo.features import FeaturePyramid, to_gray
from ..stereo.weights_io import WeightsBundle, conv2d, run_layers

GAMMA_CHANNELS = 64
RESIDUAL_GAMMA = 0.5
SCALE_MIN = 1e-5
SCALE_MAX = 0.5
DEFAULT_BASE_SCALE_PX = 0.5
TEXTURE_VAR_THRESHOLD = 0.003
_DEPTH_EPS = 1e-6


@dataclass
class GaussianParameterMaps:
    """Pixel-aligned Gaussian attributes on a rectified source plane."""

    color: np.ndarray  # (H, W, 3) in [0, 1]
    rotation: np.ndarray  # (H, W, 4) unit quaternions
    scale: np.ndarray  # (H, W, 3) meters, positive
    opacity: np.ndarray  # (H, W) in [0, 1]
    depth_residual: np.ndarray  # (H, W) in (-RESIDUAL_GAMMA, RESIDUAL_GAMMA)
    validity: np.ndarray  # (H, W) bool
    rotation_fallback: np.ndarray = field(default=None)  # zero-norm raw quats

    def __post_init__(self):
        if self.rotation_fallback is None:
            self.rotation_fallback = np.zeros(self.opacity.shape, dtype=bool)

    def validate(self) -> None:
        h, w = self.opacity.shape
        if self.color.shape != (h, w, 3) or self.rotation.shape != (h, w, 4) or self.scale.shape != (h, w, 3):
            raise InvalidInputError("parameter map shapes disagree")
        ok = self.validity
        norms = np.linalg.norm(self.rotation[ok], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > 1e-6:
            raise InvalidInputError("rotation map has non-unit quaternions on valid pixels")
        if np.any(self.scale[ok] <= 0):
            raise InvalidInputError("scale map has non-positive entries")
        if np.any((self.opacity[ok] < 0) | (self.opacity[ok] > 1)):
            raise InvalidInputError("opacity map leaves [0, 1]")
        if np.any(np.abs(self.depth_residual[ok]) >= RESIDUAL_GAMMA):
            raise InvalidInputError("depth residual leaves the bounded range")


@dataclass(frozen=True)
class GaussianFeatureMap:
    """Fused full-resolution feature tensor (H, W, GAMMA_CHANNELS)."""

    data: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("fused feature map contains non-finite values")


def color_map(image: np.ndarray) -> np.ndarray:
    """The source view itself is the color map (no SH coefficients)."""
    return np.array(image, dtype=np.float64)


def _safe_log(z: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(z, _DEPTH_EPS))


def _variance(x: np.ndarray, size: int = 5) -> np.ndarray:
    mean = ndimage.uniform_filter(x, size, mode="nearest")
    sq = ndimage.uniform_filter(x * x, size, mode="nearest")
    return np.maximum(sq - mean * mean, 0.0)


def _depth_block(z: np.ndarray) -> np.ndarray:
    logz = _safe_log(z)
    return np.stack(
        [z, np.gradient(logz, axis=1), np.gradient(logz, axis=0), _variance(logz)],
        axis=-1,
    )


def _upsample(x: np.ndarray, factor: int) -> np.ndarray:
    up = np.repeat(np.repeat(x, factor, axis=0), factor, axis=1)
    if factor > 1:
        size = (factor + 1, factor + 1, 1) if up.ndim == 3 else (factor + 1, factor + 1)
        up = ndimage.uniform_filter(up, size, mode="nearest")
    return up


def _pool(x: np.ndarray, factor: int) -> np.ndarray:
    h, w = x.shape[:2]
    return x[: h - h % factor, : w - w % factor].reshape(
        h // factor, factor, w // factor, factor
    ).mean(axis=(1, 3))


_IMAGE_FEATURE_WIDTHS = (14, 14, 12)


def regress_parameter_features(
    image: np.ndarray,
    image_features: FeaturePyramid,
    depth: DepthMap,
    backend=None,
) -> GaussianFeatureMap:
    """Fuse image and depth encodings into the full-resolution tensor.

    The handcrafted path assembles the documented channel layout; a
    weights backend (GaussianMapperWeights) additionally runs its decoder
    stack on that tensor and must emit GAMMA_CHANNELS channels.
    """
    img = np.asarray(image, dtype=np.float64)
    z = depth.values
    h, w = z.shape
    if img.shape[:2] != (h, w):
        raise InvalidInputError(f"image {img.shape[:2]} and depth {z.shape} misaligned")
    expected = tuple((h >> s, w >> s) for s in range(1, len(image_features.levels) + 1))
    got = tuple(lvl.shape[:2] for lvl in image_features.levels)
    if expected != got:
        raise InvalidInputError(f"feature pyramid {got} does not match depth plane {z.shape}")

    gray = to_gray(img)
    logz = _safe_log(z)
    blocks = [
        z[:, :, None],
        np.gradient(logz, axis=1)[:, :, None],
        np.gradient(logz, axis=0)[:, :, None],
        _variance(logz)[:, :, None],
        _variance(gray)[:, :, None],
        img,
        ndimage.uniform_filter(img, (3, 3, 1), mode="nearest"),
        np.hypot(np.gradient(gray, axis=1), np.gradient(gray, axis=0))[:, :, None],
    ]
    for s in range(1, len(image_features.levels) + 1):
        blocks.append(_upsample(_depth_block(_pool(z, 1 << s)), 1 << s))
    for s, lvl in enumerate(image_features.levels, start=1):
        width = _IMAGE_FEATURE_WIDTHS[s - 1]
        blocks.append(_upsample(lvl[:, :, :width], 1 << s))
    gamma = np.concatenate(blocks, axis=-1)
    if gamma.shape[-1] != GAMMA_CHANNELS:
        raise InvalidInputError(
            f"fused feature layout produced {gamma.shape[-1]} channels, expected {GAMMA_CHANNELS}"
        )
    if backend is not None:
        gamma = backend.decode(gamma)
    return GaussianFeatureMap(data=np.nan_to_num(gamma, nan=0.0, posinf=0.0, neginf=0.0))


class GaussianMapperWeights:
    """Loaded conv stacks: a decoder over the fused tensor plus the four
    prediction heads (two conv layers each)."""

    HEAD_CHANNELS = {"rotation": 4, "scale": 3, "opacity": 1, "residual": 1}

    def __init__(self, bundle: WeightsBundle):
        self.bundle = bundle
        for head, out_ch in self.HEAD_CHANNELS.items():
            w2 = bundle.tensor(f"head_{head}.conv2.weight")
            if w2.shape[0] != out_ch:
                raise WeightLoadError(
                    f"head {head!r} emits {w2.shape[0]} channels, needs {out_ch}"
                )

    def decode(self, gamma: np.ndarray) -> np.ndarray:
        if not self.bundle.layers:
            return gamma
        out = run_layers(self.bundle, gamma)["out"]
        if out.shape[-1] != GAMMA_CHANNELS:
            raise WeightLoadError(
                f"decoder emits {out.shape[-1]} channels, expected {GAMMA_CHANNELS}"
            )
        return out

    def head(self, name: str, gamma: np.ndarray) -> np.ndarray:
        x = conv2d(gamma, self.bundle.tensor(f"head_{name}.conv1.weight"),
                   self.bundle.tensors.get(f"head_{name}.conv1.bias"))
        x = np.maximum(x, 0.0)
        return conv2d(x, self.bundle.tensor(f"head_{name}.conv2.weight"),
                      self.bundle.tensors.get(f"head_{name}.conv2.bias"))


@dataclass(frozen=True)
class GaussianHeads:
    """Head configuration shared by both backends.

    fx ties the pixel-footprint scale heuristic to the rectified camera;
    weights switches to loaded conv heads. The confidence->opacity curve
    saturates at opacity_saturation: merged views only stack a few splats
    per pixel, so solid matches must reach near-full opacity or the
    background bleeds through, while genuinely uncertain pixels stay
    faint.
    """

    fx: float
    base_scale_px: float = DEFAULT_BASE_SCALE_PX
    scale_gain: float = 1.0
    s_min: float = SCALE_MIN
    s_max: float = SCALE_MAX
    texture_threshold: float = TEXTURE_VAR_THRESHOLD
    gamma: float = RESIDUAL_GAMMA
    opacity_saturation: float = 0.6
    opacity_cap: float = 0.999
    weights: GaussianMapperWeights | None = None


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _softplus_inv(y: np.ndarray) -> np.ndarray:
    y = np.maximum(y, 1e-12)
    return np.where(y > 30.0, y, np.log(np.expm1(y)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-9, 1.0 - 1e-9)
    return np.log(p) - np.log1p(-p)


def raw_head_outputs(gamma: GaussianFeatureMap, heads: GaussianHeads, depth: DepthMap) -> dict:
    """Raw (pre-activation) head values for either backend."""
    g = gamma.data
    h, w = g.shape[:2]
    if heads.weights is not None:
        return {
            "rotation": heads.weights.head("rotation", g),
            "scale": heads.weights.head("scale", g),
            "opacity": heads.weights.head("opacity", g)[:, :, 0],
            "residual": heads.weights.head("residual", g)[:, :, 0],
        }
    # identity quaternion bias
    rot = np.zeros((h, w, 4))
    rot[:, :, 0] = 1.0
    # pixel footprint at depth z, halved on busy texture
    z = np.maximum(depth.values, _DEPTH_EPS)
    desired = heads.base_scale_px * z / heads.fx
    desired = np.where(g[:, :, 4] > heads.texture_threshold, 0.5 * desired, desired)
    raw_scale = _softplus_inv(desired / heads.scale_gain)[:, :, None].repeat(3, axis=2)
    confidence = depth.confidence if depth.confidence is not None else np.full((h, w), 0.98)
    opacity = np.clip(confidence / heads.opacity_saturation, 0.0, heads.opacity_cap)
    return {
        "rotation": rot,
        "scale": raw_scale,
        "opacity": _logit(opacity),
        "residual": np.zeros((h, w)),
    }


def activate_heads(
    gamma: GaussianFeatureMap,
    heads: GaussianHeads,
    depth: DepthMap,
    color: np.ndarray | None = None,
) -> GaussianParameterMaps:
    """Apply the fixed activations to raw head outputs and assemble maps.

    The color map defaults to the RGB channels stored in the fused tensor.
    """
    g = gamma.data
    h, w = g.shape[:2]
    raw = raw_head_outputs(gamma, heads, depth)
    if raw["rotation"].shape != (h, w, 4) or raw["scale"].shape != (h, w, 3):
        raise InvalidInputError("head output shapes do not match the feature map")

    norms = np.linalg.norm(raw["rotation"], axis=-1, keepdims=True)
    fallback = norms[:, :, 0] <= 1e-12
    rotation = np.divide(raw["rotation"], norms, out=np.zeros_like(raw["rotation"]), where=norms > 1e-12)
    rotation[fallback] = np.array([1.0, 0.0, 0.0, 0.0])

    scale = np.clip(_softplus(raw["scale"]) * heads.scale_gain, heads.s_min, heads.s_max)
    opacity = _sigmoid(raw["opacity"])
    residual = heads.gamma * np.tanh(raw["residual"])

    if color is None:
        color = g[:, :, 5:8]
    return GaussianParameterMaps(
        color=np.clip(color, 0.0, 1.0),
        rotation=rotation,
        scale=scale,
        opacity=opacity,
        depth_residual=residual,
        validity=depth.validity.copy(),
        rotation_fallback=fallback,
    )
