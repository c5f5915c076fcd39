"""Multi-scale feature extraction for stereo matching.

Two interchangeable backends produce the same pyramid contract: S levels,
level s at 1/2^s resolution with a fixed channel count per level.

The handcrafted default stacks translation-equivariant local descriptors
on each pooled image: a 3x3 census transform, gray gradients, box-filtered
color, and wider census rings on the deeper levels. Channel layout per
level (cumulative):
    [0:8]   census ring, radius 1 (soft sign of neighbor minus center)
    [8:10]  gray gradients (dx, dy)
    [10:13] 3x3 box-filtered RGB
    [13:16] 7x7 box-filtered RGB
    [16:24] census ring, radius 2     (levels 2+)
    [24:32] census ring, radius 3     (levels 3+)
Census comparisons use tanh(diff / softness): zero on flat regions like
the hard sign, but stable under the sub-cell sampling phase differences
between the two pooled views (hard signs flip pixel-by-pixel there and
poison the cost volume). A 3x3 box over the finished channels widens the
correlation basin the same way. The last level is optionally
L2-normalized per pixel so correlation scores behave like cosine
similarity.

The weights backend executes a loaded convolution stack with taps s1..sS.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError, WeightLoadError
from .weights_io import WeightsBundle, run_layers

DEFAULT_LEVELS = 3
DEFAULT_CHANNELS = (16, 24, 32)

_CENSUS_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class FeaturePyramid:
    """levels[s-1] has shape (H/2^s, W/2^s, D_s)."""

    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        for lvl in self.levels:
            if not np.all(np.isfinite(lvl)):
                raise InvalidInputError("feature pyramid contains non-finite values")

    @property
    def last(self) -> np.ndarray:
        return self.levels[-1]


def to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img @ np.array([0.299, 0.587, 0.114])


def pool2(image: np.ndarray) -> np.ndarray:
    """2x2 average pooling; requires even height and width."""
    h, w = image.shape[:2]
    if h % 2 or w % 2:
        raise InvalidInputError(f"image size {h}x{w} not divisible by 2 for pooling")
    if image.ndim == 2:
        return 0.25 * (image[0::2, 0::2] + image[1::2, 0::2] + image[0::2, 1::2] + image[1::2, 1::2])
    return 0.25 * (image[0::2, 0::2] + image[1::2, 0::2] + image[0::2, 1::2] + image[1::2, 1::2])


def _census_ring(gray: np.ndarray, radius: int, softness: float = 0.08) -> np.ndarray:
    padded = np.pad(gray, radius, mode="edge")
    h, w = gray.shape
    out = np.empty((h, w, 8))
    for c, (dy, dx) in enumerate(_CENSUS_OFFSETS):
        shifted = padded[radius + dy * radius : radius + dy * radius + h,
                         radius + dx * radius : radius + dx * radius + w]
        out[:, :, c] = np.tanh((shifted - gray) / softness)
    return out


def _gradients(gray: np.ndarray) -> np.ndarray:
    gx = np.gradient(gray, axis=1)
    gy = np.gradient(gray, axis=0)
    return np.stack([gx, gy], axis=-1)


def _box(image: np.ndarray, size: int) -> np.ndarray:
    return ndimage.uniform_filter(image, size=(size, size, 1) if image.ndim == 3 else size, mode="nearest")


@dataclass(frozen=True)
class HandcraftedExtractor:
    levels: int = DEFAULT_LEVELS
    channels: tuple = DEFAULT_CHANNELS
    normalize_last: bool = True
    census_softness: float = 0.08
    smoothing: int = 3

    def __call__(self, image: np.ndarray) -> FeaturePyramid:
        img = np.asarray(image, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None].repeat(3, axis=2)
        h, w = img.shape[:2]
        if h % (1 << self.levels) or w % (1 << self.levels):
            raise InvalidInputError(
                f"image size {h}x{w} must be divisible by {1 << self.levels}"
            )
        out = []
        cur = img
        for s in range(1, self.levels + 1):
            cur = pool2(cur)
            gray = to_gray(cur)
            blocks = [
                _census_ring(gray, 1, self.census_softness),
                _gradients(gray),
                _box(cur, 3),
                _box(cur, 7),
            ]
            if s >= 2:
                blocks.append(_census_ring(gray, 2, self.census_softness))
            if s >= 3:
                blocks.append(_census_ring(gray, 3, self.census_softness))
            feats = np.concatenate(blocks, axis=-1)
            want = self.channels[s - 1]
            if feats.shape[-1] < want:
                raise InvalidInputError(
                    f"handcrafted recipe yields {feats.shape[-1]} channels < {want}"
                )
            feats = feats[:, :, :want]
            if self.smoothing > 1:
                feats = ndimage.uniform_filter(feats, (self.smoothing, self.smoothing, 1), mode="nearest")
            if s == self.levels and self.normalize_last:
                norm = np.linalg.norm(feats, axis=-1, keepdims=True)
                feats = np.divide(feats, norm, out=np.zeros_like(feats), where=norm > 1e-12)
            out.append(feats)
        return FeaturePyramid(levels=out)


@dataclass(frozen=True)
class ConvStackExtractor:
    """Feature pyramid from a loaded convolution stack (taps s1..sS)."""

    bundle: WeightsBundle
    levels: int = DEFAULT_LEVELS
    channels: tuple = DEFAULT_CHANNELS
    normalize_last: bool = True

    def __call__(self, image: np.ndarray) -> FeaturePyramid:
        img = np.asarray(image, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None].repeat(3, axis=2)
        taps = tuple(f"s{s}" for s in range(1, self.levels + 1))
        outputs = run_layers(self.bundle, img, taps=taps)
        out = []
        h, w = img.shape[:2]
        for s, tap in enumerate(taps, start=1):
            feats = outputs[tap]
            expect = (h >> s, w >> s, self.channels[s - 1])
            if feats.shape != expect:
                raise WeightLoadError(
                    f"tap {tap} has shape {feats.shape}, config expects {expect}"
                )
            if s == self.levels and self.normalize_last:
                norm = np.linalg.norm(feats, axis=-1, keepdims=True)
                feats = np.divide(feats, norm, out=np.zeros_like(feats), where=norm > 1e-12)
            out.append(feats)
        return FeaturePyramid(levels=out)


def extract_features(image: np.ndarray, extractor) -> FeaturePyramid:
    """Run a pluggable extractor backend on a rectified image in [0, 1]."""
    return extractor(image)
