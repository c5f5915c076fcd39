"""Disparity <-> depth conversion for rectified stereo pairs.

For a rectified pair with shared focal length fx (pixels) and baseline b
(meters), a pixel at disparity d sees depth z = fx * b / d. Disparities at
or below disparity_epsilon are marked invalid instead of producing huge or
infinite depths; invalidity always travels in the mask, never as NaN or a
sentinel value.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

DISPARITY_EPSILON = 1e-3


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters with validity and match confidence."""

    values: np.ndarray
    validity: np.ndarray
    confidence: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.validity, dtype=bool)
        if vals.shape != mask.shape:
            raise InvalidInputError("depth values and validity mask shapes differ")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "validity", mask)
        if self.confidence is not None:
            conf = np.asarray(self.confidence, dtype=np.float64)
            if conf.shape != vals.shape:
                raise InvalidInputError("confidence shape differs from depth shape")
            object.__setattr__(self, "confidence", conf)


def _check_fx_baseline(fx: float, baseline: float):
    if fx <= 0.0:
        raise InvalidInputError(f"fx must be positive, got {fx}")
    if baseline <= 0.0:
        raise InvalidInputError(f"baseline must be positive, got {baseline}")


def disparity_to_depth(
    disparity: np.ndarray,
    fx: float,
    baseline: float,
    validity: np.ndarray | None = None,
    epsilon: float = DISPARITY_EPSILON,
) -> DepthMap:
    """z = fx * baseline / d, with d <= epsilon marked invalid."""
    _check_fx_baseline(fx, baseline)
    d = np.asarray(disparity, dtype=np.float64)
    ok = d > epsilon
    if validity is not None:
        ok = ok & np.asarray(validity, dtype=bool)
    z = np.zeros_like(d)
    np.divide(fx * baseline, d, out=z, where=ok)
    return DepthMap(values=z, validity=ok)


def fill_invalid(
    depth: DepthMap,
    within: np.ndarray | None = None,
    pseudo_confidence: float = 0.5,
    smoothing: int = 5,
) -> DepthMap:
    """Fill invalid pixels from their nearest valid neighbor.

    Filled pixels become valid with `pseudo_confidence`; `within` limits
    filling (e.g. to the rectification footprint). Filled regions are
    lightly box-smoothed so seams do not imprint on the depth.
    """
    from scipy import ndimage

    ok = depth.validity
    if not ok.any():
        return depth
    target = np.ones_like(ok) if within is None else (np.asarray(within, dtype=bool) | ok)
    _, (iy, ix) = ndimage.distance_transform_edt(~ok, return_indices=True)
    filled = depth.values[iy, ix]
    hole = target & ~ok
    if smoothing > 1 and hole.any():
        smoothed = ndimage.uniform_filter(filled, smoothing, mode="nearest")
        filled = np.where(hole, smoothed, filled)
    values = np.where(target, filled, 0.0)
    if depth.confidence is not None:
        confidence = np.where(hole, pseudo_confidence, depth.confidence)
    else:
        confidence = np.where(hole, pseudo_confidence, 1.0)
    return DepthMap(values=values, validity=target, confidence=confidence)


def depth_to_disparity(
    depth: np.ndarray,
    fx: float,
    baseline: float,
    validity: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse mapping d = fx * baseline / z. Returns (disparity, validity)."""
    _check_fx_baseline(fx, baseline)
    if isinstance(depth, DepthMap):
        if validity is None:
            validity = depth.validity
        depth = depth.values
    z = np.asarray(depth, dtype=np.float64)
    ok = z > 0.0
    if validity is not None:
        ok = ok & np.asarray(validity, dtype=bool)
    d = np.zeros_like(z)
    np.divide(fx * baseline, z, out=d, where=ok)
    return d, ok
