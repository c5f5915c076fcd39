"""SSIM (Gaussian-windowed) with an analytic input adjoint.

Matches the standard formulation: 11x11 Gaussian window (sigma 1.5),
C1 = (0.01 L)^2, C2 = (0.03 L)^2 on unit dynamic range, population
(filter-weighted) moments, and a border crop of half the window before
averaging. Channels are scored independently and averaged.
"""

import numpy as np
from scipy import ndimage

from ..errors import InvalidInputError

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5 -> 11x11 window
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
_PAD = int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5)


def _filt(x: np.ndarray) -> np.ndarray:
    # zero padding keeps the filter exactly self-adjoint, which the
    # analytic SSIM gradient relies on; the border band it distorts lies
    # inside the crop that every reported value excludes anyway
    return ndimage.gaussian_filter(x, SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="constant", cval=0.0)


def _terms(x: np.ndarray, y: np.ndarray):
    mx = _filt(x)
    my = _filt(y)
    sxx = _filt(x * x) - mx * mx
    syy = _filt(y * y) - my * my
    sxy = _filt(x * y) - mx * my
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * sxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = sxx + syy + SSIM_C2
    return mx, my, a1, a2, b1, b2


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-pixel (and per-channel) structural similarity in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInputError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        _, _, a1, a2, b1, b2 = _terms(x, y)
        return (a1 * a2) / (b1 * b2)
    out = np.empty_like(x)
    for c in range(x.shape[2]):
        _, _, a1, a2, b1, b2 = _terms(x[:, :, c], y[:, :, c])
        out[:, :, c] = (a1 * a2) / (b1 * b2)
    return out


def crop_mask(shape: tuple, mask: np.ndarray | None = None) -> np.ndarray:
    """Valid-region mask with the SSIM border crop applied."""
    h, w = shape[:2]
    out = np.zeros((h, w), dtype=bool)
    if h > 2 * _PAD and w > 2 * _PAD:
        out[_PAD : h - _PAD, _PAD : w - _PAD] = True
    else:
        out[:] = True
    if mask is not None:
        out &= np.asarray(mask, dtype=bool)
    return out


def ssim(x: np.ndarray, y: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean SSIM over the border-cropped (optionally masked) region."""
    smap = ssim_map(x, y)
    region = crop_mask(x.shape, mask)
    if not region.any():
        raise InvalidInputError("empty mask after border crop")
    if smap.ndim == 3:
        return float(smap[region].mean())
    return float(smap[region].mean())


def ssim_adjoint(
    x: np.ndarray,
    y: np.ndarray,
    weight: np.ndarray,
) -> np.ndarray:
    """d(sum_p weight_p * SSIM_p)/dx for per-pixel weights.

    Channels are independent; `weight` is (H, W) and applies to every
    channel's SSIM map.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, :, None]
        y = y[:, :, None]
    grad = np.empty_like(x)
    for c in range(x.shape[2]):
        xc = x[:, :, c]
        yc = y[:, :, c]
        mx, my, a1, a2, b1, b2 = _terms(xc, yc)
        s = (a1 * a2) / (b1 * b2)
        d_a1 = a2 / (b1 * b2)
        d_a2 = a1 / (b1 * b2)
        d_b1 = -s / b1
        d_b2 = -s / b2
        c_mu = 2.0 * (my * d_a1 + mx * d_b1 - my * d_a2 - mx * d_b2)
        grad[:, :, c] = (
            _filt(w * c_mu)
            + 2.0 * yc * _filt(w * d_a2)
            + 2.0 * xc * _filt(w * d_b2)
        )
    return grad[:, :, 0] if squeeze else grad
