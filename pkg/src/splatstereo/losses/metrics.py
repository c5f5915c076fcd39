"""Image-quality and disparity-accuracy metrics."""

import numpy as np

from ..errors import InvalidInputError
from .ssim import ssim

PSNR_CAP_DB = 99.0


def psnr(rendered: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB with unit peak, capped at 99 dB."""
    r = np.asarray(rendered, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if r.shape != t.shape:
        raise InvalidInputError(f"image shapes differ: {r.shape} vs {t.shape}")
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if not m.any():
            raise InvalidInputError("empty mask")
        diff = (r - t)[m]
    else:
        diff = r - t
    mse = float(np.mean(diff * diff))
    if mse <= 10 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def image_metrics(rendered: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> tuple[float, float]:
    """(psnr_db, ssim) over the masked region."""
    return psnr(rendered, truth, mask), ssim(rendered, truth, mask)


def epe_metrics(d_pred: np.ndarray, d_gt: np.ndarray, mask: np.ndarray | None = None) -> tuple[float, float]:
    """Mean end-point error (px) and the fraction of pixels within 1 px."""
    dp = np.asarray(d_pred, dtype=np.float64)
    dg = np.asarray(d_gt, dtype=np.float64)
    if dp.shape != dg.shape:
        raise InvalidInputError(f"disparity shapes differ: {dp.shape} vs {dg.shape}")
    err = np.abs(dp - dg)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if not m.any():
            raise InvalidInputError("empty mask")
        err = err[m]
    return float(err.mean()), float((err < 1.0).mean())
