"""Loss stack: rendering loss, depth-sequence loss, total combination."""

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from .metrics import psnr as psnr_metric
from .ssim import crop_mask, ssim_map


@dataclass(frozen=True)
class LossWeights:
    """Mixing constants for the full objective.

    lambda1/lambda2 blend L1 against SSIM inside the rendering loss; mu is
    the exponential decay over the disparity iteration trace; alpha_cd and
    beta_depth weight the Chamfer regularizer and the depth loss.
    """

    lambda1: float = 0.8
    lambda2: float = 0.2
    mu: float = 0.9
    alpha_cd: float = 0.5
    beta_depth: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "mu", "alpha_cd", "beta_depth"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")
        if self.lambda1 + self.lambda2 <= 0:
            raise InvalidInputError("lambda1 + lambda2 must be positive")


@dataclass
class LossReport:
    """Loss values and quality metrics for one rendered frame."""

    l_mae: float
    l_ssim: float
    l_render: float
    l_cd: float
    l_depth: float
    l_total: float
    psnr: float
    ssim_metric: float
    epe: float | None = None
    ratio_1px: float | None = None

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def write_loss_trajectory(reports: list, path) -> None:
    """CSV with one row per refinement step."""
    fields = ["step", "l_mae", "l_ssim", "l_render", "l_cd", "l_depth", "l_total", "psnr", "ssim_metric"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for step, rep in enumerate(reports):
            d = asdict(rep)
            writer.writerow([step] + [d[k] for k in fields[1:]])


def rendering_loss(
    rendered: np.ndarray,
    truth: np.ndarray,
    mask: np.ndarray | None,
    weights: LossWeights,
) -> tuple[float, float, float]:
    """(l_mae, l_ssim, l_render) over the masked region.

    l_mae is the mean absolute error, l_ssim is 1 - mean SSIM (11x11
    Gaussian window), and l_render = lambda1 * l_mae + lambda2 * l_ssim.
    """
    r = np.asarray(rendered, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if r.shape != t.shape:
        raise InvalidInputError(f"image shapes differ: {r.shape} vs {t.shape}")
    m = np.ones(r.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not m.any():
        raise InvalidInputError("empty mask")
    l_mae = float(np.abs(r - t)[m].mean())
    region = crop_mask(r.shape, m)
    if not region.any():
        raise InvalidInputError("empty mask after SSIM border crop")
    l_ssim = float(1.0 - ssim_map(r, t)[region].mean())
    l_render = weights.lambda1 * l_mae + weights.lambda2 * l_ssim
    return l_mae, l_ssim, l_render


def depth_loss(
    trace: list,
    d_gt: np.ndarray,
    mu: float,
    validity: np.ndarray | None = None,
) -> float:
    """Exponentially weighted L1 over the iteration trace.

    sum_t mu^(T-t) * mean|d_gt - d_t| over valid pixels, t = 1..T.
    """
    if not trace:
        raise InvalidInputError("empty disparity trace")
    gt = np.asarray(d_gt, dtype=np.float64)
    m = np.ones(gt.shape, dtype=bool) if validity is None else np.asarray(validity, dtype=bool)
    if not m.any():
        raise InvalidInputError("empty validity mask")
    T = len(trace)
    total = 0.0
    for t_index, d_t in enumerate(trace, start=1):
        d_t = np.asarray(d_t, dtype=np.float64)
        if d_t.shape != gt.shape:
            raise InvalidInputError(f"trace step shape {d_t.shape} != {gt.shape}")
        total += mu ** (T - t_index) * float(np.abs(gt - d_t)[m].mean())
    return total


def total_loss(
    l_render: float,
    l_cd: float,
    weights: LossWeights,
    l_depth: float | None = None,
    l_mae: float = 0.0,
    l_ssim: float = 0.0,
    psnr: float = 0.0,
    ssim_metric: float = 0.0,
) -> LossReport:
    """Combine parts; the depth term is dropped when no ground truth
    depth was supplied (beta forced to zero)."""
    beta = weights.beta_depth if l_depth is not None else 0.0
    l_depth_val = l_depth if l_depth is not None else 0.0
    total = l_render + weights.alpha_cd * l_cd + beta * l_depth_val
    return LossReport(
        l_mae=l_mae,
        l_ssim=l_ssim,
        l_render=l_render,
        l_cd=l_cd,
        l_depth=l_depth_val,
        l_total=total,
        psnr=psnr,
        ssim_metric=ssim_metric,
    )


def frame_report(
    rendered: np.ndarray,
    truth: np.ndarray,
    mask: np.ndarray | None,
    weights: LossWeights,
    l_cd: float = 0.0,
    l_depth: float | None = None,
) -> LossReport:
    """Full LossReport for one rendered frame against its ground truth."""
    l_mae, l_ssim, l_render = rendering_loss(rendered, truth, mask, weights)
    region = crop_mask(np.asarray(rendered).shape, mask)
    p = psnr_metric(rendered, truth, mask)
    s = float(ssim_map(np.asarray(rendered, dtype=np.float64), np.asarray(truth, dtype=np.float64))[region].mean())
    return total_loss(
        l_render, l_cd, weights, l_depth=l_depth,
        l_mae=l_mae, l_ssim=l_ssim, psnr=p, ssim_metric=s,
    )
