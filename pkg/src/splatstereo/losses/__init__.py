"""Loss stack, image metrics, Chamfer regularizer and map refinement."""

from .chamfer import POINT_BUDGET, PointGrid, chamfer_distance
from .lossfns import (
    LossReport,
    LossWeights,
    depth_loss,
    frame_report,
    rendering_loss,
    total_loss,
    write_loss_trajectory,
)
from .metrics import PSNR_CAP_DB, epe_metrics, image_metrics, psnr
from .refine import DEFAULT_ATTRIBUTES, LEARNING_RATES, RefinementResult, refine_gaussian_maps
from .ssim import crop_mask, ssim, ssim_adjoint, ssim_map

__all__ = [
    "LossReport",
    "LossWeights",
    "PointGrid",
    "POINT_BUDGET",
    "PSNR_CAP_DB",
    "RefinementResult",
    "DEFAULT_ATTRIBUTES",
    "LEARNING_RATES",
    "chamfer_distance",
    "crop_mask",
    "depth_loss",
    "epe_metrics",
    "frame_report",
    "image_metrics",
    "psnr",
    "refine_gaussian_maps",
    "rendering_loss",
    "ssim",
    "ssim_adjoint",
    "ssim_map",
    "total_loss",
    "write_loss_trajectory",
]
