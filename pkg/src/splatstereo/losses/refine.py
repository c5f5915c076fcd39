"""Per-pair refinement of Gaussian parameter maps by gradient descent.

Each step lifts both views' maps to a merged cloud, renders every
held-out view through the differentiable rasterizer, and descends on the
total objective (rendering loss plus the Chamfer cross-view term).
Per-attribute learning rates follow the map parameterizations: the
position signal lands on the bounded depth-residual channel through the
unprojection ray, scales step in log-space, rotations step in the unit
sphere's tangent plane. After every step the maps are projected back onto
their valid ranges, so no iterate ever violates the map invariants.

Reported losses are means; update magnitudes use sum-over-pixels scaling
(a constant rescale of the objective), which keeps the default step sizes
meaningful regardless of image size.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, InvalidInputError
from ..gaussians.cloud import lift_to_gaussians, merge_views
from ..gaussians.maps import GaussianParameterMaps, RESIDUAL_GAMMA, SCALE_MAX, SCALE_MIN
from ..geometry.camera import ProjectionMatrix
from ..geometry.disparity import DepthMap
from ..render.covariance import normalize_quaternions
from ..render.gradients import render_with_gradients
from ..render.rasterizer import RenderConfig, render
from .chamfer import POINT_BUDGET, chamfer_distance
from .lossfns import LossWeights, rendering_loss, total_loss
from .metrics import psnr as psnr_metric
from .ssim import crop_mask, ssim_adjoint, ssim_map

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0

LEARNING_RATES = {
    "residual": 1e-3,
    "color": 1e-2,
    "opacity": 1e-2,
    "scale": 1e-3,  # log-space
    "rotation": 1e-3,  # tangent-space
}
DEFAULT_ATTRIBUTES = ("residual", "rotation", "scale", "opacity")
_RESIDUAL_CLIP = RESIDUAL_GAMMA - 1e-6


@dataclass
class RefinementResult:
    maps_left: GaussianParameterMaps
    maps_right: GaussianParameterMaps
    reports: list


def _clone_maps(maps: GaussianParameterMaps) -> GaussianParameterMaps:
    return GaussianParameterMaps(
        color=maps.color.copy(),
        rotation=maps.rotation.copy(),
        scale=maps.scale.copy(),
        opacity=maps.opacity.copy(),
        depth_residual=maps.depth_residual.copy(),
        validity=maps.validity.copy(),
        rotation_fallback=maps.rotation_fallback.copy(),
    )


def _depth_rays(shape: tuple, proj: ProjectionMatrix) -> np.ndarray:
    """d(world position)/d(depth) per pixel: R^T K^{-1} (u, v, 1)."""
    h, w = shape
    vv, uu = np.mgrid[0:h, 0:w].astype(np.float64)
    pix = np.stack([uu + 0.5, vv + 0.5, np.ones_like(uu)], axis=-1)
    Kinv = np.linalg.inv(proj.K)
    rays_cam = pix @ Kinv.T
    return rays_cam @ proj.rotation


def refine_gaussian_maps(
    maps_left: GaussianParameterMaps,
    maps_right: GaussianParameterMaps,
    depth_left: DepthMap,
    depth_right: DepthMap,
    proj_left: ProjectionMatrix,
    proj_right: ProjectionMatrix,
    held_out_views: list,
    steps: int,
    lr: float = 1.0,
    weights: LossWeights | None = None,
    attributes: tuple = DEFAULT_ATTRIBUTES,
    optimize_color: bool = False,
    render_config: RenderConfig | None = None,
) -> RefinementResult:
    """Descend on the held-out rendering objective for `steps` iterations.

    held_out_views is a list of (image, pose, intrinsics, mask_or_None);
    lr scales the per-attribute defaults. Raises DivergenceError when the
    objective exceeds DIVERGENCE_FACTOR times its initial value.
    """
    if steps < 1:
        raise InvalidInputError(f"steps must be >= 1, got {steps}")
    if not held_out_views:
        raise InvalidInputError("refinement needs at least one held-out view")
    w = weights or LossWeights()
    cfg = render_config or RenderConfig(dtype=np.float64)
    attrs = set(attributes) | ({"color"} if optimize_color else set())
    mutate = lr != 0.0

    maps_l = _clone_maps(maps_left)
    maps_r = _clone_maps(maps_right)
    rays_l = _depth_rays(depth_left.values.shape, proj_left)
    rays_r = _depth_rays(depth_right.values.shape, proj_right)

    reports: list = []
    initial_total = None
    for step in range(steps):
        cloud_l, _ = lift_to_gaussians(maps_l, depth_left, proj_left, view_tag=0)
        cloud_r, _ = lift_to_gaussians(maps_r, depth_right, proj_right, view_tag=1)
        merged = merge_views(cloud_l, cloud_r)
        n_l = len(cloud_l)
        n_total = len(merged)

        grad_pos = np.zeros((n_total, 3))
        grad_rot = np.zeros((n_total, 4))
        grad_scale = np.zeros((n_total, 3))
        grad_color = np.zeros((n_total, 3))
        grad_opacity = np.zeros(n_total)

        l_mae_sum = l_ssim_sum = psnr_sum = ssim_sum = 0.0
        px_scale = 0.0
        for image, pose, intrinsics, mask in held_out_views:
            target = np.asarray(image, dtype=np.float64)
            m = np.ones(target.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
            region = crop_mask(target.shape, m)
            px_scale += float(np.count_nonzero(m))

            fwd = render(merged, pose, intrinsics, cfg)
            rendered = np.asarray(fwd.color, dtype=np.float64)
            # adjoint of the sum-scaled rendering loss
            adj = (w.lambda1 / 3.0) * np.sign(rendered - target) * m[:, :, None]
            if w.lambda2 > 0:
                adj -= (w.lambda2 / 3.0) * ssim_adjoint(rendered, target, region.astype(np.float64))
            _, grads = render_with_gradients(merged, pose, intrinsics, adj, cfg)
            grad_pos += grads.d_position
            grad_rot += grads.d_rotation
            grad_scale += grads.d_scale
            grad_color += grads.d_color
            grad_opacity += grads.d_opacity

            l_mae, l_ssim, _ = rendering_loss(rendered, target, m, w)
            l_mae_sum += l_mae
            l_ssim_sum += l_ssim
            psnr_sum += psnr_metric(rendered, target, m)
            ssim_sum += float(ssim_map(rendered, target)[region].mean())

        n_views = len(held_out_views)
        l_mae_avg = l_mae_sum / n_views
        l_ssim_avg = l_ssim_sum / n_views
        l_render = w.lambda1 * l_mae_avg + w.lambda2 * l_ssim_avg

        # cross-view consistency on the lifted positions; subsampling is
        # done here (not inside chamfer_distance) so the nearest-neighbor
        # indices can be mapped back onto the full gradient arrays
        l_cd = 0.0
        if w.alpha_cd > 0 and n_l > 0 and n_l < n_total:
            n_r = n_total - n_l
            idx_a = np.arange(0, n_l, max(1, -(-n_l // POINT_BUDGET)))
            idx_b = np.arange(0, n_r, max(1, -(-n_r // POINT_BUDGET)))
            pts_a = cloud_l.positions[idx_a]
            pts_b = cloud_r.positions[idx_b]
            l_cd, (d_ab, i_ab), (d_ba, i_ba) = chamfer_distance(pts_a, pts_b, return_nn=True)
            if "residual" in attrs and mutate:
                ga = pts_a - pts_b[i_ab]
                ga /= np.maximum(d_ab[:, None], 1e-9) * len(pts_a)
                gb = pts_b - pts_a[i_ba]
                gb /= np.maximum(d_ba[:, None], 1e-9) * len(pts_b)
                cd_scale = w.alpha_cd * px_scale
                np.add.at(grad_pos, idx_a, cd_scale * ga)
                np.add.at(grad_pos, n_l + idx_b, cd_scale * gb)
                np.add.at(grad_pos, n_l + idx_b[i_ab], -cd_scale * ga)
                np.add.at(grad_pos, idx_a[i_ba], -cd_scale * gb)

        report = total_loss(
            l_render, l_cd, w,
            l_mae=l_mae_avg, l_ssim=l_ssim_avg,
            psnr=psnr_sum / n_views, ssim_metric=ssim_sum / n_views,
        )
        reports.append(report)
        if initial_total is None:
            initial_total = max(report.l_total, 1e-12)
        elif report.l_total > DIVERGENCE_FACTOR * initial_total:
            raise DivergenceError(
                f"refinement diverged at step {step}: total loss {report.l_total:.6g} "
                f"exceeds {DIVERGENCE_FACTOR}x the initial {initial_total:.6g}"
            )
        if not mutate:
            continue

        # map per-gaussian gradients back onto the per-pixel maps
        for maps, rays, lo, hi in (
            (maps_l, rays_l, 0, n_l),
            (maps_r, rays_r, n_l, n_total),
        ):
            px = merged.source_pixel[lo:hi]
            ii, jj = px[:, 0], px[:, 1]
            if "residual" in attrs:
                d_resid = np.einsum("nk,nk->n", grad_pos[lo:hi], rays[ii, jj])
                upd = np.zeros_like(maps.depth_residual)
                upd[ii, jj] = d_resid
                maps.depth_residual -= lr * LEARNING_RATES["residual"] * upd
                np.clip(maps.depth_residual, -_RESIDUAL_CLIP, _RESIDUAL_CLIP, out=maps.depth_residual)
            if "opacity" in attrs:
                upd = np.zeros_like(maps.opacity)
                upd[ii, jj] = grad_opacity[lo:hi]
                maps.opacity -= lr * LEARNING_RATES["opacity"] * upd
                np.clip(maps.opacity, 0.0, 1.0, out=maps.opacity)
            if "scale" in attrs:
                upd = np.zeros_like(maps.scale)
                upd[ii, jj] = grad_scale[lo:hi] * maps.scale[ii, jj]  # d/d(log s)
                maps.scale *= np.exp(-lr * LEARNING_RATES["scale"] * upd)
                np.clip(maps.scale, SCALE_MIN, SCALE_MAX, out=maps.scale)
            if "rotation" in attrs:
                upd = np.zeros_like(maps.rotation)
                upd[ii, jj] = grad_rot[lo:hi]
                maps.rotation = normalize_quaternions(maps.rotation - lr * LEARNING_RATES["rotation"] * upd)
            if "color" in attrs:
                upd = np.zeros_like(maps.color)
                upd[ii, jj] = grad_color[lo:hi]
                maps.color = np.clip(maps.color - lr * LEARNING_RATES["color"] * upd, 0.0, 1.0)

    return RefinementResult(maps_left=maps_l, maps_right=maps_r, reports=reports)
