"""Analytic adjoint of the splat renderer.

Given dL/d(pixel color), propagates through the alpha blend (opacity and
exponent), the projected covariance (Jacobian, view rotation, covariance
factorization) and the screen mean, down to every Gaussian attribute.
Runs in float64; forward and backward share one projection so the chain
is evaluated exactly where the forward was.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..geometry.camera import CameraIntrinsics, CameraPose
from ..threads import resolve_thread_count
from ._kernels import backward_tile_range
from .camera_project import _JACOBIAN_CLAMP, project_cloud
from .covariance import normalize_quaternions, quaternion_to_matrix
from .rasterizer import RenderConfig, RenderedFrame, _run_tiled, composite
from .tiles import bin_and_sort


@dataclass
class RenderGradients:
    """dL/d(attribute) per Gaussian; zero rows for culled splats."""

    d_position: np.ndarray  # (N, 3)
    d_rotation: np.ndarray  # (N, 4), tangent to the unit sphere
    d_scale: np.ndarray  # (N, 3)
    d_color: np.ndarray  # (N, 3)
    d_opacity: np.ndarray  # (N,)


def _quaternion_jacobian(q: np.ndarray) -> np.ndarray:
    """d(rotation matrix)/d(quaternion): (N, 4, 3, 3) for unit q."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    o = np.zeros_like(w)
    dRdq = np.empty((len(q), 4, 3, 3))
    dRdq[:, 0] = 2.0 * np.stack(
        [np.stack([o, -z, y], -1), np.stack([z, o, -x], -1), np.stack([-y, x, o], -1)], 1
    )
    dRdq[:, 1] = 2.0 * np.stack(
        [np.stack([o, y, z], -1), np.stack([y, -2 * x, -w], -1), np.stack([z, w, -2 * x], -1)], 1
    )
    dRdq[:, 2] = 2.0 * np.stack(
        [np.stack([-2 * y, x, w], -1), np.stack([x, o, z], -1), np.stack([-w, z, -2 * y], -1)], 1
    )
    dRdq[:, 3] = 2.0 * np.stack(
        [np.stack([-2 * z, -w, x], -1), np.stack([w, -2 * z, y], -1), np.stack([x, y, o], -1)], 1
    )
    return dRdq


def render_with_gradients(
    cloud,
    pose: CameraPose,
    intrinsics: CameraIntrinsics,
    loss_adjoint: np.ndarray,
    config: RenderConfig | None = None,
) -> tuple[RenderedFrame, RenderGradients]:
    """Render and return dL/d(attributes) for loss with the given per-pixel
    color adjoint (shape H x W x 3)."""
    h, w = intrinsics.height, intrinsics.width
    adjoint = np.ascontiguousarray(loss_adjoint, dtype=np.float64)
    if adjoint.shape != (h, w, 3):
        raise InvalidInputError(f"adjoint shape {adjoint.shape} != {(h, w, 3)}")
    cfg = config or RenderConfig()
    cfg = RenderConfig(
        tile_size=cfg.tile_size,
        blur_floor=cfg.blur_floor,
        near=cfg.near,
        background=cfg.background,
        dtype=np.float64,
        threads=cfg.threads,
    )

    n = len(cloud.positions)
    grads = RenderGradients(
        d_position=np.zeros((n, 3)),
        d_rotation=np.zeros((n, 4)),
        d_scale=np.zeros((n, 3)),
        d_color=np.zeros((n, 3)),
        d_opacity=np.zeros(n),
    )
    if n == 0:
        frame = composite_empty(h, w, cfg)
        return frame, grads

    projected = project_cloud(
        cloud.positions,
        cloud.rotations,
        cloud.scales,
        cloud.colors,
        cloud.opacities,
        pose,
        intrinsics,
        blur_floor=cfg.blur_floor,
        near=cfg.near,
    )
    bins = bin_and_sort(projected, w, h, tile_size=cfg.tile_size)
    frame = composite(projected, bins, w, h, cfg)

    n_entries = bins.entry_count
    d_mean_e = np.zeros((n_entries, 2))
    d_conic_e = np.zeros((n_entries, 3))
    d_color_e = np.zeros((n_entries, 3))
    d_opacity_e = np.zeros(n_entries)
    if n_entries:
        args = (
            bins.tile_size,
            bins.tiles_x,
            w,
            h,
            bins.offsets,
            bins.gaussian_index,
            projected.means2d,
            projected.conic,
            projected.colors,
            projected.opacities,
            np.asarray(cfg.background, dtype=np.float64),
            adjoint,
            d_mean_e,
            d_conic_e,
            d_color_e,
            d_opacity_e,
        )
        _run_tiled(backward_tile_range, bins, resolve_thread_count(cfg.threads), args)

    # entry -> gaussian reduction; np.add.at applies in entry order, which
    # is fixed by the binning, so the sum order is thread-count independent
    gi = bins.gaussian_index.astype(np.int64)
    d_mean = np.zeros((n, 2))
    d_conic = np.zeros((n, 3))
    np.add.at(d_mean, gi, d_mean_e)
    np.add.at(d_conic, gi, d_conic_e)
    np.add.at(grads.d_color, gi, d_color_e)
    np.add.at(grads.d_opacity, gi, d_opacity_e)

    live = np.flatnonzero(projected.valid)
    if len(live) == 0:
        return frame, grads

    fx, fy = intrinsics.fx, intrinsics.fy
    W = pose.rotation
    t_cam = projected.t_cam[live]
    xg, yg, zg = t_cam[:, 0], t_cam[:, 1], t_cam[:, 2]
    clamped = projected.t_clamped[live]
    lim_x = _JACOBIAN_CLAMP * 0.5 * intrinsics.width / fx
    lim_y = _JACOBIAN_CLAMP * 0.5 * intrinsics.height / fy
    u = np.clip(xg / zg, -lim_x, lim_x)
    v = np.clip(yg / zg, -lim_y, lim_y)

    # conic -> 2D covariance
    A = np.empty((len(live), 2, 2))
    A[:, 0, 0] = projected.conic[live, 0]
    A[:, 0, 1] = A[:, 1, 0] = projected.conic[live, 1]
    A[:, 1, 1] = projected.conic[live, 2]
    G_A = np.empty_like(A)
    G_A[:, 0, 0] = d_conic[live, 0]
    G_A[:, 0, 1] = G_A[:, 1, 0] = 0.5 * d_conic[live, 1]
    G_A[:, 1, 1] = d_conic[live, 2]
    d_cov2d = -A @ G_A @ A

    # 2D covariance -> camera-space covariance and Jacobian
    J = np.zeros((len(live), 2, 3))
    J[:, 0, 0] = fx / zg
    J[:, 0, 2] = -fx * u / zg
    J[:, 1, 1] = fy / zg
    J[:, 1, 2] = -fy * v / zg

    q_unit = normalize_quaternions(np.asarray(cloud.rotations, dtype=np.float64)[live])
    R = quaternion_to_matrix(q_unit)
    s = np.asarray(cloud.scales, dtype=np.float64)[live]
    M = R * s[:, None, :]
    Sigma = M @ np.transpose(M, (0, 2, 1))
    Sigma_cam = W[None] @ Sigma @ W.T[None]

    d_sigma_cam = np.transpose(J, (0, 2, 1)) @ d_cov2d @ J
    dJ = 2.0 * d_cov2d @ J @ Sigma_cam

    # camera-space mean sensitivities: through J and through the screen mean
    dt_cam = np.zeros((len(live), 3))
    dz = -(dJ[:, 0, 0] * fx + dJ[:, 1, 1] * fy) / zg**2
    dz += dJ[:, 0, 2] * fx * u / zg**2 + dJ[:, 1, 2] * fy * v / zg**2
    du = -dJ[:, 0, 2] * fx / zg
    dv = -dJ[:, 1, 2] * fy / zg
    free_x = ~clamped[:, 0]
    free_y = ~clamped[:, 1]
    dt_cam[:, 0] += np.where(free_x, du / zg, 0.0)
    dt_cam[:, 1] += np.where(free_y, dv / zg, 0.0)
    dz += np.where(free_x, -du * xg / zg**2, 0.0)
    dz += np.where(free_y, -dv * yg / zg**2, 0.0)
    dm = d_mean[live]
    dt_cam[:, 0] += dm[:, 0] * fx / zg
    dt_cam[:, 1] += dm[:, 1] * fy / zg
    dz += -(dm[:, 0] * fx * xg + dm[:, 1] * fy * yg) / zg**2
    dt_cam[:, 2] += dz

    grads.d_position[live] = dt_cam @ W

    # covariance chain: Sigma = M M^T with M = R diag(s)
    d_sigma = W.T[None] @ d_sigma_cam @ W[None]
    dM = 2.0 * d_sigma @ M
    grads.d_scale[live] = np.einsum("nij,nij->nj", R, dM)
    dR = dM * s[:, None, :]
    dq = np.einsum("nij,nkij->nk", dR, _quaternion_jacobian(q_unit))
    raw = np.asarray(cloud.rotations, dtype=np.float64)[live]
    raw_norm = np.maximum(np.linalg.norm(raw, axis=1), 1e-12)
    dq_t = dq - q_unit * np.sum(dq * q_unit, axis=1, keepdims=True)
    grads.d_rotation[live] = dq_t / raw_norm[:, None]

    return frame, grads


def composite_empty(h: int, w: int, cfg: RenderConfig) -> RenderedFrame:
    color = np.broadcast_to(np.asarray(cfg.background, dtype=cfg.dtype), (h, w, 3)).copy()
    return RenderedFrame(
        color=color,
        alpha=np.zeros((h, w), dtype=cfg.dtype),
        contributors=np.zeros((h, w), dtype=np.int32),
    )
