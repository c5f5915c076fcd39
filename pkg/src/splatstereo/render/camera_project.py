"""Perspective projection of 3D Gaussians to screen-space ellipses.

The 2D covariance is Sigma' = J W Sigma W^T J^T with W the world->camera
rotation and J the 2x3 Jacobian of the pinhole projection evaluated at the
camera-space mean. A low-pass floor is added to Sigma's diagonal so every
splat covers at least a fraction of a pixel and the conic is always
invertible. Splats behind the near plane or whose 3-sigma bound misses the
image are culled.
"""

from dataclasses import dataclass

import numpy as np

from ..geometry.camera import CameraIntrinsics, CameraPose
from ._kernels import project_kernel

BLUR_FLOOR = 0.3  # px^2 added to the projected covariance diagonal
NEAR_PLANE = 0.01  # meters
FOOTPRINT_SIGMA = 3.0  # Mahalanobis cutoff radius of a splat
_JACOBIAN_CLAMP = 1.3  # x/z, y/z clamp in units of the half-fov tangent


@dataclass(frozen=True)
class ProjectedGaussian2D:
    """One projected splat: screen mean, 2D covariance and passthroughs."""

    mean: np.ndarray  # (2,) pixels
    cov: np.ndarray  # (2, 2) pixels^2, low-pass floor included
    depth: float  # camera-space z, meters
    color: np.ndarray
    opacity: float


class ProjectedCloud:
    """Array-of-struct view of the projected splats of a whole cloud.

    Fields are aligned with the input cloud; `valid` marks splats that
    survived culling. cov2d/conic are packed symmetric (s00, s01, s11) and
    (a, b, c) with q = a dx^2 + 2 b dx dy + c dy^2. Intermediates needed
    by the gradient chain (camera-space means, clamp flags) are kept.
    """

    __slots__ = (
        "means2d", "cov2d", "conic", "depth", "radii", "valid",
        "t_cam", "t_clamped", "colors", "opacities", "intrinsics", "pose",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.valid))


def project_cloud(
    positions: np.ndarray,
    rotations: np.ndarray,
    scales: np.ndarray,
    colors: np.ndarray,
    opacities: np.ndarray,
    pose: CameraPose,
    intrinsics: CameraIntrinsics,
    blur_floor: float = BLUR_FLOOR,
    near: float = NEAR_PLANE,
    dtype=np.float64,
) -> ProjectedCloud:
    """Project every Gaussian of a cloud, culling behind-camera and
    off-screen splats."""
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(pos)
    fx, fy = intrinsics.fx, intrinsics.fy

    means2d = np.empty((n, 2), dtype)
    conic = np.empty((n, 3), dtype)
    cov2d = np.empty((n, 3), dtype)
    radii = np.empty((n, 2), dtype)
    depth = np.empty(n, dtype)
    t_cam = np.empty((n, 3), dtype)
    clamped = np.empty((n, 2), np.uint8)
    valid = np.empty(n, np.uint8)
    project_kernel(
        pos,
        np.ascontiguousarray(rotations, dtype=np.float64).reshape(-1, 4),
        np.ascontiguousarray(scales, dtype=np.float64).reshape(-1, 3),
        pose.rotation,
        pose.translation,
        fx,
        fy,
        intrinsics.cx,
        intrinsics.cy,
        float(intrinsics.width),
        float(intrinsics.height),
        blur_floor,
        near,
        _JACOBIAN_CLAMP * 0.5 * intrinsics.width / fx,
        _JACOBIAN_CLAMP * 0.5 * intrinsics.height / fy,
        means2d,
        conic,
        cov2d,
        radii,
        depth,
        t_cam,
        clamped,
        valid,
    )
    return ProjectedCloud(
        means2d=means2d,
        cov2d=cov2d,
        conic=conic,
        depth=depth,
        radii=radii,
        valid=valid.astype(bool),
        t_cam=t_cam,
        t_clamped=clamped.astype(bool),
        colors=np.ascontiguousarray(colors, dtype=dtype).reshape(-1, 3),
        opacities=np.ascontiguousarray(opacities, dtype=dtype).reshape(-1),
        intrinsics=intrinsics,
        pose=pose,
    )


def project_gaussian(
    position,
    rotation,
    scale,
    color,
    opacity,
    pose: CameraPose,
    intrinsics: CameraIntrinsics,
    blur_floor: float = BLUR_FLOOR,
) -> ProjectedGaussian2D | None:
    """Project a single Gaussian; returns None when it is culled."""
    proj = project_cloud(
        np.asarray(position, dtype=np.float64).reshape(1, 3),
        np.asarray(rotation, dtype=np.float64).reshape(1, 4),
        np.asarray(scale, dtype=np.float64).reshape(1, 3),
        np.asarray(color, dtype=np.float64).reshape(1, 3),
        np.asarray([opacity], dtype=np.float64),
        pose,
        intrinsics,
        blur_floor=blur_floor,
    )
    if not proj.valid[0]:
        return None
    s00, s01, s11 = proj.cov2d[0]
    return ProjectedGaussian2D(
        mean=proj.means2d[0],
        cov=np.array([[s00, s01], [s01, s11]]),
        depth=float(proj.depth[0]),
        color=proj.colors[0],
        opacity=float(proj.opacities[0]),
    )


__all__ = [
    "BLUR_FLOOR",
    "NEAR_PLANE",
    "FOOTPRINT_SIGMA",
    "ProjectedGaussian2D",
    "ProjectedCloud",
    "project_cloud",
    "project_gaussian",
]
