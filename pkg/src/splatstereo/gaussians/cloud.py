"""Flat 3D Gaussian clouds and the image-plane-to-cloud lifting step."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from ..geometry.camera import ProjectionMatrix, unproject_pixels
from ..geometry.disparity import DepthMap

VIEW_TAG_LEFT = 0
VIEW_TAG_RIGHT = 1
VIEW_TAG_NONE = -1


@dataclass
class GaussianCloud:
    """Arrays-of-attributes cloud: one Gaussian per row.

    positions are world-space meters, rotations unit quaternions (w,x,y,z),
    scales positive per-axis meters, colors RGB in [0,1], opacities [0,1].
    source_view/source_pixel tag where a Gaussian was lifted from (left=0,
    right=1, -1 when unknown).
    """

    positions: np.ndarray
    colors: np.ndarray
    rotations: np.ndarray
    scales: np.ndarray
    opacities: np.ndarray
    source_view: np.ndarray = field(default=None)
    source_pixel: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(n, 3)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(n, 3)
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(n)
        if self.source_view is None:
            self.source_view = np.full(n, VIEW_TAG_NONE, dtype=np.int8)
        else:
            self.source_view = np.asarray(self.source_view, dtype=np.int8).reshape(n)
        if self.source_pixel is None:
            self.source_pixel = np.full((n, 2), -1, dtype=np.int32)
        else:
            self.source_pixel = np.asarray(self.source_pixel, dtype=np.int32).reshape(n, 2)

    def __len__(self) -> int:
        return len(self.positions)

    def validate(self) -> None:
        """Check the cloud invariants: unit quaternions, positive scales,
        opacities in [0,1], everything finite."""
        for name in ("positions", "colors", "rotations", "scales", "opacities"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidInputError(f"cloud field {name} contains non-finite values")
        norms = np.linalg.norm(self.rotations, axis=1)
        if len(norms) and np.max(np.abs(norms - 1.0)) > 1e-6:
            raise InvalidInputError("rotations must be unit quaternions")
        if np.any(self.scales <= 0):
            raise InvalidInputError("scales must be positive")
        if np.any((self.opacities < 0) | (self.opacities > 1)):
            raise InvalidInputError("opacities must lie in [0, 1]")


def empty_cloud() -> GaussianCloud:
    return GaussianCloud(
        positions=np.zeros((0, 3)),
        colors=np.zeros((0, 3)),
        rotations=np.zeros((0, 4)),
        scales=np.zeros((0, 3)),
        opacities=np.zeros(0),
    )


def lift_to_gaussians(
    maps,
    depth: DepthMap,
    proj: ProjectionMatrix,
    view_tag: int = VIEW_TAG_NONE,
) -> tuple[GaussianCloud, int]:
    """Unproject one Gaussian per valid pixel at depth D(x) + residual(x).

    Pixels whose effective depth is non-positive are skipped; the skip
    count is returned alongside the cloud.
    """
    h, w = depth.values.shape
    if maps.color.shape[:2] != (h, w):
        raise InvalidInputError("parameter maps and depth map shapes differ")
    effective = depth.values + maps.depth_residual
    ok = depth.validity & maps.validity
    positive = effective > 0.0
    skipped = int(np.count_nonzero(ok & ~positive))
    keep = ok & positive

    ii, jj = np.nonzero(keep)
    # pixel centers in continuous image coordinates
    pixels = np.stack([jj + 0.5, ii + 0.5], axis=1).astype(np.float64)
    positions = unproject_pixels(pixels, effective[keep], proj)
    cloud = GaussianCloud(
        positions=positions,
        colors=maps.color[keep],
        rotations=maps.rotation[keep],
        scales=maps.scale[keep],
        opacities=maps.opacity[keep],
        source_view=np.full(len(ii), view_tag, dtype=np.int8),
        source_pixel=np.stack([ii, jj], axis=1).astype(np.int32),
    )
    return cloud, skipped


def resample_colors(cloud: GaussianCloud, image: np.ndarray, proj: ProjectionMatrix) -> int:
    """Re-sample splat colors from an image at their projected positions.

    Colors lifted off a rectified plane carry that warp's resampling; when
    the original source frame is available, sampling it directly at each
    Gaussian's reprojection removes one interpolation pass. Points that
    project outside the image keep their colors. Returns the number of
    updated points.
    """
    from ..geometry.camera import project_points
    from ..geometry.rectify import bilinear_sample

    if len(cloud) == 0:
        return 0
    uv, z = project_points(cloud.positions, proj)
    ok = np.isfinite(uv).all(axis=1) & (z > 0)
    colors, inside = bilinear_sample(np.asarray(image, dtype=np.float64), uv[:, 0] - 0.5, uv[:, 1] - 0.5)
    ok &= inside
    cloud.colors[ok] = np.clip(colors[ok], 0.0, 1.0)
    return int(np.count_nonzero(ok))


def merge_views(left: GaussianCloud, right: GaussianCloud) -> GaussianCloud:
    """Union of both views' Gaussians; nothing is deduplicated."""
    return GaussianCloud(
        positions=np.concatenate([left.positions, right.positions]),
        colors=np.concatenate([left.colors, right.colors]),
        rotations=np.concatenate([left.rotations, right.rotations]),
        scales=np.concatenate([left.scales, right.scales]),
        opacities=np.concatenate([left.opacities, right.opacities]),
        source_view=np.concatenate([left.source_view, right.source_view]),
        source_pixel=np.concatenate([left.source_pixel, right.source_pixel]),
    )
