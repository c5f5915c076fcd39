"""Pinhole camera model: intrinsics, poses, rigs and (un)projection.

Coordinate conventions (OpenCV style, right-handed):
  World frame:  arbitrary fixed frame shared by all cameras.
  Camera frame: X right, Y down, Z forward (optical axis); a point is in
                front of the camera iff its camera-space Z > 0.
  Image frame:  u right, v down, in pixels; (0, 0) is the top-left corner
                and pixel (i, j) covers [j, j+1) x [i, i+1).

World -> camera: X_cam = R @ X_world + t, so the camera center is
C = -R^T @ t. Projection: u = fx * x/z + cx, v = fy * y/z + cy.
Lens distortion is assumed corrected upstream; only the pinhole model is
implemented here.

All types are immutable after construction and safe to share across
threads.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import BehindCameraError, InvalidInputError

_ORTHONORMAL_TOL = 1e-9


def _as_matrix(values, shape, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths, principal point and image size, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise InvalidInputError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_K(cls, K, width: int, height: int) -> "CameraIntrinsics":
        K = np.asarray(K, dtype=np.float64).reshape(3, 3)
        return cls(fx=K[0, 0], fy=K[1, 1], cx=K[0, 2], cy=K[1, 2], width=int(width), height=int(height))


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform.

    rotation is the 3x3 world->camera matrix, translation the 3-vector t;
    the derived camera center is C = -R^T t (world frame, meters).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _as_matrix(self.rotation, (3, 3), "rotation")
        t = _as_matrix(self.translation, (3,), "translation")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHONORMAL_TOL):
            raise InvalidInputError("rotation must be orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise InvalidInputError("rotation must have determinant +1")

    @property
    def camera_center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class CameraRig:
    """Calibrated camera set around a scene center.

    cameras maps camera id -> (intrinsics, pose); order is preserved and
    ids must be unique. scene_center is the point the per-view direction
    vectors are measured from during source-view selection.
    """

    cameras: tuple
    scene_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 2:
            raise InvalidInputError("a rig needs at least two cameras")
        ids = [cid for cid, _, _ in cams]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("camera ids must be unique")
        center = _as_matrix(self.scene_center, (3,), "scene_center")
        object.__setattr__(self, "cameras", cams)
        object.__setattr__(self, "scene_center", center)

    @property
    def camera_ids(self) -> list:
        return [cid for cid, _, _ in self.cameras]

    def camera(self, camera_id) -> tuple:
        """Return (intrinsics, pose) for a camera id."""
        for cid, intr, pose in self.cameras:
            if cid == camera_id:
                return intr, pose
        raise InvalidInputError(f"unknown camera id {camera_id!r}")

    def view_vector(self, camera_id) -> np.ndarray:
        """Camera center minus scene center."""
        _, pose = self.camera(camera_id)
        return pose.camera_center - self.scene_center


@dataclass(frozen=True)
class ProjectionMatrix:
    """3x4 projection P = K [R|t] for one (possibly rectified) view."""

    K: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", _as_matrix(self.K, (3, 3), "K"))
        object.__setattr__(self, "rotation", _as_matrix(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_matrix(self.translation, (3,), "translation"))

    @property
    def P(self) -> np.ndarray:
        Rt = np.concatenate([self.rotation, self.translation[:, None]], axis=1)
        return self.K @ Rt

    @classmethod
    def from_camera(cls, intrinsics: CameraIntrinsics, pose: CameraPose) -> "ProjectionMatrix":
        return cls(K=intrinsics.K, rotation=pose.rotation, translation=pose.translation)


def project_point(point: np.ndarray, proj: ProjectionMatrix) -> tuple[np.ndarray, float]:
    """Project a world point; returns ((u, v), camera-space depth).

    Raises BehindCameraError if the point is at or behind the camera
    plane (depth <= 0).
    """
    X = np.asarray(point, dtype=np.float64).reshape(3)
    cam = proj.rotation @ X + proj.translation
    z = cam[2]
    if z <= 0.0:
        raise BehindCameraError(f"point has non-positive camera depth {z:.6g}")
    uvw = proj.K @ cam
    return uvw[:2] / z, float(z)


def project_points(points: np.ndarray, proj: ProjectionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection. Returns (N,2) pixels and (N,) depths.

    Points behind the camera get NaN pixels; callers filter by depth.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = pts @ proj.rotation.T + proj.translation
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = (cam @ proj.K.T)[:, :2] / z[:, None]
    uv[z <= 0.0] = np.nan
    return uv, z


def unproject_pixel(pixel: np.ndarray, depth: float, proj: ProjectionMatrix) -> np.ndarray:
    """Lift a pixel at a camera-space depth back to a world point.

    Inverse of project_point: project_point(unproject_pixel(x, z), P)
    recovers (x, z) to floating-point precision.
    """
    if depth <= 0.0:
        raise InvalidInputError(f"depth must be positive, got {depth}")
    uv = np.asarray(pixel, dtype=np.float64).reshape(2)
    ray = np.linalg.solve(proj.K, np.array([uv[0], uv[1], 1.0]))
    cam = ray * (depth / ray[2])
    return proj.rotation.T @ (cam - proj.translation)


def unproject_pixels(pixels: np.ndarray, depths: np.ndarray, proj: ProjectionMatrix) -> np.ndarray:
    """Vectorized unprojection of (N,2) pixels at (N,) positive depths."""
    uv = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    z = np.asarray(depths, dtype=np.float64).reshape(-1)
    Kinv = np.linalg.inv(proj.K)
    rays = np.concatenate([uv, np.ones((len(uv), 1))], axis=1) @ Kinv.T
    cam = rays * (z / rays[:, 2])[:, None]
    return (cam - proj.translation) @ proj.rotation
