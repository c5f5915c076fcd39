"""Planar stereo rectification.

Both cameras are rotated about their centers onto a common image plane
whose x axis is the baseline, so epipolar lines become horizontal and a
world point lands on the same row in both views. Because each camera only
rotates, the original and rectified image planes are related by exact
homographies H = K_rect @ R_rect @ R_orig^T @ K_orig^{-1}, valid for
scene points at any depth.

Rectified intrinsics are shared by both views: focal length is the mean
of the two original fx values (square pixels), and the common principal
point is chosen so the overlap of the two warped image footprints is
centered in the viewport, which maximizes usable area deterministically.
Sharing cx keeps the standard mapping z = fx * baseline / disparity exact;
sharing fy and cy keeps rows aligned.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGeometryError, InvalidInputError
from .camera import CameraIntrinsics, CameraPose, ProjectionMatrix

_MIN_BASELINE = 1e-9


@dataclass(frozen=True)
class RectifiedPair:
    """A stereo pair resampled onto a common fronto-parallel plane.

    Images are H x W x 3 in [0, 1]; masks flag pixels with full bilinear
    support inside the source image. rect_transforms maps original image
    coordinates to rectified ones (one 3x3 homography per view). Poses are
    the rectified world->camera transforms; the right camera is offset
    from the left by `baseline` meters along the rectified +x axis.
    """

    left_image: np.ndarray
    right_image: np.ndarray
    left_mask: np.ndarray
    right_mask: np.ndarray
    left_K: CameraIntrinsics
    right_K: CameraIntrinsics
    baseline: float
    rect_transforms: tuple
    left_pose: CameraPose
    right_pose: CameraPose

    @property
    def shape(self) -> tuple:
        return self.left_image.shape[:2]

    def projection(self, side: str) -> ProjectionMatrix:
        if side == "left":
            return ProjectionMatrix.from_camera(self.left_K, self.left_pose)
        if side == "right":
            return ProjectionMatrix.from_camera(self.right_K, self.right_pose)
        raise InvalidInputError(f"side must be 'left' or 'right', got {side!r}")


def bilinear_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample image at continuous coords (x right, y down, pixel-center origin).

    Coordinates are in index space: (0, 0) is the center of the top-left
    pixel. Returns (values, in_bounds) where out-of-bounds samples are 0.
    """
    h, w = image.shape[:2]
    inside = (x >= 0.0) & (y >= 0.0) & (x <= w - 1.0) & (y <= h - 1.0)
    x0c = np.clip(np.floor(x).astype(np.int64), 0, max(w - 2, 0))
    y0c = np.clip(np.floor(y).astype(np.int64), 0, max(h - 2, 0))
    fx = x - x0c
    fy = y - y0c
    i00 = image[y0c, x0c]
    i01 = image[y0c, x0c + 1]
    i10 = image[y0c + 1, x0c]
    i11 = image[y0c + 1, x0c + 1]
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    out = (i00 * (1 - fx) + i01 * fx) * (1 - fy) + (i10 * (1 - fx) + i11 * fx) * fy
    out = np.where(inside[..., None] if image.ndim == 3 else inside, out, 0.0)
    return out, inside


def warp_homography(image: np.ndarray, H: np.ndarray, out_shape: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Warp image by homography H (source coords -> destination coords).

    Inverse-maps each destination pixel center and samples bilinearly.
    Returns (warped, validity) with out-of-bounds pixels black/invalid.
    """
    hh, ww = out_shape
    Hinv = np.linalg.inv(H)
    v, u = np.mgrid[0:hh, 0:ww].astype(np.float64)
    ones = np.ones_like(u)
    # destination pixel centers in continuous image coords
    dst = np.stack([u + 0.5, v + 0.5, ones], axis=-1)
    src = dst @ Hinv.T
    sx = src[..., 0] / src[..., 2] - 0.5
    sy = src[..., 1] / src[..., 2] - 0.5
    return bilinear_sample(image, sx, sy)


def _rectifying_rotation(left_pose: CameraPose, right_pose: CameraPose) -> tuple[np.ndarray, float]:
    c_l = left_pose.camera_center
    c_r = right_pose.camera_center
    b = c_r - c_l
    baseline = float(np.linalg.norm(b))
    if baseline < _MIN_BASELINE:
        raise DegenerateGeometryError("cameras share a center; rectification is undefined")
    e1 = b / baseline
    axis = left_pose.rotation[2] + right_pose.rotation[2]
    axis_n = np.linalg.norm(axis)
    if axis_n < 1e-9:
        raise DegenerateGeometryError("opposed optical axes; no common rectified plane")
    axis = axis / axis_n
    e3 = axis - (axis @ e1) * e1
    e3_n = np.linalg.norm(e3)
    if e3_n < 1e-9:
        raise DegenerateGeometryError("optical axes parallel to the baseline")
    e3 = e3 / e3_n
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3]), baseline


def rectify_pair(
    left_image: np.ndarray,
    left_camera: tuple[CameraIntrinsics, CameraPose],
    right_image: np.ndarray,
    right_camera: tuple[CameraIntrinsics, CameraPose],
) -> RectifiedPair:
    """Resample a calibrated pair onto a common rectified plane.

    Output size matches the left image. Raises DegenerateGeometryError
    when the baseline is zero or no common plane exists.
    """
    intr_l, pose_l = left_camera
    intr_r, pose_r = right_camera
    img_l = np.asarray(left_image, dtype=np.float64)
    img_r = np.asarray(right_image, dtype=np.float64)
    if img_l.shape[:2] != (intr_l.height, intr_l.width):
        raise InvalidInputError("left image size disagrees with its calibration")
    if img_r.shape[:2] != (intr_r.height, intr_r.width):
        raise InvalidInputError("right image size disagrees with its calibration")

    R_rect, baseline = _rectifying_rotation(pose_l, pose_r)
    h, w = img_l.shape[:2]
    f = 0.5 * (intr_l.fx + intr_r.fx)

    # provisional intrinsics centered in the viewport, used to find where
    # the two image footprints land so the shared principal point can be
    # shifted to center their overlap
    c0 = np.array([w / 2.0, h / 2.0])
    K0 = np.array([[f, 0.0, c0[0]], [0.0, f, c0[1]], [0.0, 0.0, 1.0]])
    boxes = []
    for intr, pose in ((intr_l, pose_l), (intr_r, pose_r)):
        H0 = K0 @ R_rect @ pose.rotation.T @ np.linalg.inv(intr.K)
        corners = np.array(
            [[0.0, 0.0, 1.0], [intr.width, 0.0, 1.0], [0.0, intr.height, 1.0], [intr.width, intr.height, 1.0]]
        )
        warped = corners @ H0.T
        warped = warped[:, :2] / warped[:, 2:3]
        boxes.append((warped.min(axis=0), warped.max(axis=0)))
    lo = np.maximum(boxes[0][0], boxes[1][0])
    hi = np.minimum(boxes[0][1], boxes[1][1])
    overlap_center = np.where(hi > lo, 0.5 * (lo + hi), c0)
    c_new = c0 + (c0 - overlap_center)
    c_new = np.clip(c_new, 0.0, [w - 1e-6, h - 1e-6])

    K_new = CameraIntrinsics(fx=f, fy=f, cx=float(c_new[0]), cy=float(c_new[1]), width=w, height=h)
    H_l = K_new.K @ R_rect @ pose_l.rotation.T @ np.linalg.inv(intr_l.K)
    H_r = K_new.K @ R_rect @ pose_r.rotation.T @ np.linalg.inv(intr_r.K)

    warped_l, mask_l = warp_homography(img_l, H_l, (h, w))
    warped_r, mask_r = warp_homography(img_r, H_r, (h, w))

    pose_rect_l = CameraPose(rotation=R_rect, translation=-R_rect @ pose_l.camera_center)
    pose_rect_r = CameraPose(rotation=R_rect, translation=-R_rect @ pose_r.camera_center)

    return RectifiedPair(
        left_image=np.clip(warped_l, 0.0, 1.0),
        right_image=np.clip(warped_r, 0.0, 1.0),
        left_mask=mask_l,
        right_mask=mask_r,
        left_K=K_new,
        right_K=K_new,
        baseline=baseline,
        rect_transforms=(H_l, H_r),
        left_pose=pose_rect_l,
        right_pose=pose_rect_r,
    )
