"""Anisotropic Gaussian covariance from rotation + scale factors.

A Gaussian's 3D covariance is kept factored as a unit quaternion r and
per-axis scales s, and realized as Sigma = R S S^T R^T (R the rotation
matrix of r, S = diag(s)), which is symmetric positive semi-definite by
construction with eigenvalues s^2.

Quaternions are Hamilton convention, components ordered (w, x, y, z).
"""

import numpy as np

from ..errors import InvalidInputError


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for unit quaternions, shape (..., 4) -> (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    """Unit-normalize, replacing zero-norm rows by the identity quaternion."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    out = np.divide(q, norm, out=np.zeros_like(q), where=norm > 1e-12)
    degenerate = norm[..., 0] <= 1e-12
    if np.any(degenerate):
        out[degenerate] = np.array([1.0, 0.0, 0.0, 0.0])
    return out


def build_covariance(rotation: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Sigma = R S S^T R^T for one unit quaternion and positive scale triple."""
    q = np.asarray(rotation, dtype=np.float64).reshape(4)
    s = np.asarray(scale, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise InvalidInputError("rotation quaternion must be unit length")
    if np.any(s <= 0):
        raise InvalidInputError("scales must be positive")
    R = quaternion_to_matrix(q)
    M = R * s[None, :]
    return M @ M.T


def build_covariances(rotations: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Vectorized covariance for (N, 4) quaternions and (N, 3) scales."""
    R = quaternion_to_matrix(normalize_quaternions(rotations))
    M = R * np.asarray(scales, dtype=np.float64)[:, None, :]
    return M @ np.transpose(M, (0, 2, 1))
