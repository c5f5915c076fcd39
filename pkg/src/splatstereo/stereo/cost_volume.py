"""All-pairs correlation volume over rectified rows.

C[i, j, k] = <f_left[i, j], f_right[i, k]>: row i of the left view scored
against every column k of the right view's same row. An average-pooled
pyramid along k supports coarse-to-fine lookups around a disparity guess.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

VOLUME_PYRAMID_LEVELS = 4


@dataclass(frozen=True)
class CostVolume:
    """data is (H_c, W_c, W_c); pyramid[l] halves the last axis l times."""

    data: np.ndarray
    pyramid: tuple

    @property
    def shape(self) -> tuple:
        return self.data.shape


def _pool_last(x: np.ndarray) -> np.ndarray:
    k = x.shape[-1] - (x.shape[-1] % 2)
    return 0.5 * (x[..., 0:k:2] + x[..., 1:k:2])


def build_cost_volume(f_left: np.ndarray, f_right: np.ndarray, pyramid_levels: int = VOLUME_PYRAMID_LEVELS) -> CostVolume:
    """Inner-product volume plus its pooled pyramid (window 2 along k)."""
    fl = np.asarray(f_left, dtype=np.float64)
    fr = np.asarray(f_right, dtype=np.float64)
    if fl.shape != fr.shape or fl.ndim != 3:
        raise InvalidInputError(f"feature shapes differ: {fl.shape} vs {fr.shape}")
    data = np.einsum("ijh,ikh->ijk", fl, fr, optimize=True)
    pyramid = [data]
    for _ in range(pyramid_levels - 1):
        pyramid.append(_pool_last(pyramid[-1]))
    return CostVolume(data=data, pyramid=tuple(pyramid))


def _sample_along_k(level: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Linear interpolation of level (H, W, K) at per-pixel k positions."""
    h, w, k = level.shape
    pos = np.clip(positions, 0.0, k - 1.0)
    k0 = np.floor(pos).astype(np.int64)
    k0 = np.minimum(k0, k - 2) if k >= 2 else np.zeros_like(k0)
    frac = pos - k0
    ii = np.arange(h)[:, None, None]
    jj = np.arange(w)[None, :, None]
    v0 = level[ii, jj, k0]
    v1 = level[ii, jj, np.minimum(k0 + 1, k - 1)]
    return v0 * (1.0 - frac) + v1 * frac


def lookup_cost(volume: CostVolume, disparity: np.ndarray, radius: int) -> np.ndarray:
    """Sample costs around the match column k = j - d at every pyramid level.

    Returns (H_c, W_c, levels * (2*radius+1)); out-of-range taps clamp to
    the volume border.
    """
    if radius < 1:
        raise InvalidInputError(f"lookup radius must be >= 1, got {radius}")
    d = np.asarray(disparity, dtype=np.float64)
    h, w, _ = volume.data.shape
    if d.shape != (h, w):
        raise InvalidInputError(f"disparity shape {d.shape} != {(h, w)}")
    cols = np.arange(w, dtype=np.float64)[None, :]
    center = cols - d
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    chunks = []
    for lvl_idx, level in enumerate(volume.pyramid):
        pos = center[:, :, None] / (1 << lvl_idx) + offsets[None, None, :]
        chunks.append(_sample_along_k(level, pos))
    return np.concatenate(chunks, axis=-1)


def sample_cost_triplet(volume: CostVolume, disparity: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Finest-level cost at disparities d-1, d, d+1 (for parabolic steps)."""
    d = np.asarray(disparity, dtype=np.float64)
    h, w, _ = volume.data.shape
    cols = np.arange(w, dtype=np.float64)[None, :]
    offsets = np.array([1.0, 0.0, -1.0])  # k = j - (d + {-1, 0, +1})
    taps = _sample_along_k(volume.data, (cols - d)[:, :, None] + offsets[None, None, :])
    return taps[:, :, 0], taps[:, :, 1], taps[:, :, 2]
