"""Diagnostic heatmaps for opacity, scale and depth maps."""

from pathlib import Path

import numpy as np

from ..gaussians.maps import GaussianParameterMaps
from ..geometry.disparity import DepthMap
from ..imgio import save_png

# cold -> hot stops (blue, cyan, green, yellow, red)
_STOPS = np.array(
    [[0.0, 0.0, 0.55], [0.0, 0.6, 1.0], [0.1, 0.9, 0.3], [1.0, 0.95, 0.1], [0.9, 0.1, 0.05]]
)


def colormap_cold_hot(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] scalars to RGB, cold (blue) at 0 through hot (red) at 1."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pos = v * (len(_STOPS) - 1)
    idx = np.minimum(pos.astype(np.int64), len(_STOPS) - 2)
    frac = (pos - idx)[..., None]
    return _STOPS[idx] * (1.0 - frac) + _STOPS[idx + 1] * frac


def normalize_unit(values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Min-max normalize to [0, 1]; constant inputs map to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    sel = v[mask] if mask is not None and mask.any() else v
    lo, hi = float(sel.min()), float(sel.max())
    if hi - lo < 1e-12:
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def emit_heatmaps(
    maps: GaussianParameterMaps,
    depth: DepthMap,
    out_dir,
    prefix: str = "",
) -> dict:
    """Write opacity / mean-scale / depth heatmaps; returns name -> path.

    Opacity is mapped on the absolute [0, 1] range; the mean-axis scale
    and the depth are min-max normalized over valid pixels.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    valid = maps.validity
    outputs = {}

    opacity_img = colormap_cold_hot(maps.opacity)
    opacity_img[~valid] = 0.0
    outputs["opacity"] = out_dir / f"{prefix}opacity.png"
    save_png(outputs["opacity"], opacity_img)

    mean_scale = maps.scale.mean(axis=-1)
    scale_img = colormap_cold_hot(normalize_unit(mean_scale, valid))
    scale_img[~valid] = 0.0
    outputs["scale"] = out_dir / f"{prefix}scale.png"
    save_png(outputs["scale"], scale_img)

    depth_img = colormap_cold_hot(normalize_unit(depth.values, depth.validity))
    depth_img[~depth.validity] = 0.0
    outputs["depth"] = out_dir / f"{prefix}depth.png"
    save_png(outputs["depth"], depth_img)
    return outputs
