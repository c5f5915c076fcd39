"""Tile-based forward rendering of a Gaussian cloud.

render() runs project -> bin -> composite. Tiles are independent, so the
composite stage is parallelized by partitioning the tile range across a
small thread pool; outputs are bit-identical for any thread count because
each tile's blend order is fixed by the depth sort and tiles never share
pixels.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from ..geometry.camera import CameraIntrinsics, CameraPose
from ..threads import resolve_thread_count
from ._kernels import composite_tile_range
from .camera_project import BLUR_FLOOR, NEAR_PLANE, ProjectedCloud, project_cloud
from .tiles import TILE_SIZE, TileBins, bin_and_sort


@dataclass(frozen=True)
class RenderConfig:
    tile_size: int = TILE_SIZE
    blur_floor: float = BLUR_FLOOR
    near: float = NEAR_PLANE
    background: tuple = (0.0, 0.0, 0.0)
    dtype: type = np.float32
    threads: int | None = None


@dataclass
class RenderedFrame:
    """Composited color with accumulated alpha and blend counts."""

    color: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W), 1 - final transmittance
    contributors: np.ndarray  # (H, W) int32 blended splats per pixel
    timings: dict = field(default_factory=dict)


def _as_dtype(arr: np.ndarray, dt) -> np.ndarray:
    if arr.dtype == dt and arr.flags.c_contiguous:
        return arr
    return np.ascontiguousarray(arr, dtype=dt)


def _run_tiled(kernel, bins: TileBins, n_threads: int, args: tuple):
    n_tiles = bins.tiles_x * bins.tiles_y
    n_threads = max(1, min(n_threads, n_tiles))
    if n_threads == 1:
        kernel(0, n_tiles, *args)
        return
    bounds = np.linspace(0, n_tiles, n_threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futs = [
            pool.submit(kernel, int(bounds[k]), int(bounds[k + 1]), *args)
            for k in range(n_threads)
            if bounds[k] < bounds[k + 1]
        ]
        for f in futs:
            f.result()


def composite(
    projected: ProjectedCloud,
    bins: TileBins,
    width: int,
    height: int,
    config: RenderConfig = RenderConfig(),
) -> RenderedFrame:
    """Alpha-blend depth-sorted tile bins into a frame."""
    dt = config.dtype
    out_color = np.empty((height, width, 3), dtype=dt)
    out_alpha = np.empty((height, width), dtype=dt)
    out_count = np.empty((height, width), dtype=np.int32)
    args = (
        bins.tile_size,
        bins.tiles_x,
        width,
        height,
        bins.offsets,
        bins.gaussian_index,
        _as_dtype(projected.means2d, dt),
        _as_dtype(projected.conic, dt),
        _as_dtype(projected.radii, dt),
        _as_dtype(projected.colors, dt),
        _as_dtype(projected.opacities, dt),
        np.asarray(config.background, dtype=dt),
        out_color,
        out_alpha,
        out_count,
    )
    _run_tiled(composite_tile_range, bins, resolve_thread_count(config.threads), args)
    return RenderedFrame(color=out_color, alpha=out_alpha, contributors=out_count)


def render(
    cloud,
    pose: CameraPose,
    intrinsics: CameraIntrinsics,
    config: RenderConfig = RenderConfig(),
) -> RenderedFrame:
    """Full pipeline: project, bin, composite. Empty clouds give background."""
    h, w = intrinsics.height, intrinsics.width
    if len(cloud.positions) == 0:
        dt = config.dtype
        color = np.broadcast_to(np.asarray(config.background, dtype=dt), (h, w, 3)).copy()
        return RenderedFrame(
            color=color,
            alpha=np.zeros((h, w), dtype=dt),
            contributors=np.zeros((h, w), dtype=np.int32),
            timings={"ms_project": 0.0, "ms_sort": 0.0, "ms_blend": 0.0},
        )

    t0 = time.perf_counter()
    projected = project_cloud(
        cloud.positions,
        cloud.rotations,
        cloud.scales,
        cloud.colors,
        cloud.opacities,
        pose,
        intrinsics,
        blur_floor=config.blur_floor,
        near=config.near,
        dtype=config.dtype,
    )
    t1 = time.perf_counter()
    bins = bin_and_sort(projected, w, h, tile_size=config.tile_size)
    t2 = time.perf_counter()
    frame = composite(projected, bins, w, h, config)
    t3 = time.perf_counter()
    frame.timings = {
        "ms_project": (t1 - t0) * 1e3,
        "ms_sort": (t2 - t1) * 1e3,
        "ms_blend": (t3 - t2) * 1e3,
    }
    return frame


def warmup(dtype=None) -> None:
    """Force JIT compilation of the hot kernels on a one-splat scene."""
    from ..gaussians.cloud import GaussianCloud

    dts = (np.float32, np.float64) if dtype is None else (dtype,)
    intr = CameraIntrinsics(fx=40.0, fy=40.0, cx=16.0, cy=16.0, width=32, height=32)
    pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
    cloud = GaussianCloud(
        positions=np.array([[0.0, 0.0, 2.0]]),
        colors=np.array([[1.0, 0.5, 0.2]]),
        rotations=np.array([[1.0, 0.0, 0.0, 0.0]]),
        scales=np.full((1, 3), 0.05),
        opacities=np.array([0.8]),
    )
    for dt in dts:
        render(cloud, pose, intr, RenderConfig(dtype=dt, threads=1))


def validate_frame(frame: RenderedFrame) -> None:
    if not np.all(np.isfinite(frame.color)):
        raise InvalidInputError("rendered frame contains non-finite colors")
