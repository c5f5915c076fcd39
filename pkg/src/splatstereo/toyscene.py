"""Synthetic scenes with known geometry for tests, benchmarks and demos.

The scene is a gently waving textured sheet represented exactly as a
Gaussian cloud (one splat per sheet sample), observed by a small arc of
inward-looking cameras. Because the ground truth cloud is known, pipeline
outputs can be scored against direct renders of the truth, and analytic
sheet depth is available per camera.

`python -m splatstereo.toyscene OUT_DIR` materializes a dataset directory
(calibration.json + PNG frames + float32 depth + the truth cloud as PLY).
"""

import argparse
from pathlib import Path

import numpy as np
from scipy import ndimage

from .gaussians.cloud import GaussianCloud
from .gaussians.ply import save_ply
from .geometry.calibration import save_calibration
from .geometry.camera import CameraIntrinsics, CameraPose, CameraRig
from .imgio import save_png
from .render.rasterizer import RenderConfig, render

SHEET_DEPTH = 2.5  # meters from the rig to the sheet center
SHEET_EXTENT = 1.6  # meters, square half-width x2
WAVE_AMPLITUDE = 0.12


def sheet_height(x: np.ndarray, y: np.ndarray, amplitude: float = WAVE_AMPLITUDE) -> np.ndarray:
    """World z of the sheet surface at (x, y)."""
    return SHEET_DEPTH + amplitude * (np.sin(2.3 * x + 0.7) * np.cos(2.9 * y - 0.4))


def _texture(rng, n: int) -> np.ndarray:
    # band-limited: the finest octave stays above the splat footprint so a
    # faithful cloud can actually carry the texture
    tex = np.zeros((n, n, 3))
    for sigma, amp in ((max(n // 24, 3), 0.5), (max(n // 64, 2), 0.33), (max(n // 80, 2.5), 0.17)):
        tex += amp * ndimage.gaussian_filter(rng.uniform(-1, 1, (n, n, 3)), (sigma, sigma, 0), mode="wrap")
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return 0.08 + 0.84 * tex


def make_toy_cloud(
    n_side: int = 256,
    seed: int = 0,
    footprint: float = 0.8,
    opacity: float = 0.9,
    depth_jitter: float = 0.6,
) -> GaussianCloud:
    """Known ground-truth cloud: a textured wavy sheet, one splat per sample.

    Splat sigma is `footprint` times the sample spacing, mirroring the
    pixel-footprint rule the pipeline's handcrafted heads use, so truth
    renders and pipeline renders share blur characteristics. Per-splat
    depth jitter (in units of the sample spacing) keeps the depth-sort
    order identical from every viewpoint; without it, near-tie orderings
    flip with viewing direction and the two views' blends slide against
    each other at sub-splat scale.
    """
    rng = np.random.default_rng(seed)
    half = SHEET_EXTENT / 2
    xs = np.linspace(-half, half, n_side)
    ys = np.linspace(-half, half, n_side)
    gx, gy = np.meshgrid(xs, ys)
    gz = sheet_height(gx, gy)
    positions = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    colors = _texture(rng, n_side).reshape(-1, 3)
    n = len(positions)
    spacing = SHEET_EXTENT / (n_side - 1)
    positions[:, 2] += depth_jitter * spacing * rng.uniform(-1, 1, n)
    scales = np.full((n, 3), max(footprint * spacing, 1e-4))
    rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    opacities = np.full(n, opacity)
    return GaussianCloud(
        positions=positions, colors=colors, rotations=rotations,
        scales=scales, opacities=opacities,
    )


def make_toy_rig(
    n_cameras: int = 3,
    image_size: int = 256,
    fov_deg: float = 40.0,
    span_deg: float = 10.0,
) -> CameraRig:
    """Inward-looking camera arc around the sheet center."""
    center = np.array([0.0, 0.0, SHEET_DEPTH])
    radius = SHEET_DEPTH
    f = 0.5 * image_size / np.tan(np.radians(fov_deg) / 2)
    intr = CameraIntrinsics(fx=f, fy=f, cx=image_size / 2, cy=image_size / 2,
                            width=image_size, height=image_size)
    cameras = []
    hint = np.array([0.0, 1.0, 0.0])
    angles = np.linspace(-np.radians(span_deg) / 2, np.radians(span_deg) / 2, n_cameras)
    for k, az in enumerate(angles):
        cam_center = center + radius * np.array([np.sin(az), 0.0, -np.cos(az)])
        forward = center - cam_center
        forward /= np.linalg.norm(forward)
        right = np.cross(hint, forward)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        pose = CameraPose(rotation=R, translation=-R @ cam_center)
        cameras.append((f"cam{k}", intr, pose))
    return CameraRig(cameras=tuple(cameras), scene_center=center)


def sheet_depth_map(intr: CameraIntrinsics, pose: CameraPose, iterations: int = 8) -> np.ndarray:
    """Analytic camera-space depth of the sheet surface per pixel.

    Solves z_cam along each ray for the height-field intersection by
    fixed-point iteration; the waves are gentle so it converges fast.
    """
    h, w = intr.height, intr.width
    vv, uu = np.mgrid[0:h, 0:w].astype(np.float64)
    pix = np.stack([uu + 0.5, vv + 0.5, np.ones_like(uu)], axis=-1)
    # rays have unit camera-space z, so world = origin + ray_world * z_cam
    rays_world = (pix @ np.linalg.inv(intr.K).T) @ pose.rotation
    origin = pose.camera_center
    z_cam = np.full((h, w), SHEET_DEPTH - origin[2])
    for _ in range(iterations):
        pts = origin[None, None, :] + rays_world * z_cam[..., None]
        target_z = sheet_height(pts[..., 0], pts[..., 1])
        z_cam = np.clip((target_z - origin[2]) / rays_world[..., 2], 0.1, 10.0)
    return z_cam


def render_views(cloud: GaussianCloud, rig: CameraRig, dtype=np.float64) -> dict:
    """Direct truth renders for every rig camera."""
    out = {}
    for cid, intr, pose in rig.cameras:
        frame = render(cloud, pose, intr, RenderConfig(dtype=dtype, background=(0.04, 0.04, 0.05)))
        out[cid] = np.asarray(frame.color, dtype=np.float64)
    return out


def render_expected_depth(cloud: GaussianCloud, pose: CameraPose, intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Alpha-blend-weighted camera depth per pixel, plus a coverage mask.

    This is the depth the rendered images actually depict (the same
    front-to-back weights the color blend uses), which makes it the right
    supervision/reference for stereo on rendered scenes.
    """
    z_cam = cloud.positions @ pose.rotation[2] + pose.translation[2]
    probe = GaussianCloud(
        positions=cloud.positions,
        colors=np.stack([z_cam, np.ones_like(z_cam), np.zeros_like(z_cam)], axis=1),
        rotations=cloud.rotations,
        scales=cloud.scales,
        opacities=cloud.opacities,
    )
    frame = render(probe, pose, intr, RenderConfig(dtype=np.float64, background=(0.0, 0.0, 0.0)))
    weight = np.asarray(frame.color[:, :, 1], dtype=np.float64)
    covered = weight > 0.5
    depth = np.divide(frame.color[:, :, 0], weight, out=np.zeros_like(weight), where=weight > 1e-9)
    return depth, covered


def make_toy_dataset(
    root,
    n_cameras: int = 3,
    image_size: int = 256,
    n_frames: int = 1,
    n_side: int = 256,
    seed: int = 0,
    with_depth: bool = True,
    span_deg: float = 10.0,
) -> Path:
    """Write a complete dataset directory and return its path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rig = make_toy_rig(n_cameras=n_cameras, image_size=image_size, span_deg=span_deg)
    save_calibration(rig, root / "calibration.json")
    for frame_idx in range(n_frames):
        cloud = make_toy_cloud(n_side=n_side, seed=seed + frame_idx)
        if frame_idx == 0:
            save_ply(cloud, root / "truth_cloud.ply")
        views = render_views(cloud, rig)
        for cid, intr, pose in rig.cameras:
            save_png(root / "images" / cid / f"{frame_idx:06d}.png", views[cid])
            if with_depth:
                ddir = root / "depth" / cid
                ddir.mkdir(parents=True, exist_ok=True)
                depth, _ = render_expected_depth(cloud, pose, intr)
                np.save(ddir / f"{frame_idx:06d}.npy", depth.astype(np.float32))
    return root


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic toy dataset")
    parser.add_argument("out", help="output directory")
    parser.add_argument("--cameras", type=int, default=3)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--frames", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    path = make_toy_dataset(args.out, n_cameras=args.cameras, image_size=args.size,
                            n_frames=args.frames, seed=args.seed)
    print(f"wrote toy dataset to {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
