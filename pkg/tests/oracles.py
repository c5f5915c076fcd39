"""Independent reference implementations the tests check against.

These deliberately avoid the library's tiled/accelerated code paths:
brute-force per-pixel alpha blending, triple-loop cost volumes, O(n^2)
Chamfer scans and central finite differences.
"""

import numpy as np
from numba import njit

from splatstereo.render._kernels import ALPHA_MIN, Q_MAX, TRANSMITTANCE_EPS, _exp_neg
from splatstereo.render.camera_project import project_cloud


@njit(cache=True)
def _brute_blend(order, means2d, conic, colors, opacities, background, height, width):
    out = np.zeros((height, width, 3))
    out_alpha = np.zeros((height, width))
    for i in range(height):
        for j in range(width):
            t = 1.0
            c0 = 0.0
            c1 = 0.0
            c2 = 0.0
            for n in range(len(order)):
                if t < TRANSMITTANCE_EPS:
                    break
                g = order[n]
                dx = j + 0.5 - means2d[g, 0]
                dy = i + 0.5 - means2d[g, 1]
                cb2 = conic[g, 1] + conic[g, 1]
                q = conic[g, 0] * dx * dx + cb2 * dx * dy + conic[g, 2] * dy * dy
                if q > Q_MAX:
                    continue
                alpha = opacities[g] * _exp_neg(0.5 * q)
                if alpha < ALPHA_MIN:
                    continue
                w = alpha * t
                c0 += w * colors[g, 0]
                c1 += w * colors[g, 1]
                c2 += w * colors[g, 2]
                t *= 1.0 - alpha
            out[i, j, 0] = c0 + background[0] * t
            out[i, j, 1] = c1 + background[1] * t
            out[i, j, 2] = c2 + background[2] * t
            out_alpha[i, j] = 1.0 - t
    return out, out_alpha


def brute_force_render(cloud, pose, intrinsics, background=(0.0, 0.0, 0.0)):
    """Per-pixel full-sort alpha blend over every projected splat."""
    proj = project_cloud(
        cloud.positions, cloud.rotations, cloud.scales,
        cloud.colors, cloud.opacities, pose, intrinsics,
    )
    idx = np.flatnonzero(proj.valid)
    order = idx[np.argsort(proj.depth[idx], kind="stable")].astype(np.int64)
    return _brute_blend(
        order,
        np.ascontiguousarray(proj.means2d),
        np.ascontiguousarray(proj.conic),
        np.ascontiguousarray(proj.colors),
        np.ascontiguousarray(proj.opacities),
        np.asarray(background, dtype=np.float64),
        intrinsics.height,
        intrinsics.width,
    )


def cost_volume_triple_loop(f_left, f_right):
    h, w, d = f_left.shape
    out = np.zeros((h, w, w))
    for i in range(h):
        for j in range(w):
            for k in range(w):
                s = 0.0
                for c in range(d):
                    s += f_left[i, j, c] * f_right[i, k, c]
                out[i, j, k] = s
    return out


def chamfer_brute(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def select_pair_brute(rig, target_center):
    """Exhaustive two-argmax over normalized dot products (unordered)."""
    v_tar = np.asarray(target_center, dtype=np.float64) - rig.scene_center
    v_tar = v_tar / np.linalg.norm(v_tar)
    scores = []
    for cid in rig.camera_ids:
        v = rig.view_vector(cid)
        scores.append((float(v @ v_tar / np.linalg.norm(v)), cid))
    best = sorted(scores, key=lambda s: -s[0])[:2]
    return {best[0][1], best[1][1]}


def finite_difference_gradients(cloud, pose, intrinsics, adjoint, h=1e-4, config=None):
    """Central differences of sum(adjoint * rendered color) per attribute."""
    from splatstereo.render.rasterizer import RenderConfig, render

    cfg = config or RenderConfig(dtype=np.float64, threads=1)

    def loss():
        frame = render(cloud, pose, intrinsics, cfg)
        return float(np.sum(np.asarray(frame.color) * adjoint))

    out = {}
    for name, arr in (
        ("position", cloud.positions),
        ("rotation", cloud.rotations),
        ("scale", cloud.scales),
        ("color", cloud.colors),
    ):
        fd = np.zeros_like(arr)
        for n in range(arr.shape[0]):
            for k in range(arr.shape[1]):
                orig = arr[n, k]
                arr[n, k] = orig + h
                lp = loss()
                arr[n, k] = orig - h
                lm = loss()
                arr[n, k] = orig
                fd[n, k] = (lp - lm) / (2 * h)
        out[name] = fd
    fd = np.zeros_like(cloud.opacities)
    for n in range(len(fd)):
        orig = cloud.opacities[n]
        cloud.opacities[n] = orig + h
        lp = loss()
        cloud.opacities[n] = orig - h
        lm = loss()
        cloud.opacities[n] = orig
        fd[n] = (lp - lm) / (2 * h)
    out["opacity"] = fd
    return out


def fd_gradient_scene(rng, n=10, img=40):
    """Random scene conditioned for clean finite differences.

    Footprints cover the whole image with max in-image Mahalanobis
    q <= 7 and opacities in [0.15, 0.5]: every pixel stays strictly
    inside the footprint, alpha-skip and termination cutoffs, so no
    FD probe can cross a blend discontinuity.
    """
    from splatstereo.gaussians.cloud import GaussianCloud
    from splatstereo.geometry.camera import CameraIntrinsics, CameraPose
    from splatstereo.render.covariance import normalize_quaternions

    intr = CameraIntrinsics(fx=img * 1.25, fy=img * 1.25, cx=img / 2, cy=img / 2, width=img, height=img)
    pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
    corners = np.array([[0.0, 0.0], [img, 0.0], [0.0, img], [img, img]])
    pos = np.zeros((n, 3))
    rot = np.zeros((n, 4))
    sc = np.zeros((n, 3))
    for k in range(n):
        while True:
            z = rng.uniform(1.8, 3.0)
            p = np.array([rng.uniform(-0.2, 0.2) * z / 2.5, rng.uniform(-0.2, 0.2) * z / 2.5, z])
            q = normalize_quaternions(rng.normal(size=(1, 4)))[0]
            s = rng.uniform(1.1, 1.7) * z * rng.uniform(0.8, 1.25, 3)
            pr = project_cloud(p[None], q[None], s[None], np.zeros((1, 3)), np.ones(1), pose, intr)
            if not pr.valid[0]:
                continue
            a, b, c = pr.conic[0]
            d = corners - pr.means2d[0]
            qc = a * d[:, 0] ** 2 + 2 * b * d[:, 0] * d[:, 1] + c * d[:, 1] ** 2
            if qc.max() < 7.0:
                pos[k], rot[k], sc[k] = p, q, s
                break
    from splatstereo.gaussians.cloud import GaussianCloud

    cloud = GaussianCloud(
        positions=pos,
        colors=rng.uniform(0, 1, (n, 3)),
        rotations=rot,
        scales=sc,
        opacities=rng.uniform(0.15, 0.5, n),
    )
    return cloud, pose, intr
