"""Numba kernels for projection, tiled alpha compositing and its adjoint.

Blend rule per pixel, front to back over the tile's depth-sorted entries:
    alpha_i = opacity_i * exp(-q_i / 2),  q_i = Mahalanobis^2 at the pixel
    C += color_i * alpha_i * T;  T *= 1 - alpha_i
with three hard cutoffs that are part of the rendering semantics (the
brute-force oracle applies the same ones): q > Q_MAX is outside the splat
footprint, alpha < ALPHA_MIN is skipped, and blending stops once
T < TRANSMITTANCE_EPS. Kernels only touch pixels of their own tile range,
so any partition of tiles across threads produces bit-identical frames.

exp(-t) is a range-reduced degree-8 Taylor evaluation (abs error ~2e-10,
exact at t=0); forward and backward use the same helper so the adjoint
replays the forward bit-for-bit.
"""

import math

import numpy as np
from numba import njit

Q_MAX = 9.0  # 3-sigma Mahalanobis footprint
ALPHA_MIN = 1.0 / 255.0
TRANSMITTANCE_EPS = 1e-4

_LOG2E = 1.4426950408889634
_LN2 = 0.6931471805599453
# 2^-n for n in [0, 8]; callers only pass t in [0, Q_MAX/2 + slack]
_POW2_NEG = np.array([1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625])


@njit(cache=True, nogil=True, inline="always")
def _exp_neg(t):
    # e^{-t} for t in [0, ~5.6] via 2^{-n} * e^{x}, x in [-ln2/2, ln2/2];
    # degree-6 Taylor in Estrin form keeps the dependency chain short
    n = int(t * _LOG2E + 0.5)
    x = n * _LN2 - t
    x2 = x * x
    x4 = x2 * x2
    p01 = 1.0 + x
    p23 = 0.5 + x * 1.6666666666666666e-01
    p45 = 4.1666666666666664e-02 + x * 8.3333333333333332e-03
    p6 = 1.3888888888888889e-03
    p = (p01 + x2 * p23) + x4 * (p45 + x2 * p6)
    return p * _POW2_NEG[n]


@njit(cache=True, nogil=True)
def project_kernel(
    positions,
    rotations,
    scales,
    W,
    trans,
    fx,
    fy,
    cx,
    cy,
    width,
    height,
    blur_floor,
    near,
    lim_x,
    lim_y,
    out_mean,
    out_conic,
    out_cov,
    out_radii,
    out_depth,
    out_tcam,
    out_clamped,
    out_valid,
):
    n = positions.shape[0]
    w00, w01, w02 = W[0, 0], W[0, 1], W[0, 2]
    w10, w11, w12 = W[1, 0], W[1, 1], W[1, 2]
    w20, w21, w22 = W[2, 0], W[2, 1], W[2, 2]
    for g in range(n):
        px, py, pz = positions[g, 0], positions[g, 1], positions[g, 2]
        tx = w00 * px + w01 * py + w02 * pz + trans[0]
        ty = w10 * px + w11 * py + w12 * pz + trans[1]
        tz = w20 * px + w21 * py + w22 * pz + trans[2]
        out_tcam[g, 0] = tx
        out_tcam[g, 1] = ty
        out_tcam[g, 2] = tz
        out_depth[g] = tz
        if tz <= near:
            out_valid[g] = 0
            out_mean[g, 0] = 0.0
            out_mean[g, 1] = 0.0
            out_conic[g, 0] = 1.0
            out_conic[g, 1] = 0.0
            out_conic[g, 2] = 1.0
            out_cov[g, 0] = 1.0
            out_cov[g, 1] = 0.0
            out_cov[g, 2] = 1.0
            out_radii[g, 0] = 0.0
            out_radii[g, 1] = 0.0
            out_clamped[g, 0] = 0
            out_clamped[g, 1] = 0
            continue

        # unit quaternion (zero-norm falls back to identity)
        qw, qx, qy, qz = rotations[g, 0], rotations[g, 1], rotations[g, 2], rotations[g, 3]
        qn = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        if qn <= 1e-12:
            qw, qx, qy, qz = 1.0, 0.0, 0.0, 0.0
        else:
            qw, qx, qy, qz = qw / qn, qx / qn, qy / qn, qz / qn
        r00 = 1.0 - 2.0 * (qy * qy + qz * qz)
        r01 = 2.0 * (qx * qy - qw * qz)
        r02 = 2.0 * (qx * qz + qw * qy)
        r10 = 2.0 * (qx * qy + qw * qz)
        r11 = 1.0 - 2.0 * (qx * qx + qz * qz)
        r12 = 2.0 * (qy * qz - qw * qx)
        r20 = 2.0 * (qx * qz - qw * qy)
        r21 = 2.0 * (qy * qz + qw * qx)
        r22 = 1.0 - 2.0 * (qx * qx + qy * qy)
        s0, s1, s2 = scales[g, 0], scales[g, 1], scales[g, 2]
        m00, m01, m02 = r00 * s0, r01 * s1, r02 * s2
        m10, m11, m12 = r10 * s0, r11 * s1, r12 * s2
        m20, m21, m22 = r20 * s0, r21 * s1, r22 * s2
        # Sigma = M M^T (symmetric)
        a00 = m00 * m00 + m01 * m01 + m02 * m02
        a01 = m00 * m10 + m01 * m11 + m02 * m12
        a02 = m00 * m20 + m01 * m21 + m02 * m22
        a11 = m10 * m10 + m11 * m11 + m12 * m12
        a12 = m10 * m20 + m11 * m21 + m12 * m22
        a22 = m20 * m20 + m21 * m21 + m22 * m22
        # Sigma_cam = W Sigma W^T
        b00 = w00 * a00 + w01 * a01 + w02 * a02
        b01 = w00 * a01 + w01 * a11 + w02 * a12
        b02 = w00 * a02 + w01 * a12 + w02 * a22
        b10 = w10 * a00 + w11 * a01 + w12 * a02
        b11 = w10 * a01 + w11 * a11 + w12 * a12
        b12 = w10 * a02 + w11 * a12 + w12 * a22
        b20 = w20 * a00 + w21 * a01 + w22 * a02
        b21 = w20 * a01 + w21 * a11 + w22 * a12
        b22 = w20 * a02 + w21 * a12 + w22 * a22
        c00 = b00 * w00 + b01 * w01 + b02 * w02
        c01 = b00 * w10 + b01 * w11 + b02 * w12
        c02 = b00 * w20 + b01 * w21 + b02 * w22
        c11 = b10 * w10 + b11 * w11 + b12 * w12
        c12 = b10 * w20 + b11 * w21 + b12 * w22
        c22 = b20 * w20 + b21 * w21 + b22 * w22

        invz = 1.0 / tz
        u = tx * invz
        v = ty * invz
        out_mean[g, 0] = fx * u + cx
        out_mean[g, 1] = fy * v + cy
        uc = u
        vc = v
        cl0 = 0
        cl1 = 0
        if uc > lim_x:
            uc = lim_x
            cl0 = 1
        elif uc < -lim_x:
            uc = -lim_x
            cl0 = 1
        if vc > lim_y:
            vc = lim_y
            cl1 = 1
        elif vc < -lim_y:
            vc = -lim_y
            cl1 = 1
        out_clamped[g, 0] = cl0
        out_clamped[g, 1] = cl1
        # J rows: [fx/z, 0, -fx*u/z], [0, fy/z, -fy*v/z]
        j00 = fx * invz
        j02 = -fx * uc * invz
        j11 = fy * invz
        j12 = -fy * vc * invz
        # Sigma' = J Sigma_cam J^T + blur_floor I
        t00 = j00 * c00 + j02 * c02
        t01 = j00 * c01 + j02 * c12
        t02 = j00 * c02 + j02 * c22
        t10 = j11 * c01 + j12 * c02
        t11 = j11 * c11 + j12 * c12
        t12 = j11 * c12 + j12 * c22
        s2d00 = t00 * j00 + t02 * j02 + blur_floor
        s2d01 = t10 * j00 + t12 * j02
        s2d11 = t11 * j11 + t12 * j12 + blur_floor
        out_cov[g, 0] = s2d00
        out_cov[g, 1] = s2d01
        out_cov[g, 2] = s2d11
        det = s2d00 * s2d11 - s2d01 * s2d01
        if det <= 0.0 or not math.isfinite(det):
            out_valid[g] = 0
            out_conic[g, 0] = 1.0
            out_conic[g, 1] = 0.0
            out_conic[g, 2] = 1.0
            out_radii[g, 0] = 0.0
            out_radii[g, 1] = 0.0
            continue
        invdet = 1.0 / det
        out_conic[g, 0] = s2d11 * invdet
        out_conic[g, 1] = -s2d01 * invdet
        out_conic[g, 2] = s2d00 * invdet
        rx = 3.0 * math.sqrt(s2d00)
        ry = 3.0 * math.sqrt(s2d11)
        out_radii[g, 0] = rx
        out_radii[g, 1] = ry
        mx = fx * u + cx
        my = fy * v + cy
        if mx + rx > 0.0 and mx - rx < width and my + ry > 0.0 and my - ry < height:
            out_valid[g] = 1
        else:
            out_valid[g] = 0


@njit(cache=True, nogil=True, fastmath={"contract", "nsz", "arcp"})
def composite_tile_range(
    tile_lo,
    tile_hi,
    tile_size,
    tiles_x,
    width,
    height,
    offsets,
    entries,
    means2d,
    conic,
    radii,
    colors,
    opacities,
    background,
    out_color,
    out_alpha,
    out_count,
):
    buf_c = np.zeros((tile_size * tile_size, 3), np.float64)
    buf_t = np.zeros(tile_size * tile_size, np.float64)
    buf_n = np.zeros(tile_size * tile_size, np.int32)
    bg0, bg1, bg2 = background[0], background[1], background[2]
    for t in range(tile_lo, tile_hi):
        ty = t // tiles_x
        tx = t % tiles_x
        x_start = tx * tile_size
        y_start = ty * tile_size
        x_end = min(width, x_start + tile_size)
        y_end = min(height, y_start + tile_size)
        tw = x_end - x_start
        th = y_end - y_start
        npx = tw * th
        for p in range(npx):
            buf_t[p] = 1.0
            buf_n[p] = 0
            buf_c[p, 0] = 0.0
            buf_c[p, 1] = 0.0
            buf_c[p, 2] = 0.0
        n_active = npx
        for e in range(offsets[t], offsets[t + 1]):
            if n_active == 0:
                break
            g = entries[e]
            mx = means2d[g, 0]
            my = means2d[g, 1]
            # pixel-center bounds of the splat footprint inside this tile
            # (same AABB the binning pass used)
            jx0 = max(x_start, int(math.ceil(mx - radii[g, 0] - 0.5)))
            jx1 = min(x_end - 1, int(math.floor(mx + radii[g, 0] - 0.5)))
            jy0 = max(y_start, int(math.ceil(my - radii[g, 1] - 0.5)))
            jy1 = min(y_end - 1, int(math.floor(my + radii[g, 1] - 0.5)))
            if jx1 < jx0 or jy1 < jy0:
                continue
            ca = conic[g, 0]
            cb2 = conic[g, 1] + conic[g, 1]
            cc = conic[g, 2]
            op = opacities[g]
            col0 = colors[g, 0]
            col1 = colors[g, 1]
            col2 = colors[g, 2]
            for i in range(jy0, jy1 + 1):
                dy = i + 0.5 - my
                row = (i - y_start) * tw - x_start
                for j in range(jx0, jx1 + 1):
                    p = row + j
                    tcur = buf_t[p]
                    if tcur < TRANSMITTANCE_EPS:
                        continue
                    dx = j + 0.5 - mx
                    q = ca * dx * dx + cb2 * dx * dy + cc * dy * dy
                    if q > Q_MAX:
                        continue
                    alpha = op * _exp_neg(0.5 * q)
                    if alpha < ALPHA_MIN:
                        continue
                    w = alpha * tcur
                    buf_c[p, 0] += w * col0
                    buf_c[p, 1] += w * col1
                    buf_c[p, 2] += w * col2
                    buf_n[p] += 1
                    tnew = tcur * (1.0 - alpha)
                    buf_t[p] = tnew
                    if tnew < TRANSMITTANCE_EPS:
                        n_active -= 1
        for i in range(y_start, y_end):
            base = (i - y_start) * tw - x_start
            for j in range(x_start, x_end):
                p = base + j
                tfin = buf_t[p]
                out_color[i, j, 0] = buf_c[p, 0] + bg0 * tfin
                out_color[i, j, 1] = buf_c[p, 1] + bg1 * tfin
                out_color[i, j, 2] = buf_c[p, 2] + bg2 * tfin
                out_alpha[i, j] = 1.0 - tfin
                out_count[i, j] = buf_n[p]


@njit(cache=True, nogil=True)
def backward_tile_range(
    tile_lo,
    tile_hi,
    tile_size,
    tiles_x,
    width,
    height,
    offsets,
    entries,
    means2d,
    conic,
    colors,
    opacities,
    background,
    adjoint,
    d_mean2d,
    d_conic,
    d_color,
    d_opacity,
):
    """Per-entry adjoint accumulation.

    For each pixel the forward pass is replayed recording the blended
    contributions, then a back-to-front sweep recovers dL/d(mean2d,
    conic, color, opacity) per tile entry. Entry slots are tile-exclusive,
    so threads over disjoint tile ranges never race.
    """
    max_bin = 0
    for t in range(tile_lo, tile_hi):
        b = offsets[t + 1] - offsets[t]
        if b > max_bin:
            max_bin = b
    rec_k = np.empty(max_bin, np.int64)
    rec_alpha = np.empty(max_bin, np.float64)
    rec_g = np.empty(max_bin, np.float64)
    rec_t = np.empty(max_bin, np.float64)

    for t in range(tile_lo, tile_hi):
        ty = t // tiles_x
        tx = t % tiles_x
        x_start = tx * tile_size
        y_start = ty * tile_size
        x_end = min(width, x_start + tile_size)
        y_end = min(height, y_start + tile_size)
        e0 = offsets[t]
        e1 = offsets[t + 1]
        if e1 == e0:
            continue
        for i in range(y_start, y_end):
            for j in range(x_start, x_end):
                a0 = adjoint[i, j, 0]
                a1 = adjoint[i, j, 1]
                a2 = adjoint[i, j, 2]
                if a0 == 0.0 and a1 == 0.0 and a2 == 0.0:
                    continue
                px = j + 0.5
                py = i + 0.5
                # forward replay
                tcur = 1.0
                m = 0
                for e in range(e0, e1):
                    if tcur < TRANSMITTANCE_EPS:
                        break
                    g = entries[e]
                    dx = px - means2d[g, 0]
                    dy = py - means2d[g, 1]
                    cb2 = conic[g, 1] + conic[g, 1]
                    q = conic[g, 0] * dx * dx + cb2 * dx * dy + conic[g, 2] * dy * dy
                    if q > Q_MAX:
                        continue
                    gval = _exp_neg(0.5 * q)
                    alpha = opacities[g] * gval
                    if alpha < ALPHA_MIN:
                        continue
                    rec_k[m] = e
                    rec_alpha[m] = alpha
                    rec_g[m] = gval
                    rec_t[m] = tcur
                    tcur = tcur * (1.0 - alpha)
                    m += 1
                # back-to-front: r* is what renders behind the current entry
                r0 = background[0]
                r1 = background[1]
                r2 = background[2]
                for k in range(m - 1, -1, -1):
                    e = rec_k[k]
                    g = entries[e]
                    alpha = rec_alpha[k]
                    gval = rec_g[k]
                    tb = rec_t[k]
                    c0 = colors[g, 0]
                    c1 = colors[g, 1]
                    c2 = colors[g, 2]
                    w = alpha * tb
                    d_color[e, 0] += a0 * w
                    d_color[e, 1] += a1 * w
                    d_color[e, 2] += a2 * w
                    dl_dalpha = (
                        a0 * tb * (c0 - r0) + a1 * tb * (c1 - r1) + a2 * tb * (c2 - r2)
                    )
                    d_opacity[e] += dl_dalpha * gval
                    dl_dq = dl_dalpha * opacities[g] * gval * (-0.5)
                    dx = px - means2d[g, 0]
                    dy = py - means2d[g, 1]
                    d_conic[e, 0] += dl_dq * dx * dx
                    d_conic[e, 1] += dl_dq * 2.0 * dx * dy
                    d_conic[e, 2] += dl_dq * dy * dy
                    gx = 2.0 * (conic[g, 0] * dx + conic[g, 1] * dy)
                    gy = 2.0 * (conic[g, 1] * dx + conic[g, 2] * dy)
                    d_mean2d[e, 0] -= dl_dq * gx
                    d_mean2d[e, 1] -= dl_dq * gy
                    # fold this entry into the rest
                    r0 = c0 * alpha + (1.0 - alpha) * r0
                    r1 = c1 * alpha + (1.0 - alpha) * r1
                    r2 = c2 * alpha + (1.0 - alpha) * r2
