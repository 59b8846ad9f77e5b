"""Shared helpers: random scene construction and the scalar reprojection
oracle used to cross-check the vectorized geometry."""

import math

import numpy as np
import pytest

from flowseek.geometry import CameraIntrinsics, InverseDepthMap


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)


def random_scene(rng, height=16, width=16, f_range=(50.0, 300.0), d_range=(0.05, 1.5)):
    """A generic full-rank scene: smooth positive inverse depth and sane
    intrinsics with the principal point near the center."""
    f_x = float(rng.uniform(*f_range))
    f_y = float(rng.uniform(*f_range))
    c_x = (width - 1) / 2.0 + float(rng.uniform(-2, 2))
    c_y = (height - 1) / 2.0 + float(rng.uniform(-2, 2))
    intr = CameraIntrinsics(f_x, f_y, c_x, c_y)
    base = rng.uniform(*d_range)
    bumps = rng.uniform(-0.3, 0.3, (4, 4))
    yy = np.linspace(0, 3, height)[:, None]
    xx = np.linspace(0, 3, width)[None, :]
    y0 = np.minimum(yy.astype(int), 2)
    x0 = np.minimum(xx.astype(int), 2)
    ty, tx = yy - y0, xx - x0
    smooth = (
        (1 - ty) * (1 - tx) * bumps[y0, x0]
        + (1 - ty) * tx * bumps[y0, x0 + 1]
        + ty * (1 - tx) * bumps[y0 + 1, x0]
        + ty * tx * bumps[y0 + 1, x0 + 1]
    )
    d0 = np.maximum(base * (1.0 + smooth), 0.01)
    return InverseDepthMap(d0), intr


def scalar_reprojection_oracle(d0, intr, rotation, translation, eps_z=1e-6):
    """Independent per-pixel reimplementation of back-project, transform,
    and project, in plain Python scalars."""
    h, w = d0.shape
    flow_u = np.zeros((h, w))
    flow_v = np.zeros((h, w))
    valid = np.zeros((h, w), dtype=bool)
    r = [[float(rotation[a][b]) for b in range(3)] for a in range(3)]
    t = [float(translation[k]) for k in range(3)]
    for i in range(h):
        for j in range(w):
            inv_z = float(d0[i, j])
            xn = (j - intr.c_x) / intr.f_x
            yn = (i - intr.c_y) / intr.f_y
            if inv_z > 0:
                z = 1.0 / inv_z
                px, py, pz = xn * z, yn * z, z
                qx = r[0][0] * px + r[0][1] * py + r[0][2] * pz + t[0]
                qy = r[1][0] * px + r[1][1] * py + r[1][2] * pz + t[1]
                qz = r[2][0] * px + r[2][1] * py + r[2][2] * pz + t[2]
                if qz <= eps_z:
                    continue
            else:
                # Point at infinity: only the rotated direction matters.
                qx = r[0][0] * xn + r[0][1] * yn + r[0][2]
                qy = r[1][0] * xn + r[1][1] * yn + r[1][2]
                qz = r[2][0] * xn + r[2][1] * yn + r[2][2]
                if qz <= 0.0:
                    continue
            u_new = intr.f_x * qx / qz + intr.c_x
            v_new = intr.f_y * qy / qz + intr.c_y
            flow_u[i, j] = u_new - j
            flow_v[i, j] = v_new - i
            valid[i, j] = True
    return flow_u, flow_v, valid


def bilinear_sample_scalar(img, y, x):
    """Plain-Python bilinear sample with clamped edges (for small oracles)."""
    h, w = img.shape
    y0 = min(max(int(math.floor(y)), 0), h - 1)
    x0 = min(max(int(math.floor(x)), 0), w - 1)
    y1 = min(y0 + 1, h - 1)
    x1 = min(x0 + 1, w - 1)
    wy = y - y0
    wx = x - x0
    return (
        (1 - wy) * (1 - wx) * img[y0, x0]
        + (1 - wy) * wx * img[y0, x1]
        + wy * (1 - wx) * img[y1, x0]
        + wy * wx * img[y1, x1]
    )
