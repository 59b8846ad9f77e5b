"""Pure-numpy implementations of the sampling kernels.

Each function mirrors the accumulation order of the compiled backend
(sequential over channels; per-window row sums summed row by row; fixed
four-corner bilinear expression) so the two backends agree to the last few
ulps and each is bitwise deterministic on its own.
"""

import numpy as np


def correlate_all_pairs(f0, f1):
    """4D all-pair volume V[i,j,u,v] = sum_k f0[i,j,k] * f1[u,v,k]."""
    return np.einsum("ijk,uvk->ijuv", f0, f1)


def avg_pool(data, stride):
    """Non-overlapping stride x stride window means; boundary windows use
    only in-bounds pixels."""
    h, w, _ = data.shape
    row_idx = np.arange(0, h, stride)
    col_idx = np.arange(0, w, stride)
    col_sums = np.add.reduceat(data, col_idx, axis=1)
    win_sums = np.add.reduceat(col_sums, row_idx, axis=0)
    row_counts = np.minimum(row_idx + stride, h) - row_idx
    col_counts = np.minimum(col_idx + stride, w) - col_idx
    counts = row_counts[:, None] * col_counts[None, :]
    return win_sums / counts[:, :, None].astype(np.float64)


def lookup_level(volume, flow_u, flow_v, stride, radius):
    """Bilinear (2r+1)^2 neighborhood samples of one pyramid level.

    For each source pixel (i, j) the target center is
    ((j + u) / stride, (i + v) / stride); integer offsets in [-r, r]^2 are
    added at level resolution and sampled with zero padding, offsets ordered
    row-major (dy outer, dx inner).
    """
    h0, w0, hs, ws = volume.shape
    n = 2 * radius + 1
    src_i = np.broadcast_to(np.arange(h0, dtype=np.float64)[:, None], (h0, w0))
    src_j = np.broadcast_to(np.arange(w0, dtype=np.float64)[None, :], (h0, w0))
    cy = (src_i + flow_v) / stride
    cx = (src_j + flow_u) / stride

    flat = volume.reshape(h0 * w0, hs, ws)
    pix = np.arange(h0 * w0)
    out = np.empty((h0, w0, n * n))
    idx = 0
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out[:, :, idx] = _bilinear_zero_pad(flat, pix, (cy + dy).ravel(), (cx + dx).ravel()).reshape(h0, w0)
            idx += 1
    return out


def _bilinear_zero_pad(flat, pix, y, x):
    """Sample flat[p, y[p], x[p]] bilinearly, zero outside the grid."""
    hs, ws = flat.shape[1], flat.shape[2]
    # Positions more than one cell outside the grid sample 0 regardless of
    # their exact value; clamping them keeps the int cast below overflow-free
    # without changing any result.
    y = np.minimum(np.maximum(y, -2.0), hs + 1.0)
    x = np.minimum(np.maximum(x, -2.0), ws + 1.0)
    y0f = np.floor(y)
    x0f = np.floor(x)
    wy = y - y0f
    wx = x - x0f
    y0 = y0f.astype(np.int64)
    x0 = x0f.astype(np.int64)

    def corner(yc, xc):
        inside = (yc >= 0) & (yc < hs) & (xc >= 0) & (xc < ws)
        vals = flat[pix, np.clip(yc, 0, hs - 1), np.clip(xc, 0, ws - 1)]
        return np.where(inside, vals, 0.0)

    v00 = corner(y0, x0)
    v01 = corner(y0, x0 + 1)
    v10 = corner(y0 + 1, x0)
    v11 = corner(y0 + 1, x0 + 1)
    return (
        (1.0 - wy) * (1.0 - wx) * v00
        + (1.0 - wy) * wx * v01
        + wy * (1.0 - wx) * v10
        + wy * wx * v11
    )
