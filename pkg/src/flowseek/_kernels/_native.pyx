# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels: all-pair correlation, average pooling, and the
radius-r pyramid lookup.  Accumulation orders match the numpy backend."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def correlate_all_pairs(double[:, :, ::1] f0, double[:, :, ::1] f1):
    cdef Py_ssize_t h0 = f0.shape[0], w0 = f0.shape[1], k = f0.shape[2]
    cdef Py_ssize_t h1 = f1.shape[0], w1 = f1.shape[1]
    out_arr = np.empty((h0, w0, h1, w1), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, u, v, c
    cdef double acc
    for i in range(h0):
        for j in range(w0):
            for u in range(h1):
                for v in range(w1):
                    acc = 0.0
                    for c in range(k):
                        acc = acc + f0[i, j, c] * f1[u, v, c]
                    out[i, j, u, v] = acc
    return out_arr


def avg_pool(double[:, :, ::1] data, Py_ssize_t stride):
    cdef Py_ssize_t h = data.shape[0], w = data.shape[1], k = data.shape[2]
    cdef Py_ssize_t oh = (h + stride - 1) // stride
    cdef Py_ssize_t ow = (w + stride - 1) // stride
    out_arr = np.empty((oh, ow, k), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t oi, oj, c, i, j, r0, r1, c0, c1
    cdef double acc, row_acc
    for oi in range(oh):
        r0 = oi * stride
        r1 = r0 + stride
        if r1 > h:
            r1 = h
        for oj in range(ow):
            c0 = oj * stride
            c1 = c0 + stride
            if c1 > w:
                c1 = w
            for c in range(k):
                acc = 0.0
                for i in range(r0, r1):
                    row_acc = 0.0
                    for j in range(c0, c1):
                        row_acc = row_acc + data[i, j, c]
                    acc = acc + row_acc
                out[oi, oj, c] = acc / <double>((r1 - r0) * (c1 - c0))
    return out_arr


cdef inline double _floor(double v) noexcept:
    cdef double r = <double><long long>v
    if v < 0.0 and r != v:
        r -= 1.0
    return r


cdef inline double _corner(double[:, :, :, ::1] volume, Py_ssize_t i, Py_ssize_t j,
                           Py_ssize_t yc, Py_ssize_t xc,
                           Py_ssize_t hs, Py_ssize_t ws) noexcept:
    if yc < 0 or yc >= hs or xc < 0 or xc >= ws:
        return 0.0
    return volume[i, j, yc, xc]


def lookup_level(double[:, :, :, ::1] volume, double[:, ::1] flow_u,
                 double[:, ::1] flow_v, double stride, Py_ssize_t radius):
    cdef Py_ssize_t h0 = volume.shape[0], w0 = volume.shape[1]
    cdef Py_ssize_t hs = volume.shape[2], ws = volume.shape[3]
    cdef Py_ssize_t n = 2 * radius + 1
    out_arr = np.empty((h0, w0, n * n), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, idx, dy, dx
    cdef double cy, cx, y, x, y0f, x0f, wy, wx
    cdef double v00, v01, v10, v11
    cdef Py_ssize_t y0, x0
    for i in range(h0):
        for j in range(w0):
            cy = (<double>i + flow_v[i, j]) / stride
            cx = (<double>j + flow_u[i, j]) / stride
            idx = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    y = cy + <double>dy
                    x = cx + <double>dx
                    # Clamp far-out positions (still fully outside, so the
                    # sample stays 0) to keep the integer cast in range.
                    if y < -2.0:
                        y = -2.0
                    elif y > <double>hs + 1.0:
                        y = <double>hs + 1.0
                    if x < -2.0:
                        x = -2.0
                    elif x > <double>ws + 1.0:
                        x = <double>ws + 1.0
                    y0f = _floor(y)
                    x0f = _floor(x)
                    wy = y - y0f
                    wx = x - x0f
                    y0 = <Py_ssize_t>y0f
                    x0 = <Py_ssize_t>x0f
                    v00 = _corner(volume, i, j, y0, x0, hs, ws)
                    v01 = _corner(volume, i, j, y0, x0 + 1, hs, ws)
                    v10 = _corner(volume, i, j, y0 + 1, x0, hs, ws)
                    v11 = _corner(volume, i, j, y0 + 1, x0 + 1, hs, ws)
                    out[i, j, idx] = ((1.0 - wy) * (1.0 - wx) * v00
                                      + (1.0 - wy) * wx * v01
                                      + wy * (1.0 - wx) * v10
                                      + wy * wx * v11)
                    idx += 1
    return out_arr
