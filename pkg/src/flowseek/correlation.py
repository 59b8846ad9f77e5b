"""Feature maps, 4D all-pair correlation volumes, pyramids, and lookup.

Volumes are materialized densely: level s of a pyramid over HxW features
holds H*W*ceil(H/s)*ceil(W/s) float64 entries, so desk-scale inputs
(<= 64x64 features) are the intended regime.  The hot loops dispatch to the
compiled kernels when available (see :mod:`flowseek._kernels`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, ParameterError
from .geometry import FlowField

# 4-level pyramid, the established convention of this model lineage.
DEFAULT_STRIDES = (1, 2, 4, 8)


@dataclass
class FeatureMap:
    """Dense (H, W, K) feature array, K >= 1, all values finite."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] < 1:
            raise DimensionError(f"feature map must be (H, W, K>=1), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError("feature values must be finite")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


@dataclass
class CorrelationPyramid:
    """All-pair volumes, one per stride; level s has shape
    (H, W, ceil(H/s), ceil(W/s))."""

    levels: list
    strides: tuple

    @property
    def source_height(self):
        return self.levels[0].shape[0]

    @property
    def source_width(self):
        return self.levels[0].shape[1]


@dataclass
class LookupPatch:
    """Per-pixel correlation samples: (H, W, S * (2r+1)^2), level-major,
    offsets row-major (dy outer, dx inner)."""

    data: np.ndarray
    radius: int
    strides: tuple


def correlate_all_pairs(f0: FeatureMap, f1: FeatureMap, scale_by_sqrt_channels=False):
    """Dot-product volume V[i,j,u,v] = sum_k f0[i,j,k] * f1[u,v,k].

    No normalization by default; ``scale_by_sqrt_channels`` divides by
    sqrt(K) when enabled.
    """
    if f0.channels != f1.channels:
        raise DimensionError(
            f"channel mismatch: {f0.channels} vs {f1.channels}"
        )
    volume = _kernels.correlate_all_pairs(f0.data, f1.data)
    if scale_by_sqrt_channels:
        volume = volume / math.sqrt(f0.channels)
    return volume


def avg_pool(f: FeatureMap, stride: int) -> FeatureMap:
    """Non-overlapping window means; boundary windows average only the
    in-bounds pixels, so output dims are ceil(H/s) x ceil(W/s)."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    return FeatureMap(_kernels.avg_pool(f.data, int(stride)))


def build_pyramid(f0: FeatureMap, f1: FeatureMap, strides=DEFAULT_STRIDES) -> CorrelationPyramid:
    """Correlation pyramid: level s correlates f0 against f1 pooled at stride s."""
    strides = tuple(int(s) for s in strides)
    if len(strides) == 0:
        raise ParameterError("strides must be non-empty")
    if strides[0] != 1 or any(b <= a for a, b in zip(strides, strides[1:])):
        raise ParameterError(f"strides must be ascending and start at 1, got {strides}")
    levels = [correlate_all_pairs(f0, avg_pool(f1, s)) for s in strides]
    return CorrelationPyramid(levels=levels, strides=strides)


def lookup(pyramid: CorrelationPyramid, flow: FlowField, radius: int) -> LookupPatch:
    """Sample a (2r+1)^2 neighborhood around each pixel's correspondence.

    The center at level s is ((j + u)/s, (i + v)/s); integer offsets are
    applied at level resolution and sampled bilinearly with zero padding.
    """
    if radius < 0:
        raise ParameterError(f"radius must be >= 0, got {radius}")
    if (flow.height, flow.width) != (pyramid.source_height, pyramid.source_width):
        raise DimensionError(
            f"flow is {flow.height}x{flow.width}, pyramid source is "
            f"{pyramid.source_height}x{pyramid.source_width}"
        )
    flow_u = np.ascontiguousarray(flow.u)
    flow_v = np.ascontiguousarray(flow.v)
    per_level = [
        _kernels.lookup_level(np.ascontiguousarray(level), flow_u, flow_v, float(s), int(radius))
        for level, s in zip(pyramid.levels, pyramid.strides)
    ]
    return LookupPatch(
        data=np.concatenate(per_level, axis=2),
        radius=int(radius),
        strides=pyramid.strides,
    )


def kernel_backend():
    """Name of the active kernel backend ('native' or 'numpy')."""
    return _kernels.backend_name()


# ---------------------------------------------------------------------------
# Brute-force equivalence suite (used by the `corr-oracle` CLI subcommand).
# The reference implementations below are deliberately plain Python loops,
# independent of the vectorized kernels they check.
# ---------------------------------------------------------------------------


def _oracle_correlate(f0, f1):
    h0, w0, k = f0.shape
    h1, w1, _ = f1.shape
    out = np.empty((h0, w0, h1, w1))
    for i in range(h0):
        for j in range(w0):
            for u in range(h1):
                for v in range(w1):
                    acc = 0.0
                    for c in range(k):
                        acc += f0[i, j, c] * f1[u, v, c]
                    out[i, j, u, v] = acc
    return out


def _oracle_avg_pool(data, stride):
    h, w, k = data.shape
    oh = math.ceil(h / stride)
    ow = math.ceil(w / stride)
    out = np.empty((oh, ow, k))
    for oi in range(oh):
        for oj in range(ow):
            rows = range(oi * stride, min(oi * stride + stride, h))
            cols = range(oj * stride, min(oj * stride + stride, w))
            for c in range(k):
                total = 0.0
                for i in rows:
                    for j in cols:
                        total += data[i, j, c]
                out[oi, oj, c] = total / (len(rows) * len(cols))
    return out


def _oracle_lookup(volume, flow_u, flow_v, stride, radius):
    h0, w0, hs, ws = volume.shape
    n = 2 * radius + 1
    out = np.empty((h0, w0, n * n))
    for i in range(h0):
        for j in range(w0):
            cy = (i + flow_v[i, j]) / stride
            cx = (j + flow_u[i, j]) / stride
            idx = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    y = cy + dy
                    x = cx + dx
                    y0 = math.floor(y)
                    x0 = math.floor(x)
                    wy = y - y0
                    wx = x - x0
                    acc = 0.0
                    for (yc, xc, wgt) in (
                        (y0, x0, (1 - wy) * (1 - wx)),
                        (y0, x0 + 1, (1 - wy) * wx),
                        (y0 + 1, x0, wy * (1 - wx)),
                        (y0 + 1, x0 + 1, wy * wx),
                    ):
                        if 0 <= yc < hs and 0 <= xc < ws:
                            acc += wgt * volume[i, j, yc, xc]
                    out[i, j, idx] = acc
                    idx += 1
    return out


def run_oracle_suite(rtol=1e-12, seed=20240601):
    """Compare the active kernels against the scalar oracles on small
    instances; returns one record per instance."""
    rng = np.random.default_rng(seed)
    results = []

    def record(name, got, want):
        err = float(np.max(np.abs(got - want)))
        ref = float(np.max(np.abs(want)))
        passed = err <= rtol * max(ref, 1.0)
        results.append({"instance": name, "max_abs_err": err, "passed": bool(passed)})

    for (h0, w0, h1, w1) in [(1, 1, 1, 1), (2, 2, 2, 2), (2, 3, 3, 2), (4, 4, 4, 4)]:
        for k in (1, 3):
            f0 = rng.standard_normal((h0, w0, k))
            f1 = rng.standard_normal((h1, w1, k))
            record(
                f"correlate {h0}x{w0}/{h1}x{w1} K={k}",
                correlate_all_pairs(FeatureMap(f0), FeatureMap(f1)),
                _oracle_correlate(f0, f1),
            )

    for (h, w, stride) in [(2, 2, 2), (3, 3, 2), (4, 4, 2), (4, 4, 3), (3, 2, 4)]:
        data = rng.standard_normal((h, w, 3))
        record(
            f"avg_pool {h}x{w} s={stride}",
            avg_pool(FeatureMap(data), stride).data,
            _oracle_avg_pool(data, stride),
        )

    for (h, w, radius) in [(2, 2, 0), (3, 3, 1), (4, 4, 2)]:
        f0 = rng.standard_normal((h, w, 3))
        f1 = rng.standard_normal((h, w, 3))
        pyr = build_pyramid(FeatureMap(f0), FeatureMap(f1), strides=(1, 2))
        flow = FlowField(
            rng.uniform(-1.5, 1.5, (h, w)),
            rng.uniform(-1.5, 1.5, (h, w)),
            np.ones((h, w), dtype=bool),
        )
        got = lookup(pyr, flow, radius).data
        want = np.concatenate(
            [
                _oracle_lookup(level, flow.u, flow.v, s, radius)
                for level, s in zip(pyr.levels, pyr.strides)
            ],
            axis=2,
        )
        record(f"lookup {h}x{w} r={radius}", got, want)

    return results
