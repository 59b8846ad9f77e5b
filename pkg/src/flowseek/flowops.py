"""Convex upsampling, bilinear warping, and flow evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import FeatureMap
from .errors import DimensionError, EmptyProblemError, ParameterError
from .geometry import FlowField

DEFAULT_UPSAMPLE_FACTOR = 8

# Row-major 3x3 neighborhood offsets matching the 9 convex weights.
_NEIGHBOR_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


@dataclass
class ConvexWeights:
    """Per-fine-pixel logits over the 3x3 coarse neighborhood, (Hf, Wf, 9)."""

    logits: np.ndarray
    factor: int = DEFAULT_UPSAMPLE_FACTOR

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 3 or self.logits.shape[2] != 9:
            raise DimensionError(f"logits must be (H, W, 9), got {self.logits.shape}")
        if not np.all(np.isfinite(self.logits)):
            raise ParameterError("logits must be finite")
        if self.factor < 1:
            raise ParameterError(f"factor must be >= 1, got {self.factor}")


@dataclass(frozen=True)
class FlowMetrics:
    """Endpoint error, pixel-threshold outlier rates, and the combined
    absolute/relative outlier percentage."""

    epe: float
    npx: dict
    fl_all: float
    fl_mode: str


def softmax_weights(logits):
    """Row-wise softmax over the last axis; exact convex weights."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def convex_upsample(coarse: FlowField, weights: ConvexWeights) -> FlowField:
    """Upsample a coarse flow by factor m as per-pixel convex combinations.

    The coarse field is in coarse-pixel units; each fine pixel is m times a
    softmax-weighted combination of its 3x3 coarse neighborhood
    (clamp-to-edge at the borders).  A fine pixel is valid when all
    contributing coarse neighbors are.
    """
    m = weights.factor
    hf, wf = weights.logits.shape[:2]
    if hf != m * coarse.height or wf != m * coarse.width:
        raise DimensionError(
            f"weights are {hf}x{wf}, expected {m * coarse.height}x{m * coarse.width} "
            f"for factor {m}"
        )
    hc, wc = coarse.height, coarse.width
    uv = coarse.uv()

    # (Hc, Wc, 9, 2) stack of clamped neighbors and (Hc, Wc, 9) validity.
    rows = np.arange(hc)
    cols = np.arange(wc)
    nbr = np.empty((hc, wc, 9, 2))
    nbr_valid = np.empty((hc, wc, 9), dtype=bool)
    for n, (dy, dx) in enumerate(_NEIGHBOR_OFFSETS):
        r = np.clip(rows + dy, 0, hc - 1)
        c = np.clip(cols + dx, 0, wc - 1)
        nbr[:, :, n, :] = uv[r[:, None], c[None, :]]
        nbr_valid[:, :, n] = coarse.valid[r[:, None], c[None, :]]

    w = softmax_weights(weights.logits)
    nbr_fine = np.repeat(np.repeat(nbr, m, axis=0), m, axis=1)
    fine_uv = m * np.einsum("hwn,hwnc->hwc", w, nbr_fine)
    fine_valid = np.repeat(np.repeat(nbr_valid.all(axis=2), m, axis=0), m, axis=1)
    return FlowField(fine_uv[..., 0], fine_uv[..., 1], fine_valid)


def bilinear_warp(img: FeatureMap, flow: FlowField):
    """Sample ``img`` at p + flow(p) per pixel: ``(warped, valid)``.

    Positions outside [0, W-1] x [0, H-1] are marked invalid and filled
    with 0.
    """
    if (flow.height, flow.width) != (img.height, img.width):
        raise DimensionError(
            f"flow is {flow.height}x{flow.width}, image is {img.height}x{img.width}"
        )
    h, w = img.height, img.width
    x = np.arange(w, dtype=np.float64)[None, :] + flow.u
    y = np.arange(h, dtype=np.float64)[:, None] + flow.v
    valid = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1) & flow.valid

    xs = np.where(valid, x, 0.0)
    ys = np.where(valid, y, 0.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (xs - x0)[..., None]
    wy = (ys - y0)[..., None]

    d = img.data
    warped = (
        (1 - wy) * (1 - wx) * d[y0, x0]
        + (1 - wy) * wx * d[y0, x1]
        + wy * (1 - wx) * d[y1, x0]
        + wy * wx * d[y1, x1]
    )
    warped[~valid] = 0.0
    return FeatureMap(warped), valid


def compute_metrics(est: FlowField, gt: FlowField, valid=None, fl_mode="and") -> FlowMetrics:
    """EPE, 1/3/5px outlier rates, and the combined outlier percentage.

    ``fl_mode='and'`` counts a pixel as an outlier when its error exceeds
    3 px AND 5% of the ground-truth magnitude (benchmark-devkit semantics);
    ``fl_mode='or'`` uses the OR reading.  Rates are percentages in [0, 100].
    """
    if fl_mode not in ("and", "or"):
        raise ParameterError(f"fl_mode must be 'and' or 'or', got {fl_mode!r}")
    if (est.height, est.width) != (gt.height, gt.width):
        raise DimensionError(
            f"estimate is {est.height}x{est.width}, ground truth is {gt.height}x{gt.width}"
        )
    if valid is None:
        mask = est.valid & gt.valid
    else:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != (gt.height, gt.width):
            raise DimensionError(f"mask shape {valid.shape} does not match flow")
        mask = valid
    if not mask.any():
        raise EmptyProblemError("no valid pixels to evaluate")

    err = np.hypot(est.u - gt.u, est.v - gt.v)[mask]
    gt_mag = np.hypot(gt.u, gt.v)[mask]
    npx = {tau: float(100.0 * np.mean(err > tau)) for tau in (1, 3, 5)}
    # err > 0.05 * |gt| avoids the 0/0 division; at |gt| = 0 any positive
    # error counts as a relative outlier.
    absolute = err > 3.0
    relative = err > 0.05 * gt_mag
    outlier = (absolute & relative) if fl_mode == "and" else (absolute | relative)
    return FlowMetrics(
        epe=float(err.mean()),
        npx=npx,
        fl_all=float(100.0 * np.mean(outlier)),
        fl_mode=fl_mode,
    )
