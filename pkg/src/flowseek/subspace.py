"""Least-squares fitting of flow fields onto a motion-basis span.

The solver returns the minimum-norm solution of the stacked per-pixel system
(u rows then v rows, row-major pixel order) and is fully deterministic: the
system is assembled in a fixed order and factorized by a single SVD.  Columns
are equilibrated to unit norm before the decomposition so that the relative
singular-value cutoff ``TAU_RANK`` measures geometry rather than the wildly
different natural scales of translational and rotational bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import MotionBasisSet, check_dimensions
from .errors import DimensionError, EmptyProblemError, ParameterError
from .geometry import FlowField

# Relative singular-value cutoff for the effective rank (applied to the
# column-equilibrated system).
TAU_RANK = 1e-10


@dataclass
class BasisCoefficients:
    """Fit result: coefficient vector in basis order plus diagnostics."""

    values: np.ndarray
    effective_rank: int
    residual_rms: float

    @property
    def degenerate(self):
        """True when the fit had no usable directions at all."""
        return self.effective_rank == 0


def _stacked_system(flow: FlowField, basis_set: MotionBasisSet, weights):
    """Assemble (A, b, sqrt_w, mask) for the masked, weighted LS problem."""
    check_dimensions(basis_set, flow.height, flow.width)
    mask = flow.valid
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != mask.shape:
            raise DimensionError(
                f"weights shape {weights.shape} does not match flow {mask.shape}"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ParameterError("weights must be finite and nonnegative")
        mask = mask & (weights > 0)
    n_px = int(mask.sum())
    if n_px == 0:
        raise EmptyProblemError("no valid (positively weighted) pixels to fit")

    # (N, M) slices in row-major pixel order, stacked as [u rows; v rows].
    bu = basis_set.fields[:, :, :, 0][:, mask]
    bv = basis_set.fields[:, :, :, 1][:, mask]
    a = np.concatenate([bu, bv], axis=1).T
    b = np.concatenate([flow.u[mask], flow.v[mask]])
    if weights is None:
        sqrt_w = None
    else:
        sqrt_w = np.sqrt(np.concatenate([weights[mask], weights[mask]]))
    return a, b, sqrt_w, mask


def fit_coefficients(
    flow: FlowField, basis_set: MotionBasisSet, weights=None
) -> BasisCoefficients:
    """Minimum-norm least-squares coefficients of ``flow`` on the basis span.

    Only valid pixels (and, when given, positively weighted ones) enter the
    fit; weights default to the 0/1 validity mask.  ``residual_rms`` is the
    unweighted RMS endpoint residual over the fitted pixels.
    """
    a, b, sqrt_w, mask = _stacked_system(flow, basis_set, weights)
    aw = a if sqrt_w is None else a * sqrt_w[:, None]
    bw = b if sqrt_w is None else b * sqrt_w

    col_norms = np.linalg.norm(aw, axis=0)
    scale = np.where(col_norms == 0.0, 1.0, col_norms)
    u_svd, sigma, vt = np.linalg.svd(aw / scale, full_matrices=False)

    if sigma.size == 0 or sigma[0] == 0.0:
        rank = 0
        values = np.zeros(basis_set.count)
    else:
        keep = sigma > TAU_RANK * sigma[0]
        rank = int(keep.sum())
        projected = (u_svd[:, keep].T @ bw) / sigma[keep]
        values = (vt[keep].T @ projected) / scale

    n_px = int(mask.sum())
    residual = b - a @ values
    residual_rms = float(np.sqrt(np.sum(residual**2) / n_px))
    return BasisCoefficients(values=values, effective_rank=rank, residual_rms=residual_rms)


def reconstruct(basis_set: MotionBasisSet, coefficients) -> FlowField:
    """Linear combination of the basis fields; all pixels valid."""
    if isinstance(coefficients, BasisCoefficients):
        coefficients = coefficients.values
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (basis_set.count,):
        raise DimensionError(
            f"expected {basis_set.count} coefficients, got shape {coefficients.shape}"
        )
    uv = np.tensordot(coefficients, basis_set.fields, axes=(0, 0))
    return FlowField.from_uv(uv)


def subspace_residual(flow: FlowField, basis_set: MotionBasisSet, weights=None):
    """Residual of the span projection: ``flow - reconstruct(fit(flow))``.

    Returns ``(residual_field, rms)`` where the residual field keeps the
    input's validity mask and the RMS is taken over the fitted pixels.
    """
    coeffs = fit_coefficients(flow, basis_set, weights=weights)
    fitted = reconstruct(basis_set, coeffs)
    residual = FlowField(flow.u - fitted.u, flow.v - fitted.v, flow.valid.copy())
    return residual, coeffs.residual_rms
