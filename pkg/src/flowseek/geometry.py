"""Pinhole camera model, rigid motions, and two independent dense rigid-flow oracles.

Conventions used throughout the package:

* images are indexed ``(i, j)`` = (row, column); flow ``u`` is the horizontal
  (column) displacement and ``v`` the vertical (row) displacement, both in
  full-resolution pixels;
* normalized pixel grids are plain offsets from the principal point,
  ``u_bar = j - c_x`` and ``v_bar = i - c_y`` (focal lengths are kept
  explicit wherever they matter);
* a ``RigidMotion`` maps scene points expressed in the camera frame of the
  first image to the camera frame of the second: ``P' = R @ P + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

# Transformed points with depth <= EPS_BEHIND_CAMERA scene units are marked
# invalid instead of being projected (avoids projective blow-up near Z=0).
EPS_BEHIND_CAMERA = 1e-6

_ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters, all in pixels."""

    f_x: float
    f_y: float
    c_x: float
    c_y: float

    def __post_init__(self):
        values = (self.f_x, self.f_y, self.c_x, self.c_y)
        if not all(np.isfinite(values)):
            raise ParameterError(f"intrinsics must be finite, got {values}")
        if self.f_x <= 0 or self.f_y <= 0:
            raise ParameterError(
                f"focal lengths must be positive, got f_x={self.f_x}, f_y={self.f_y}"
            )


@dataclass
class NormalizedGrid:
    """Per-pixel offsets from the principal point."""

    u_bar: np.ndarray
    v_bar: np.ndarray
    width: int
    height: int


@dataclass
class InverseDepthMap:
    """Per-pixel inverse depth; 0 encodes a point at infinity."""

    d0: np.ndarray

    def __post_init__(self):
        self.d0 = np.asarray(self.d0, dtype=np.float64)
        if self.d0.ndim != 2:
            raise DimensionError(f"inverse depth must be 2D, got shape {self.d0.shape}")
        if not np.all(np.isfinite(self.d0)):
            raise ParameterError("inverse depth must be finite")
        if np.any(self.d0 < 0):
            raise ParameterError("inverse depth must be nonnegative")

    @property
    def height(self):
        return self.d0.shape[0]

    @property
    def width(self):
        return self.d0.shape[1]


@dataclass
class VelocityMotion:
    """Six-degree-of-freedom motion coefficients (t_x, t_y, t_z, r_x, r_y, r_z)."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.float64).reshape(3)
        self.angular = np.asarray(self.angular, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(self.linear)) and np.all(np.isfinite(self.angular))):
            raise ParameterError("velocity components must be finite")

    def coefficients(self):
        """The 6-vector matching the six-basis ordering."""
        return np.concatenate([self.linear, self.angular])


def _skew(w):
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def rotation_from_axis_angle(axis_angle):
    """Rodrigues formula; the vector's norm is the rotation angle in radians."""
    w = np.asarray(axis_angle, dtype=np.float64).reshape(3)
    theta = float(np.linalg.norm(w))
    k = _skew(w)
    if theta < 1e-8:
        # Second-order series; orthonormal to ~theta^3.
        return np.eye(3) + k + 0.5 * (k @ k)
    return np.eye(3) + (np.sin(theta) / theta) * k + ((1.0 - np.cos(theta)) / theta**2) * (k @ k)


@dataclass
class RigidMotion:
    """Scene-space rigid transform ``P' = rotation @ P + translation``.

    ``rotation`` may be given as a 3x3 matrix or as an axis-angle 3-vector,
    which is converted on construction.
    """

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape == (3,):
            rot = rotation_from_axis_angle(rot)
        if rot.shape != (3, 3):
            raise DimensionError(f"rotation must be 3x3 or an axis-angle 3-vector, got {rot.shape}")
        if not np.all(np.isfinite(rot)):
            raise ParameterError("rotation must be finite")
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > _ORTHONORMAL_TOL:
            raise ParameterError("rotation is not orthonormal within 1e-10")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHONORMAL_TOL:
            raise ParameterError("rotation determinant must be +1 within 1e-10")
        self.rotation = rot
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.translation)):
            raise ParameterError("translation must be finite")

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_velocity(cls, vel: VelocityMotion, scale: float = 1.0):
        """Finite motion whose first-order flow is ``scale * instantaneous_flow(vel)``.

        The angular coefficients (r_x, r_y, r_z) of the basis parametrization
        correspond to the scene-space rotation generator (-r_x, r_y, -r_z);
        the sign mapping is fixed by differentiating the pinhole projection
        under ``P' = R @ P + t``.
        """
        omega = np.array([-vel.angular[0], vel.angular[1], -vel.angular[2]])
        return cls(rotation_from_axis_angle(scale * omega), scale * vel.linear)


@dataclass
class FlowField:
    """Dense displacement field in full-resolution pixels with a validity mask."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.u.ndim != 2 or self.u.shape != self.v.shape or self.u.shape != self.valid.shape:
            raise DimensionError(
                f"flow components and mask must share a 2D shape, got "
                f"{self.u.shape}, {self.v.shape}, {self.valid.shape}"
            )
        if not (np.all(np.isfinite(self.u[self.valid])) and np.all(np.isfinite(self.v[self.valid]))):
            raise ParameterError("flow must be finite wherever valid")

    @property
    def height(self):
        return self.u.shape[0]

    @property
    def width(self):
        return self.u.shape[1]

    def uv(self):
        """Stacked (H, W, 2) view of the components, last axis (u, v)."""
        return np.stack([self.u, self.v], axis=-1)

    @classmethod
    def from_uv(cls, uv, valid=None):
        uv = np.asarray(uv, dtype=np.float64)
        if valid is None:
            valid = np.ones(uv.shape[:2], dtype=bool)
        return cls(uv[..., 0], uv[..., 1], valid)

    @classmethod
    def zeros(cls, height, width):
        return cls(
            np.zeros((height, width)),
            np.zeros((height, width)),
            np.ones((height, width), dtype=bool),
        )


def make_normalized_grid(intr: CameraIntrinsics, width: int, height: int) -> NormalizedGrid:
    """Pixel-offset grids u_bar(i,j) = j - c_x, v_bar(i,j) = i - c_y."""
    if width < 1 or height < 1:
        raise DimensionError(f"grid dimensions must be >= 1, got {width}x{height}")
    cols = np.arange(width, dtype=np.float64) - intr.c_x
    rows = np.arange(height, dtype=np.float64) - intr.c_y
    u_bar = np.broadcast_to(cols[None, :], (height, width)).copy()
    v_bar = np.broadcast_to(rows[:, None], (height, width)).copy()
    return NormalizedGrid(u_bar=u_bar, v_bar=v_bar, width=width, height=height)


def reprojection_flow(
    d0: InverseDepthMap, intr: CameraIntrinsics, motion: RigidMotion
) -> FlowField:
    """Discrete two-frame flow: back-project, apply the motion, reproject.

    Each pixel with d0 > 0 is lifted to depth 1/d0, moved by ``motion`` and
    projected back; its flow is the reprojected position minus the original
    one.  Pixels with d0 = 0 are points at infinity and receive pure-rotation
    flow.  Pixels whose transformed depth falls at or below
    ``EPS_BEHIND_CAMERA`` are marked invalid (flow set to 0 there).
    """
    h, w = d0.height, d0.width
    grid = make_normalized_grid(intr, w, h)

    # Ray through each pixel at unit depth; for d0 > 0 the 3D point is
    # (1/d0) * ray, so the transformed point is (1/d0) * q with
    # q = R @ ray + d0 * t.  Projection only needs the direction q, which
    # stays finite for d0 = 0 (pure rotation of the ray at infinity).
    ray = np.stack(
        [grid.u_bar / intr.f_x, grid.v_bar / intr.f_y, np.ones((h, w))], axis=-1
    )
    q = ray @ motion.rotation.T + d0.d0[..., None] * motion.translation

    # Transformed depth is q_z / d0; "depth <= eps" becomes q_z <= eps * d0,
    # which for d0 = 0 correctly reduces to q_z <= 0.
    valid = q[..., 2] > EPS_BEHIND_CAMERA * d0.d0

    qz = np.where(valid, q[..., 2], 1.0)
    u_new = intr.f_x * q[..., 0] / qz + intr.c_x
    v_new = intr.f_y * q[..., 1] / qz + intr.c_y
    cols = np.arange(w, dtype=np.float64)[None, :]
    rows = np.arange(h, dtype=np.float64)[:, None]
    flow_u = np.where(valid, u_new - cols, 0.0)
    flow_v = np.where(valid, v_new - rows, 0.0)
    return FlowField(flow_u, flow_v, valid)


def instantaneous_flow(
    d0: InverseDepthMap, intr: CameraIntrinsics, vel: VelocityMotion
) -> FlowField:
    """First-order motion field, defined as the six-basis linear combination.

    By construction this field lies exactly in the span of the six-basis set
    built from the same inverse depth and intrinsics; physical validation is
    delegated to the agreement with :func:`reprojection_flow` at small motion
    scales.
    """
    from .bases import build_six_bases

    basis_set = build_six_bases(d0, intr)
    uv = np.tensordot(vel.coefficients(), basis_set.fields, axes=(0, 0))
    return FlowField.from_uv(uv)
