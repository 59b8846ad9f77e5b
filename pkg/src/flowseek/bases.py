"""Dense motion-basis fields spanning the flows of a rigid scene.

Two sets are provided: the six-basis set, which needs camera intrinsics, and
the focal-free eight-basis set obtained by assuming f_x = f_y and absorbing
the focal factors into the coefficients.  Each basis is a 2-channel field
shaped like a flow field; the stack ordering is fixed so coefficient vectors
are comparable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .geometry import CameraIntrinsics, InverseDepthMap, make_normalized_grid

SIX_BASIS_NAMES = ("trans_x", "trans_y", "trans_z", "rot_x", "rot_y", "rot_z")
EIGHT_BASIS_NAMES = (
    "trans_x",
    "trans_y",
    "trans_z",
    "rot_x_const",
    "rot_x_quad",
    "rot_y_const",
    "rot_y_quad",
    "rot_z",
)

# Marker stored in `intrinsics_used` for the focal-free eight-basis set.
FOCAL_FREE = "focal-free"


@dataclass
class MotionBasisSet:
    """Ordered stack of N basis fields, shape (N, H, W, 2), last axis (u, v)."""

    fields: np.ndarray
    names: tuple
    intrinsics_used: object  # CameraIntrinsics or the FOCAL_FREE marker
    degenerate: tuple = ()  # indices of zero-norm fields found by normalize_bases

    @property
    def count(self):
        return self.fields.shape[0]

    @property
    def height(self):
        return self.fields.shape[1]

    @property
    def width(self):
        return self.fields.shape[2]


def build_six_bases(d0: InverseDepthMap, intr: CameraIntrinsics) -> MotionBasisSet:
    """Six basis fields (trans_x, trans_y, trans_z, rot_x, rot_y, rot_z).

    The three translational fields scale with the inverse depth; the three
    rotational ones depend only on the grid and the focal lengths:

    * trans_x = (f_x d0, 0),  trans_y = (0, f_y d0),  trans_z = (-ub d0, -vb d0)
    * rot_x = (ub vb / f_y, f_y + vb^2 / f_y)
    * rot_y = (f_x + ub^2 / f_x, ub vb / f_x)
    * rot_z = (f_x vb / f_y, -f_y ub / f_x)
    """
    h, w = d0.height, d0.width
    grid = make_normalized_grid(intr, w, h)
    ub, vb = grid.u_bar, grid.v_bar
    z = np.zeros((h, w))
    fx, fy = intr.f_x, intr.f_y

    fields = np.stack(
        [
            np.stack([fx * d0.d0, z], axis=-1),
            np.stack([z, fy * d0.d0], axis=-1),
            np.stack([-ub * d0.d0, -vb * d0.d0], axis=-1),
            np.stack([ub * vb / fy, fy + vb**2 / fy], axis=-1),
            np.stack([fx + ub**2 / fx, ub * vb / fx], axis=-1),
            np.stack([fx * vb / fy, -fy * ub / fx], axis=-1),
        ]
    )
    return MotionBasisSet(fields=fields, names=SIX_BASIS_NAMES, intrinsics_used=intr)


def build_eight_bases(d0: InverseDepthMap, c_x: float, c_y: float) -> MotionBasisSet:
    """Focal-free eight-basis set; no entry depends on any focal length.

    The rotational x/y bases are split into a constant and a quadratic
    sub-basis, and the focal factors are dropped everywhere (they are
    recovered by the coefficients):

    * trans_x = (d0, 0),  trans_y = (0, d0),  trans_z = (-ub d0, -vb d0)
    * rot_x_const = (0, 1),  rot_x_quad = (ub vb, vb^2)
    * rot_y_const = (1, 0),  rot_y_quad = (ub^2, ub vb)
    * rot_z = (vb, -ub)
    """
    h, w = d0.height, d0.width
    # Unit focals: only the principal point matters for the grids.
    grid = make_normalized_grid(CameraIntrinsics(1.0, 1.0, c_x, c_y), w, h)
    ub, vb = grid.u_bar, grid.v_bar
    z = np.zeros((h, w))
    one = np.ones((h, w))

    fields = np.stack(
        [
            np.stack([d0.d0, z], axis=-1),
            np.stack([z, d0.d0], axis=-1),
            np.stack([-ub * d0.d0, -vb * d0.d0], axis=-1),
            np.stack([z, one], axis=-1),
            np.stack([ub * vb, vb**2], axis=-1),
            np.stack([one, z], axis=-1),
            np.stack([ub**2, ub * vb], axis=-1),
            np.stack([vb, -ub], axis=-1),
        ]
    )
    return MotionBasisSet(fields=fields, names=EIGHT_BASIS_NAMES, intrinsics_used=FOCAL_FREE)


def normalize_bases(basis_set: MotionBasisSet) -> MotionBasisSet:
    """Scale each basis field to unit Frobenius norm; the span is unchanged.

    Zero-norm fields (e.g. translational bases of an all-zero inverse depth)
    are returned unscaled and their indices reported in ``degenerate``.
    """
    norms = np.sqrt(np.sum(basis_set.fields**2, axis=(1, 2, 3)))
    degenerate = tuple(int(k) for k in np.flatnonzero(norms == 0.0))
    safe = np.where(norms == 0.0, 1.0, norms)
    fields = basis_set.fields / safe[:, None, None, None]
    return MotionBasisSet(
        fields=fields,
        names=basis_set.names,
        intrinsics_used=basis_set.intrinsics_used,
        degenerate=degenerate,
    )


def check_dimensions(basis_set: MotionBasisSet, height: int, width: int):
    """Raise if the basis stack does not match the given field dimensions."""
    if basis_set.height != height or basis_set.width != width:
        raise DimensionError(
            f"basis set is {basis_set.height}x{basis_set.width}, "
            f"expected {height}x{width}"
        )
