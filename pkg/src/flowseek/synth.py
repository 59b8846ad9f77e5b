"""Deterministic synthetic rigid scenes: inverse depth, ground-truth flow,
and procedurally textured image pairs.

The second image is constructed by sampling the first at p + flow(p), so the
pair is photometrically consistent with the ground truth by construction;
occlusions are only approximated by the validity mask.  Every output is a
pure function of the scene spec (fixed seeds, no global state), so reruns
are bitwise identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import flow_io
from .correlation import FeatureMap
from .errors import ParameterError
from .flowops import bilinear_warp
from .geometry import (
    CameraIntrinsics,
    FlowField,
    InverseDepthMap,
    RigidMotion,
    VelocityMotion,
    instantaneous_flow,
    make_normalized_grid,
    reprojection_flow,
)

DEPTH_KINDS = ("fronto_plane", "tilted_plane", "sphere", "smooth_noise")

# Inverse-depth ceiling keeping the translational bases well-conditioned.
D_MAX = 100.0

_MIN_SIZE = 8


@dataclass
class SceneSpec:
    """Everything needed to generate one scene deterministically."""

    depth_kind: str
    depth_params: dict
    intrinsics: CameraIntrinsics
    motion: object  # RigidMotion or VelocityMotion
    texture_seed: int
    width: int
    height: int
    name: str = ""

    def __post_init__(self):
        if self.depth_kind not in DEPTH_KINDS:
            raise ParameterError(
                f"unknown depth kind {self.depth_kind!r}, expected one of {DEPTH_KINDS}"
            )
        if self.width < _MIN_SIZE or self.height < _MIN_SIZE:
            raise ParameterError(
                f"scene dimensions must be at least {_MIN_SIZE}x{_MIN_SIZE}, "
                f"got {self.width}x{self.height}"
            )
        if not isinstance(self.motion, (RigidMotion, VelocityMotion)):
            raise ParameterError("motion must be a RigidMotion or a VelocityMotion")


@dataclass
class GeneratedScene:
    """Output bundle of :func:`generate_scene`."""

    d0: InverseDepthMap
    flow: FlowField
    valid: np.ndarray
    image0: np.ndarray
    image1: np.ndarray


def value_noise(seed, height, width, octaves=2):
    """Band-limited value noise in [0, 1]: smoothstep-interpolated random
    lattices at doubling frequencies."""
    rng = np.random.default_rng(seed)
    acc = np.zeros((height, width))
    amplitude = 1.0
    cells = 4
    for _ in range(octaves):
        lattice = rng.random((cells + 1, cells + 1))
        ys = np.linspace(0.0, cells, height)
        xs = np.linspace(0.0, cells, width)
        y0 = np.minimum(ys.astype(np.int64), cells - 1)
        x0 = np.minimum(xs.astype(np.int64), cells - 1)
        ty = ys - y0
        tx = xs - x0
        ty = ty * ty * (3.0 - 2.0 * ty)
        tx = tx * tx * (3.0 - 2.0 * tx)
        ty = ty[:, None]
        tx = tx[None, :]
        v00 = lattice[y0[:, None], x0[None, :]]
        v01 = lattice[y0[:, None], x0[None, :] + 1]
        v10 = lattice[y0[:, None] + 1, x0[None, :]]
        v11 = lattice[y0[:, None] + 1, x0[None, :] + 1]
        acc += amplitude * (
            (1 - ty) * (1 - tx) * v00
            + (1 - ty) * tx * v01
            + ty * (1 - tx) * v10
            + ty * tx * v11
        )
        amplitude *= 0.5
        cells *= 2
    lo, hi = acc.min(), acc.max()
    if hi == lo:
        return np.full((height, width), 0.5)
    return (acc - lo) / (hi - lo)


def inverse_depth_surface(spec: SceneSpec) -> InverseDepthMap:
    """Analytic inverse-depth field for the spec's surface kind."""
    p = spec.depth_params
    h, w = spec.height, spec.width
    intr = spec.intrinsics
    grid = make_normalized_grid(intr, w, h)
    xn = grid.u_bar / intr.f_x
    yn = grid.v_bar / intr.f_y

    if spec.depth_kind == "fronto_plane":
        depth = float(p["depth"])
        if depth <= 0:
            raise ParameterError(f"plane depth must be positive, got {depth}")
        d0 = np.full((h, w), 1.0 / depth)
    elif spec.depth_kind == "tilted_plane":
        depth = float(p["depth"])
        if depth <= 0:
            raise ParameterError(f"plane depth must be positive, got {depth}")
        d0 = 1.0 / depth + float(p.get("slope_x", 0.0)) * xn + float(p.get("slope_y", 0.0)) * yn
    elif spec.depth_kind == "sphere":
        z0 = float(p["center_depth"])
        radius = float(p["radius"])
        background = float(p.get("background_depth", 2.0 * z0))
        if not (0 < radius < z0) or background <= 0:
            raise ParameterError(
                f"sphere needs 0 < radius < center_depth and positive background, "
                f"got radius={radius}, center_depth={z0}, background={background}"
            )
        # Nearest ray-sphere intersection along d = (xn, yn, 1)/|.|.
        norm2 = xn**2 + yn**2 + 1.0
        proj = z0 / np.sqrt(norm2)
        disc = proj**2 - (z0**2 - radius**2)
        hit = disc >= 0
        t = proj - np.sqrt(np.where(hit, disc, 0.0))
        depth_map = np.where(hit, t / np.sqrt(norm2), background)
        d0 = 1.0 / depth_map
    else:  # smooth_noise
        d_lo = float(p.get("d_min", 0.2))
        d_hi = float(p.get("d_max", 1.0))
        if not (0 < d_lo <= d_hi):
            raise ParameterError(f"need 0 < d_min <= d_max, got {d_lo}, {d_hi}")
        noise = value_noise([int(spec.texture_seed), 2], h, w)
        d0 = d_lo + (d_hi - d_lo) * noise

    if d0.min() <= 0 or d0.max() > D_MAX:
        raise ParameterError(
            f"inverse depth must stay in (0, {D_MAX}], got "
            f"[{float(d0.min())}, {float(d0.max())}]"
        )
    return InverseDepthMap(d0)


def generate_scene(spec: SceneSpec) -> GeneratedScene:
    """Inverse depth, ground-truth flow, validity, and the textured pair."""
    d0 = inverse_depth_surface(spec)
    if isinstance(spec.motion, VelocityMotion):
        flow = instantaneous_flow(d0, spec.intrinsics, spec.motion)
    else:
        flow = reprojection_flow(d0, spec.intrinsics, spec.motion)

    image0 = value_noise([int(spec.texture_seed), 0], spec.height, spec.width)
    warped, warp_valid = bilinear_warp(FeatureMap(image0[..., None]), flow)
    fill = value_noise([int(spec.texture_seed), 1], spec.height, spec.width)
    valid = flow.valid & warp_valid
    image1 = np.where(valid, warped.data[..., 0], fill)
    return GeneratedScene(d0=d0, flow=flow, valid=valid, image0=image0, image1=image1)


def _motion_to_json(motion):
    if isinstance(motion, VelocityMotion):
        return {
            "type": "velocity",
            "linear": motion.linear.tolist(),
            "angular": motion.angular.tolist(),
        }
    return {
        "type": "rigid",
        "rotation": motion.rotation.tolist(),
        "translation": motion.translation.tolist(),
    }


def motion_from_json(obj):
    """Inverse of the manifest/spec-file motion encoding."""
    kind = obj.get("type")
    if kind == "velocity":
        return VelocityMotion(np.asarray(obj["linear"]), np.asarray(obj["angular"]))
    if kind == "rigid":
        rotation = np.asarray(obj.get("rotation", obj.get("axis_angle")))
        return RigidMotion(rotation, np.asarray(obj.get("translation", [0.0, 0.0, 0.0])))
    raise ParameterError(f"unknown motion type {kind!r}")


def spec_from_json(obj, index=0):
    """Build a SceneSpec from its JSON form (see the synth CLI)."""
    intr = obj["intrinsics"]
    return SceneSpec(
        depth_kind=obj["depth_kind"],
        depth_params=dict(obj.get("depth_params", {})),
        intrinsics=CameraIntrinsics(
            float(intr["f_x"]), float(intr["f_y"]), float(intr["c_x"]), float(intr["c_y"])
        ),
        motion=motion_from_json(obj["motion"]),
        texture_seed=int(obj.get("texture_seed", 0)),
        width=int(obj["width"]),
        height=int(obj["height"]),
        name=str(obj.get("name", f"scene_{index:03d}")),
    )


def _spec_to_json(spec: SceneSpec):
    return {
        "name": spec.name,
        "depth_kind": spec.depth_kind,
        "depth_params": spec.depth_params,
        "intrinsics": {
            "f_x": spec.intrinsics.f_x,
            "f_y": spec.intrinsics.f_y,
            "c_x": spec.intrinsics.c_x,
            "c_y": spec.intrinsics.c_y,
        },
        "motion": _motion_to_json(spec.motion),
        "texture_seed": int(spec.texture_seed),
        "width": spec.width,
        "height": spec.height,
    }


def _emit_scene(spec: SceneSpec, out_dir, name):
    scene = generate_scene(spec)
    files = {
        "image0": f"{name}_img0.png",
        "image1": f"{name}_img1.png",
        "flow_flo": f"{name}_flow.flo",
        "flow_png": f"{name}_flow.png",
        "inverse_depth": f"{name}_invdepth.png",
    }
    flow_io.write_gray_png(out_dir / files["image0"], scene.image0)
    flow_io.write_gray_png(out_dir / files["image1"], scene.image1)
    flow_io.write_flo(out_dir / files["flow_flo"], scene.flow)
    flow_io.write_kitti_png(out_dir / files["flow_png"], scene.flow, scene.valid)
    flow_io.write_inverse_depth_png(out_dir / files["inverse_depth"], scene.d0.d0)
    return files


def emit_dataset(specs, out_dir, threads=1):
    """Write every scene's five artifacts plus a manifest.json.

    Scenes are independent, so they may be generated in parallel; the
    manifest is assembled in spec order and every artifact is a pure
    function of its spec, keeping the output bytes independent of
    ``threads``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = list(specs)
    names = [spec.name or f"scene_{k:03d}" for k, spec in enumerate(specs)]

    if threads > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_files = list(pool.map(lambda sn: _emit_scene(sn[0], out_dir, sn[1]), zip(specs, names)))
    else:
        all_files = [_emit_scene(spec, out_dir, name) for spec, name in zip(specs, names)]

    manifest = {
        "inverse_depth_scale": flow_io.INVERSE_DEPTH_SCALE,
        "scenes": [
            {"name": name, "files": files, "spec": _spec_to_json(spec)}
            for name, files, spec in zip(names, all_files, specs)
        ],
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def standard_suite():
    """The fixed 10-scene 64x64 evaluation suite (max flow <= 2 px).

    Seven velocity-motion scenes whose ground truth lies exactly in the
    basis span plus three finite rigid motions, over all four surface kinds.
    """
    intr = CameraIntrinsics(f_x=100.0, f_y=100.0, c_x=31.5, c_y=31.5)
    size = dict(width=64, height=64, intrinsics=intr)

    def vel(linear, angular):
        return VelocityMotion(np.asarray(linear), np.asarray(angular))

    specs = [
        SceneSpec("fronto_plane", {"depth": 2.0}, motion=vel([0.02, 0.0, 0.0], [0, 0, 0]),
                  texture_seed=101, name="plane_tx", **size),
        SceneSpec("fronto_plane", {"depth": 1.5}, motion=vel([0.0, -0.015, 0.0], [0, 0, 0]),
                  texture_seed=102, name="plane_ty", **size),
        SceneSpec("tilted_plane", {"depth": 2.0, "slope_x": 0.3, "slope_y": -0.2},
                  motion=vel([0.0, 0.0, 0.04], [0, 0, 0]),
                  texture_seed=103, name="tilted_tz", **size),
        SceneSpec("tilted_plane", {"depth": 2.5, "slope_x": -0.2, "slope_y": 0.25},
                  motion=vel([0.01, 0.01, 0.0], [0.0, 0.0, 0.003]),
                  texture_seed=104, name="tilted_txyrz", **size),
        SceneSpec("sphere", {"center_depth": 3.0, "radius": 1.5, "background_depth": 6.0},
                  motion=vel([0.0, 0.0, 0.0], [0.01, 0.0, 0.0]),
                  texture_seed=105, name="sphere_rx", **size),
        SceneSpec("sphere", {"center_depth": 2.5, "radius": 1.2, "background_depth": 5.0},
                  motion=vel([0.012, 0.0, 0.012], [0.0, 0.005, 0.0]),
                  texture_seed=106, name="sphere_mixed", **size),
        SceneSpec("smooth_noise", {"d_min": 0.3, "d_max": 0.8},
                  motion=vel([-0.02, 0.01, 0.0], [0.0, 0.0, -0.004]),
                  texture_seed=107, name="noise_txyrz", **size),
        SceneSpec("fronto_plane", {"depth": 2.0},
                  motion=RigidMotion(np.eye(3), np.array([0.03, 0.0, 0.0])),
                  texture_seed=108, name="plane_rigid_tx", **size),
        SceneSpec("smooth_noise", {"d_min": 0.4, "d_max": 1.0},
                  motion=RigidMotion(np.array([0.0, 0.0, 0.008]), np.array([0.0, 0.015, 0.0])),
                  texture_seed=109, name="noise_rigid", **size),
        SceneSpec("sphere", {"center_depth": 3.0, "radius": 1.0, "background_depth": 5.0},
                  motion=RigidMotion(np.array([0.006, -0.006, 0.0]), np.array([0.0, 0.0, 0.05])),
                  texture_seed=110, name="sphere_rigid", **size),
    ]
    return specs
