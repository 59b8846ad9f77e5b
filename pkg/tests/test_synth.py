import json

import numpy as np
import pytest

from flowseek.errors import ParameterError
from flowseek.flow_io import read_flo, read_inverse_depth_png, read_kitti_png
from flowseek.geometry import CameraIntrinsics, RigidMotion, VelocityMotion
from flowseek.subspace import fit_coefficients
from flowseek.bases import build_six_bases
from flowseek.synth import (
    SceneSpec,
    emit_dataset,
    generate_scene,
    spec_from_json,
    standard_suite,
    value_noise,
)

from conftest import bilinear_sample_scalar, scalar_reprojection_oracle

INTR = CameraIntrinsics(100.0, 100.0, 15.5, 15.5)


def _spec(**kwargs):
    base = dict(
        depth_kind="fronto_plane",
        depth_params={"depth": 2.0},
        intrinsics=INTR,
        motion=VelocityMotion([0.02, 0.0, 0.0], [0.0, 0.0, 0.0]),
        texture_seed=42,
        width=32,
        height=32,
    )
    base.update(kwargs)
    return SceneSpec(**base)


class TestGenerateScene:
    def test_zero_velocity_identity_pair(self):
        scene = generate_scene(_spec(motion=VelocityMotion([0, 0, 0], [0, 0, 0])))
        assert np.array_equal(scene.flow.u, np.zeros((32, 32)))
        assert scene.valid.all()
        assert np.array_equal(scene.image1, scene.image0)

    def test_identity_rigid_motion_near_identity_pair(self):
        scene = generate_scene(_spec(motion=RigidMotion.identity()))
        np.testing.assert_allclose(scene.flow.uv(), 0.0, atol=1e-12)
        np.testing.assert_allclose(scene.image1, scene.image0, atol=1e-9)

    def test_bitwise_determinism(self):
        a = generate_scene(_spec())
        b = generate_scene(_spec())
        assert np.array_equal(a.image0, b.image0)
        assert np.array_equal(a.image1, b.image1)
        assert np.array_equal(a.flow.u, b.flow.u)
        assert np.array_equal(a.d0.d0, b.d0.d0)

    def test_pure_tz_flow_is_radial_contraction(self):
        """Forward scene translation on a fronto-parallel plane yields flow
        antiparallel to the principal-point offset, matching the
        per-pixel projection oracle."""
        motion = RigidMotion(np.eye(3), np.array([0.0, 0.0, 0.2]))
        scene = generate_scene(_spec(motion=motion, depth_params={"depth": 2.0}))
        ub = np.arange(32)[None, :] - INTR.c_x
        vb = (np.arange(32)[:, None] - INTR.c_y) * np.ones((1, 32))
        dot = scene.flow.u * ub + scene.flow.v * vb
        cross = scene.flow.u * vb - scene.flow.v * ub
        assert np.all(dot <= 1e-12)
        np.testing.assert_allclose(cross, 0.0, atol=1e-9)
        ou, ov, ovalid = scalar_reprojection_oracle(
            scene.d0.d0, INTR, motion.rotation, motion.translation
        )
        assert np.array_equal(scene.flow.valid, ovalid)
        np.testing.assert_allclose(scene.flow.u, ou, atol=1e-9)
        np.testing.assert_allclose(scene.flow.v, ov, atol=1e-9)

    def test_photometric_consistency(self):
        """image1(p) matches image0 sampled at p + gt(p) on valid pixels."""
        scene = generate_scene(_spec(depth_kind="smooth_noise",
                                     depth_params={"d_min": 0.3, "d_max": 0.9},
                                     motion=VelocityMotion([0.03, -0.02, 0.0], [0, 0, 0.004])))
        errs = []
        for i in range(32):
            for j in range(32):
                if scene.valid[i, j]:
                    sample = bilinear_sample_scalar(
                        scene.image0, i + scene.flow.v[i, j], j + scene.flow.u[i, j]
                    )
                    errs.append(abs(scene.image1[i, j] - sample))
        assert np.mean(errs) < 1e-3

    def test_velocity_scene_recovers_generating_velocity(self, rng):
        for kind, params in [
            ("tilted_plane", {"depth": 2.0, "slope_x": 0.2, "slope_y": -0.1}),
            ("sphere", {"center_depth": 3.0, "radius": 1.0, "background_depth": 6.0}),
        ]:
            vel = VelocityMotion(rng.uniform(-0.05, 0.05, 3), rng.uniform(-0.01, 0.01, 3))
            scene = generate_scene(_spec(depth_kind=kind, depth_params=params, motion=vel))
            bs = build_six_bases(scene.d0, INTR)
            coeffs = fit_coefficients(scene.flow, bs)
            np.testing.assert_allclose(coeffs.values, vel.coefficients(), atol=1e-8)

    def test_depth_kinds_cover_range(self):
        for kind, params in [
            ("fronto_plane", {"depth": 2.0}),
            ("tilted_plane", {"depth": 2.0, "slope_x": 0.2, "slope_y": 0.1}),
            ("sphere", {"center_depth": 3.0, "radius": 1.5, "background_depth": 6.0}),
            ("smooth_noise", {"d_min": 0.2, "d_max": 1.0}),
        ]:
            scene = generate_scene(_spec(depth_kind=kind, depth_params=params))
            assert scene.d0.d0.min() > 0
            assert scene.d0.d0.max() <= 100.0

    def test_degenerate_depth_rejected(self):
        with pytest.raises(ParameterError):
            generate_scene(_spec(depth_params={"depth": -1.0}))
        with pytest.raises(ParameterError):
            generate_scene(_spec(depth_kind="tilted_plane",
                                 depth_params={"depth": 2.0, "slope_x": 5.0}))

    def test_bad_kind_and_size_rejected(self):
        with pytest.raises(ParameterError):
            _spec(depth_kind="cube")
        with pytest.raises(ParameterError):
            _spec(width=4, height=4)


class TestValueNoise:
    def test_amplitude_range_and_determinism(self):
        a = value_noise(9, 24, 24)
        b = value_noise(9, 24, 24)
        assert np.array_equal(a, b)
        assert a.min() >= 0.0 and a.max() <= 1.0
        assert a.std() > 0.05  # actual texture, not a constant


class TestEmitDataset:
    def test_empty_spec_list(self, tmp_path):
        manifest = emit_dataset([], tmp_path)
        assert manifest["scenes"] == []
        assert json.loads((tmp_path / "manifest.json").read_text())["scenes"] == []

    def test_three_scenes_write_all_files(self, tmp_path):
        specs = standard_suite()[:3]
        manifest = emit_dataset(specs, tmp_path)
        assert len(manifest["scenes"]) == 3
        files = [p.name for p in tmp_path.iterdir()]
        assert len(files) == 3 * 5 + 1
        for entry in manifest["scenes"]:
            for rel in entry["files"].values():
                assert (tmp_path / rel).exists()

    def test_flo_round_trip_matches_generated_flow(self, tmp_path):
        spec = standard_suite()[0]
        emit_dataset([spec], tmp_path)
        scene = generate_scene(spec)
        entry = json.loads((tmp_path / "manifest.json").read_text())["scenes"][0]
        back = read_flo(tmp_path / entry["files"]["flow_flo"])
        assert np.array_equal(back.u, scene.flow.u.astype(np.float32).astype(np.float64))
        kitti = read_kitti_png(tmp_path / entry["files"]["flow_png"])
        assert np.array_equal(kitti.valid, scene.valid)
        d0 = read_inverse_depth_png(tmp_path / entry["files"]["inverse_depth"])
        assert np.abs(d0 - scene.d0.d0).max() <= 0.5 / 256.0

    def test_rerun_bit_identical(self, tmp_path):
        specs = standard_suite()[:2]
        emit_dataset(specs, tmp_path / "a")
        emit_dataset(specs, tmp_path / "b")
        for p in sorted((tmp_path / "a").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        specs = standard_suite()[:4]
        emit_dataset(specs, tmp_path / "t1", threads=1)
        emit_dataset(specs, tmp_path / "t4", threads=4)
        for p in sorted((tmp_path / "t1").iterdir()):
            assert p.read_bytes() == (tmp_path / "t4" / p.name).read_bytes()

    def test_spec_json_round_trip(self):
        for spec in standard_suite():
            from flowseek.synth import _spec_to_json

            clone = spec_from_json(_spec_to_json(spec))
            scene_a = generate_scene(spec)
            scene_b = generate_scene(clone)
            assert np.array_equal(scene_a.flow.u, scene_b.flow.u)
            assert np.array_equal(scene_a.image0, scene_b.image0)


class TestStandardSuite:
    def test_ten_scenes_under_two_pixels(self):
        specs = standard_suite()
        assert len(specs) == 10
        for spec in specs:
            scene = generate_scene(spec)
            assert spec.width == 64 and spec.height == 64
            mags = np.hypot(scene.flow.u, scene.flow.v)[scene.flow.valid]
            assert mags.max() <= 2.0
