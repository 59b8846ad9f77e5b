import numpy as np
import pytest

from flowseek.errors import DimensionError, ParameterError
from flowseek.estimator import (
    EstimatorConfig,
    estimate_rigid_flow,
    make_feature_map,
)
from flowseek.flowops import compute_metrics
from flowseek.geometry import CameraIntrinsics, FlowField, InverseDepthMap, VelocityMotion
from flowseek.subspace import reconstruct
from flowseek.bases import build_eight_bases, build_six_bases
from flowseek.synth import generate_scene, standard_suite


def _monotone(trace):
    return all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def _baseline_epe(scene):
    zero = FlowField.zeros(scene.flow.height, scene.flow.width)
    return compute_metrics(zero, scene.flow, valid=scene.valid).epe


class TestZeroMotion:
    def test_identical_images_keep_zero_coefficients(self):
        scene = generate_scene(standard_suite()[0])
        result = estimate_rigid_flow(scene.image0, scene.image0, scene.d0)
        assert np.array_equal(result.coefficients.values, np.zeros(8))
        assert np.array_equal(result.flow.u, np.zeros((64, 64)))
        assert _monotone(result.cost_trace)


class TestConvergenceOnSyntheticScenes:
    @pytest.mark.parametrize("index", [0, 3, 6])
    def test_small_motion_scene_converges(self, index):
        scene = generate_scene(standard_suite()[index])
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        epe = compute_metrics(result.flow, scene.flow, valid=scene.valid).epe
        assert epe < 0.5
        assert epe < 0.1 * _baseline_epe(scene)
        assert _monotone(result.cost_trace)
        for trace in result.diagnostics["per_level_traces"]:
            assert _monotone(trace)

    def test_six_basis_path_with_intrinsics(self):
        spec = standard_suite()[1]
        scene = generate_scene(spec)
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0,
                                     intr=spec.intrinsics)
        assert result.coefficients.values.shape == (6,)
        epe = compute_metrics(result.flow, scene.flow, valid=scene.valid).epe
        assert epe < 0.5

    def test_correlation_cost_improves_over_baseline(self):
        spec = standard_suite()[2]
        scene = generate_scene(spec)
        cfg = EstimatorConfig(cost="correlation", n_iters=8)
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0, cfg=cfg)
        epe = compute_metrics(result.flow, scene.flow, valid=scene.valid).epe
        assert _monotone(result.cost_trace)
        assert epe < 0.6 * _baseline_epe(scene)
        probe = result.diagnostics["lookup_probe"]
        assert probe["radius"] == cfg.lookup_radius
        # A locked-on flow correlates better at the center than on average
        # over its (2r+1)^2 neighborhood.
        assert probe["center_mean"] > probe["patch_mean"]

    def test_larger_motion_uses_pyramid_warm_start(self):
        """An 8 px translation is far outside a single bilinear basin; the
        coarse-to-fine start must still land below half a pixel."""
        intr = CameraIntrinsics(100.0, 100.0, 31.5, 31.5)
        from flowseek.synth import SceneSpec

        spec = SceneSpec(
            "fronto_plane",
            {"depth": 2.0},
            intrinsics=intr,
            motion=VelocityMotion([0.16, 0.0, 0.0], [0, 0, 0]),
            texture_seed=11,
            width=64,
            height=64,
        )
        scene = generate_scene(spec)
        assert np.hypot(scene.flow.u, scene.flow.v).max() >= 7.9
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        epe = compute_metrics(result.flow, scene.flow, valid=scene.valid).epe
        assert epe < 0.5


class TestResultContracts:
    def test_flow_is_exactly_in_span(self):
        scene = generate_scene(standard_suite()[4])
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        bs = build_eight_bases(scene.d0, 31.5, 31.5)
        again = reconstruct(bs, result.coefficients.values)
        assert np.array_equal(result.flow.u, again.u)
        assert np.array_equal(result.flow.v, again.v)

    def test_six_basis_span_identity(self):
        spec = standard_suite()[1]
        scene = generate_scene(spec)
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0,
                                     intr=spec.intrinsics)
        bs = build_six_bases(scene.d0, spec.intrinsics)
        again = reconstruct(bs, result.coefficients.values)
        assert np.array_equal(result.flow.u, again.u)

    def test_determinism(self):
        scene = generate_scene(standard_suite()[5])
        a = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        b = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        assert np.array_equal(a.coefficients.values, b.coefficients.values)
        assert a.cost_trace == b.cost_trace

    def test_diagnostics_present(self):
        scene = generate_scene(standard_suite()[0])
        result = estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        assert "rank" in result.diagnostics
        assert result.diagnostics["basis_count"] == 8
        assert len(result.cost_trace) == EstimatorConfig().n_iters + 1


class TestValidation:
    def test_shape_mismatches_rejected(self):
        d0 = InverseDepthMap(np.full((16, 16), 0.5))
        with pytest.raises(DimensionError):
            estimate_rigid_flow(np.zeros((16, 16)), np.zeros((16, 17)), d0)
        with pytest.raises(DimensionError):
            estimate_rigid_flow(np.zeros((8, 8)), np.zeros((8, 8)), d0)

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            EstimatorConfig(n_iters=0)
        with pytest.raises(ParameterError):
            EstimatorConfig(cost="banana")
        with pytest.raises(ParameterError):
            EstimatorConfig(damping=0.0)

    def test_nonfinite_image_rejected(self):
        with pytest.raises(ParameterError):
            make_feature_map(np.full((8, 8), np.nan))
