"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s or -v to see them live).  Tolerances are pinned
here and nowhere else."""

import json
import math
import time

import numpy as np

import flowseek as fs
from flowseek import cli
from flowseek.synth import _spec_to_json

from conftest import random_scene


def _report(num, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance {num:02d}] {name}: {status} {detail}")
    assert passed, f"criterion {num} ({name}) failed: {detail}"


def test_01_subspace_exactness():
    """Instantaneous flow lies in the six-basis span with RMS < 1e-10 over
    50 random 64x64 scene/velocity pairs, in under 10 s."""
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d0, intr = random_scene(rng, 64, 64)
        vel = fs.VelocityMotion(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3))
        flow = fs.instantaneous_flow(d0, intr, vel)
        _, rms = fs.subspace_residual(flow, fs.build_six_bases(d0, intr))
        worst = max(worst, rms)
    elapsed = time.perf_counter() - t0
    _report(1, "subspace exactness", worst < 1e-10 and elapsed < 10.0,
            f"(worst RMS {worst:.3e}, {elapsed:.2f}s)")


def test_02_span_inclusion():
    """Each six-basis field reconstructs from the eight-basis set with
    relative residual < 1e-9 for 20 random focal lengths (f_x = f_y)."""
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(20):
        f = float(rng.uniform(50, 1000))
        d0, _ = random_scene(rng, 24, 24)
        intr = fs.CameraIntrinsics(f, f, 11.5 + rng.uniform(-1, 1), 11.5 + rng.uniform(-1, 1))
        six = fs.build_six_bases(d0, intr)
        eight = fs.build_eight_bases(d0, intr.c_x, intr.c_y)
        for k in range(6):
            field = fs.FlowField.from_uv(six.fields[k])
            coeffs = fs.fit_coefficients(field, eight)
            scale = float(np.sqrt(np.mean(field.u**2 + field.v**2)))
            worst = max(worst, coeffs.residual_rms / scale)
    _report(2, "eight-basis span inclusion", worst < 1e-9, f"(worst rel residual {worst:.3e})")


def test_03_coefficient_recovery():
    """fit(reconstruct(c)) returns c within 1e-8 componentwise on 100 random
    full-rank scenes."""
    rng = np.random.default_rng(1003)
    worst = 0.0
    for draw in range(100):
        d0, intr = random_scene(rng, 24, 24)
        if draw % 2 == 0:
            bs = fs.build_six_bases(d0, intr)
        else:
            bs = fs.build_eight_bases(d0, intr.c_x, intr.c_y)
        c = rng.uniform(-1, 1, bs.count)
        got = fs.fit_coefficients(fs.reconstruct(bs, c), bs)
        worst = max(worst, float(np.max(np.abs(got.values - c))))
    _report(3, "coefficient recovery", worst < 1e-8, f"(worst |dc| {worst:.3e})")


def test_04_oracle_convergence():
    """Reprojection vs scaled instantaneous flow: max-error ratio between
    scales s and s/2 lies in [3, 5] across 3 halvings on 5 scenes."""
    rng = np.random.default_rng(1004)
    ratios = []
    for _ in range(5):
        d0, intr = random_scene(rng, 24, 24)
        vel = fs.VelocityMotion(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3))
        inst = fs.instantaneous_flow(d0, intr, vel).uv()

        def max_err(s):
            rf = fs.reprojection_flow(d0, intr, fs.RigidMotion.from_velocity(vel, s))
            return float(np.abs(rf.uv() - s * inst)[rf.valid].max())

        errors = [max_err(s) for s in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
        ratios.extend(a / b for a, b in zip(errors, errors[1:]))
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    _report(4, "discrete/instantaneous convergence", ok,
            f"(ratios {min(ratios):.2f}..{max(ratios):.2f})")


def test_05_correlation_equivalence():
    """Volume, pooling, and lookup match scalar brute-force oracles within
    1e-12 relative on all instances up to 4x4x3."""
    results = fs.correlation.run_oracle_suite(rtol=1e-12)
    ok = all(rec["passed"] for rec in results)
    worst = max(rec["max_abs_err"] for rec in results)
    _report(5, "correlation oracle equivalence", ok,
            f"({len(results)} instances, worst abs err {worst:.3e})")


def test_06_gradient_check():
    """Analytic mixture gradients vs central differences: max relative error
    < 1e-5 over 1000 draws; NLL at the mode equals log 2 to 1e-12."""
    report = fs.finite_difference_check(n_draws=1000, seed=1006)
    params = fs.LaplaceMixtureParams(
        np.full((1, 1, 2), 0.3), np.ones((1, 1, 2)), np.zeros((1, 1, 2))
    )
    gt = fs.FlowField(np.full((1, 1), 0.3), np.full((1, 1), 0.3), np.ones((1, 1), dtype=bool))
    loss_map, _ = fs.mixture_nll(params, gt)
    mode_err = abs(loss_map[0, 0] / 2.0 - math.log(2.0))
    ok = report["max_rel_err"] < 1e-5 and mode_err < 1e-12
    _report(6, "mixture gradient check", ok,
            f"(max rel {report['max_rel_err']:.3e}, mode err {mode_err:.3e})")


def test_07_convex_upsampling():
    """Constant fields upsample to exactly m times the constant (to float
    precision, 1e-12 relative) and the convexity bounds hold on 1e4 draws."""
    rng = np.random.default_rng(1007)
    const = fs.FlowField(np.full((4, 4), -2.25), np.full((4, 4), 1.5),
                         np.ones((4, 4), dtype=bool))
    weights = fs.ConvexWeights(rng.standard_normal((32, 32, 9)) * 4, factor=8)
    fine = fs.convex_upsample(const, weights)
    const_ok = (np.abs(fine.u - 8 * -2.25).max() < 1e-12 * 8 * 2.25
                and np.abs(fine.v - 8 * 1.5).max() < 1e-12 * 8 * 1.5)

    violations = 0
    draws = 0
    for _ in range(3):
        coarse_u = rng.standard_normal((8, 8))
        coarse = fs.FlowField(coarse_u, rng.standard_normal((8, 8)),
                              np.ones((8, 8), dtype=bool))
        w = fs.ConvexWeights(rng.standard_normal((64, 64, 9)) * 5, factor=8)
        fine = fs.convex_upsample(coarse, w)
        padded = np.pad(coarse_u, 1, mode="edge")
        windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
        lo = np.repeat(np.repeat(windows.min(axis=(2, 3)), 8, 0), 8, 1)
        hi = np.repeat(np.repeat(windows.max(axis=(2, 3)), 8, 0), 8, 1)
        violations += int(np.sum(fine.u < 8 * lo - 1e-12))
        violations += int(np.sum(fine.u > 8 * hi + 1e-12))
        draws += fine.u.size
    ok = const_ok and violations == 0 and draws >= 10_000
    _report(7, "convex upsampling", ok, f"({draws} draws, {violations} bound violations)")


def test_08_io_round_trips(tmp_path):
    """.flo round-trips bitwise and the 16-bit PNG within 1/128 per
    component, over 100 random flows each."""
    rng = np.random.default_rng(1008)
    flo_ok = True
    png_worst = 0.0
    for k in range(100):
        h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        u32 = (300 * rng.standard_normal((h, w))).astype(np.float32).astype(np.float64)
        v32 = (300 * rng.standard_normal((h, w))).astype(np.float32).astype(np.float64)
        valid = rng.random((h, w)) > 0.2
        flow = fs.FlowField(u32, v32, np.ones((h, w), dtype=bool))
        path = tmp_path / f"f{k}.flo"
        fs.write_flo(path, flow)
        back = fs.read_flo(path)
        flo_ok &= bool(np.array_equal(back.u, u32) and np.array_equal(back.v, v32))

        flow_png = fs.FlowField(np.clip(u32, -500, 500), np.clip(v32, -500, 500), valid)
        path = tmp_path / f"f{k}.png"
        fs.write_kitti_png(path, flow_png)
        back = fs.read_kitti_png(path)
        err_u = np.abs(back.u - np.where(valid, flow_png.u, 0.0)).max()
        err_v = np.abs(back.v - np.where(valid, flow_png.v, 0.0)).max()
        png_worst = max(png_worst, float(err_u), float(err_v))
        flo_ok &= bool(np.array_equal(back.valid, valid))
    ok = flo_ok and png_worst <= 1.0 / 128.0
    _report(8, "file-format round trips", ok, f"(PNG worst err {png_worst:.5f})")


def test_09_end_to_end_estimator():
    """On the standard 10-scene suite: mean EPE < 0.5 px and < 0.1x the
    zero-flow baseline, non-increasing cost traces, < 60 s single-threaded."""
    t0 = time.perf_counter()
    epes = []
    baselines = []
    monotone = True
    for spec in fs.standard_suite():
        scene = fs.generate_scene(spec)
        result = fs.estimate_rigid_flow(scene.image0, scene.image1, scene.d0)
        epes.append(fs.compute_metrics(result.flow, scene.flow, valid=scene.valid).epe)
        zero = fs.FlowField.zeros(spec.height, spec.width)
        baselines.append(fs.compute_metrics(zero, scene.flow, valid=scene.valid).epe)
        for trace in result.diagnostics["per_level_traces"]:
            monotone &= all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))
    elapsed = time.perf_counter() - t0
    mean_epe = float(np.mean(epes))
    mean_base = float(np.mean(baselines))
    ok = mean_epe < 0.5 and mean_epe < 0.1 * mean_base and monotone and elapsed < 60.0
    _report(9, "end-to-end estimator", ok,
            f"(mean EPE {mean_epe:.4f}, baseline {mean_base:.4f}, {elapsed:.1f}s)")


def test_10_thread_count_determinism(tmp_path, capsys):
    """Rerunning the artifact-producing pipelines with different thread
    counts yields bitwise-identical files and reports."""
    spec_file = tmp_path / "scenes.json"
    spec_file.write_text(
        json.dumps({"scenes": [_spec_to_json(s) for s in fs.standard_suite()[:3]]})
    )
    outs = {}
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert cli.run(["synth", "--spec", str(spec_file), "--out", str(out),
                        "--threads", str(threads)]) == 0
        outs[threads] = out
    files_equal = all(
        p.read_bytes() == (outs[4] / p.name).read_bytes()
        for p in sorted(outs[1].iterdir())
    )

    entry = json.loads((outs[1] / "manifest.json").read_text())["scenes"][0]["files"]
    reports = []
    for threads in (1, 4):
        capsys.readouterr()
        assert cli.run([
            "estimate", "--img0", str(outs[1] / entry["image0"]),
            "--img1", str(outs[1] / entry["image1"]),
            "--depth", str(outs[1] / entry["inverse_depth"]),
            "--out", str(tmp_path / f"est{threads}.flo"),
            "--gt", str(outs[1] / entry["flow_flo"]),
            "--json", "--threads", str(threads),
        ]) == 0
        reports.append(capsys.readouterr().out.replace(f"est{threads}.flo", "est.flo"))
    flo_equal = (tmp_path / "est1.flo").read_bytes() == (tmp_path / "est4.flo").read_bytes()
    ok = files_equal and reports[0] == reports[1] and flo_equal
    with capsys.disabled():
        _report(10, "thread-count determinism", ok,
                f"(files equal: {files_equal}, reports equal: {reports[0] == reports[1]})")
