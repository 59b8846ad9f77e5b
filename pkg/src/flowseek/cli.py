"""Command-line interface.

One executable with the subcommands synth, bases, fit, estimate, eval, viz,
gradcheck, and corr-oracle.  Exit codes: 0 on success, 1 on domain errors
(bad files, dimension mismatches), 2 on usage errors.  ``--json`` switches
reports to machine-readable output; a JSON config file can supply any
subcommand option, with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import correlation, estimator, flow_io, flowops, subspace, supervision, synth
from .bases import FOCAL_FREE, build_eight_bases, build_six_bases
from .errors import FlowSeekError, ParameterError
from .geometry import CameraIntrinsics, FlowField, InverseDepthMap


def _parse_intrinsics(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ParameterError(f"intrinsics must be 'fx,fy,cx,cy', got {text!r}")
    fx, fy, cx, cy = (float(p) for p in parts)
    return CameraIntrinsics(fx, fy, cx, cy)


def _read_flow_any(path):
    return flow_io.read_flow(path)


def _load_depth(path):
    return InverseDepthMap(flow_io.read_inverse_depth_png(path))


def _emit(report, as_json):
    if as_json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for key, value in report.items():
            print(f"{key}: {value}")


_NON_OPTION_ATTRS = {"func", "defaults", "command", "config"}


def _apply_config(args, parser_defaults):
    """Fill options left at None from the config file, then from defaults.

    Explicit command-line flags always win; unknown config keys are
    rejected so typos do not pass silently.
    """
    config = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            config = json.load(f)
    for key, value in config.items():
        if key in _NON_OPTION_ATTRS or not hasattr(args, key):
            raise ParameterError(f"unknown config key {key!r} for this subcommand")
        if getattr(args, key) is None:
            setattr(args, key, value)
    for key, default in parser_defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, default)
    return args


def _threads(args):
    if getattr(args, "threads", None) is not None:
        return int(args.threads)
    env = os.environ.get("FLOWSEEK_THREADS")
    return int(env) if env else 1


def _cmd_eval(args):
    est = _read_flow_any(args.estimate)
    gt = _read_flow_any(args.ground_truth)
    mask = None
    if args.mask:
        import cv2

        img = cv2.imread(str(args.mask), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FlowSeekError(f"{args.mask}: not a readable image")
        mask = np.asarray(img) > 0
        if mask.ndim == 3:
            mask = mask.any(axis=2)
    metrics = flowops.compute_metrics(est, gt, valid=mask, fl_mode=args.fl_mode)
    _emit(
        {
            "epe": metrics.epe,
            "npx1": metrics.npx[1],
            "npx3": metrics.npx[3],
            "npx5": metrics.npx[5],
            "fl_all": metrics.fl_all,
            "fl_mode": metrics.fl_mode,
        },
        args.json,
    )
    return 0


def _cmd_viz(args):
    flow = _read_flow_any(args.flow)
    rgb = flow_io.flow_to_color(flow, max_magnitude=args.max_magnitude)
    flow_io.write_color_png(args.out, rgb)
    _emit({"written": str(args.out)}, args.json)
    return 0


def _cmd_gradcheck(args):
    report = supervision.finite_difference_check(
        n_draws=args.draws, seed=args.seed if args.seed is not None else 0
    )
    report["threshold"] = 1e-5
    report["passed"] = bool(report["max_rel_err"] < 1e-5)
    _emit(report, args.json)
    return 0 if report["passed"] else 1


def _cmd_corr_oracle(args):
    results = correlation.run_oracle_suite()
    if args.json:
        print(json.dumps({"instances": results, "backend": correlation.kernel_backend()},
                         indent=2, sort_keys=True))
    else:
        for rec in results:
            status = "PASS" if rec["passed"] else "FAIL"
            print(f"{status}  {rec['instance']}  max_abs_err={rec['max_abs_err']:.3e}")
        print(f"backend: {correlation.kernel_backend()}")
    return 0 if all(rec["passed"] for rec in results) else 1


def _cmd_synth(args):
    with open(args.spec) as f:
        spec_json = json.load(f)
    scenes = spec_json["scenes"] if isinstance(spec_json, dict) else spec_json
    specs = [synth.spec_from_json(obj, index=k) for k, obj in enumerate(scenes)]
    manifest = synth.emit_dataset(specs, args.out, threads=_threads(args))
    _emit({"scenes": len(manifest["scenes"]), "out": str(args.out)}, args.json)
    return 0


def _cmd_bases(args):
    d0 = _load_depth(args.depth)
    if args.intrinsics:
        basis_set = build_six_bases(d0, _parse_intrinsics(args.intrinsics))
    else:
        c_x = (d0.width - 1) / 2.0
        c_y = (d0.height - 1) / 2.0
        basis_set = build_eight_bases(d0, c_x, c_y)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for k, name in enumerate(basis_set.names):
        field = FlowField.from_uv(basis_set.fields[k])
        flow_io.write_flo(out_dir / f"basis_{k}_{name}.flo", field)
        flow_io.write_color_png(
            out_dir / f"basis_{k}_{name}.png", flow_io.flow_to_color(field)
        )
        written.append(name)
    _emit(
        {
            "bases": written,
            "mode": "six" if basis_set.intrinsics_used != FOCAL_FREE else "eight",
            "out": str(out_dir),
        },
        args.json,
    )
    return 0


def _cmd_fit(args):
    flow = _read_flow_any(args.flow)
    d0 = _load_depth(args.depth)
    if args.intrinsics:
        basis_set = build_six_bases(d0, _parse_intrinsics(args.intrinsics))
    else:
        basis_set = build_eight_bases(d0, (d0.width - 1) / 2.0, (d0.height - 1) / 2.0)
    coeffs = subspace.fit_coefficients(flow, basis_set)
    report = {
        "coefficients": dict(zip(basis_set.names, coeffs.values.tolist())),
        "effective_rank": coeffs.effective_rank,
        "residual_rms": coeffs.residual_rms,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_estimate(args):
    img0 = flow_io.read_gray_png(args.img0)
    img1 = flow_io.read_gray_png(args.img1)
    d0 = _load_depth(args.depth)
    cfg = estimator.EstimatorConfig(
        n_iters=args.n_iters,
        lookup_radius=args.radius,
        cost=args.cost,
    )
    intr = _parse_intrinsics(args.intrinsics) if args.intrinsics else None
    result = estimator.estimate_rigid_flow(img0, img1, d0, intr=intr, cfg=cfg)
    flow_io.write_flo(args.out, result.flow)
    if args.viz:
        flow_io.write_color_png(args.viz, flow_io.flow_to_color(result.flow))
    report = {
        "coefficients": result.coefficients.values.tolist(),
        "cost_trace": result.cost_trace,
        "effective_rank": result.coefficients.effective_rank,
        "out": str(args.out),
    }
    if args.gt:
        gt = _read_flow_any(args.gt)
        metrics = flowops.compute_metrics(result.flow, gt)
        _, span_rms = subspace.subspace_residual(
            gt, estimator._build_bases(d0, intr)
        )
        report["epe"] = metrics.epe
        report["fl_all"] = metrics.fl_all
        report["gt_span_residual_rms"] = span_rms
    _emit(report, args.json)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="flowseek",
        description="Rigid-motion flow bases, correlation pyramids, and flow tooling",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: FLOWSEEK_THREADS or 1)")
    common.add_argument("--seed", type=int, default=None, help="random seed override")
    common.add_argument("--config", default=None,
                        help="JSON file supplying defaults for this subcommand")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="compare two flow files")
    p.add_argument("estimate")
    p.add_argument("ground_truth")
    p.add_argument("--mask", default=None, help="validity mask PNG (nonzero = valid)")
    p.add_argument("--fl-mode", dest="fl_mode", choices=["and", "or"], default=None)
    p.set_defaults(func=_cmd_eval, defaults={"fl_mode": "and"})

    p = sub.add_parser("viz", parents=[common], help="render a flow file to PNG")
    p.add_argument("flow")
    p.add_argument("out")
    p.add_argument("--max-magnitude", dest="max_magnitude", type=float, default=None)
    p.set_defaults(func=_cmd_viz, defaults={})

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of the mixture gradients")
    p.add_argument("--draws", type=int, default=None)
    p.set_defaults(func=_cmd_gradcheck, defaults={"draws": 1000})

    p = sub.add_parser("corr-oracle", parents=[common],
                       help="brute-force equivalence suite for the correlation kernels")
    p.set_defaults(func=_cmd_corr_oracle, defaults={})

    p = sub.add_parser("synth", parents=[common], help="generate synthetic scenes")
    p.add_argument("--spec", required=True, help="JSON scene list")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth, defaults={})

    p = sub.add_parser("bases", parents=[common],
                       help="emit basis fields as .flo plus color PNG")
    p.add_argument("--depth", required=True, help="16-bit inverse-depth PNG")
    p.add_argument("--out", required=True)
    p.add_argument("--intrinsics", default=None, help="'fx,fy,cx,cy'; omit for focal-free")
    p.set_defaults(func=_cmd_bases, defaults={})

    p = sub.add_parser("fit", parents=[common],
                       help="fit basis coefficients to a flow file")
    p.add_argument("--flow", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics", default=None, help="'fx,fy,cx,cy'; omit for focal-free")
    p.set_defaults(func=_cmd_fit, defaults={})

    p = sub.add_parser("estimate", parents=[common], help="estimate rigid flow")
    p.add_argument("--img0", required=True)
    p.add_argument("--img1", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--viz", default=None, help="also write a color rendering")
    p.add_argument("--gt", default=None, help="ground-truth flow for metrics")
    p.add_argument("--intrinsics", default=None)
    p.add_argument("--n-iters", dest="n_iters", type=int, default=None)
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--cost", choices=["photometric", "correlation"], default=None)
    p.set_defaults(func=_cmd_estimate,
                   defaults={"n_iters": 4, "radius": 4, "cost": "photometric"})

    return parser


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, args.defaults)
        return args.func(args)
    except FlowSeekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
