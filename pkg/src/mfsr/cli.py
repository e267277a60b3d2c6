"""Command-line front end: synthesize, fuse, measure.

Exit codes: 0 on success, 2 for usage errors (bad flags or parameter
values), 3 when input data is unreadable/inconsistent or the solve
fails.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import colorspace, fileio, metrics, synth
from .errors import DataError, InvalidInputError, MfsrError
from .pipeline import RegistrationConfig, reconstruct, reconstruct_color
from .solver import SolverConfig


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _lambda_value(text):
    if text == "auto":
        return "auto"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"lambda must be >= 0, got {text}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mfsr",
        description="Multi-frame super-resolution: fuse shifted low-resolution "
                    "frames into one high-resolution image.")
    sub = parser.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synth", help="render a synthetic low-resolution sequence")
    syn.add_argument("--out", required=True, help="output directory")
    syn.add_argument("--input", help="high-resolution source image (default: generated scene)")
    syn.add_argument("--size", type=_positive_int, nargs=2, default=[256, 256],
                     metavar=("H", "W"), help="generated scene size (high resolution)")
    syn.add_argument("--scene-seed", type=_nonneg_int, default=11,
                     help="seed for the generated scene")
    syn.add_argument("--frames", type=_positive_int, default=17)
    syn.add_argument("--factor", type=_positive_int, default=2)
    syn.add_argument("--noise", type=float, default=0.05,
                     help="noise standard deviation as a fraction of the data range")
    syn.add_argument("--seed", type=_nonneg_int, default=42,
                     help="seed for motions and noise")
    syn.add_argument("--max-shift", type=float, default=0.45,
                     help="translation bound in low-resolution pixels")
    syn.add_argument("--max-rotate", type=float, default=0.0, help="rotation bound, degrees")
    syn.add_argument("--max-illum", type=float, default=0.0,
                     help="illumination gain bound around 1")
    syn.add_argument("--format", choices=("png", "pgm"), default="png")

    fuse = sub.add_parser("fuse", help="reconstruct a high-resolution image")
    fuse.add_argument("frames", nargs="+",
                      help="frame files, or one directory of .png/.pgm frames")
    fuse.add_argument("--out", required=True, help="output image path")
    fuse.add_argument("--factor", type=_positive_int, default=2)
    fuse.add_argument("--reference", type=_nonneg_int, default=0)
    fuse.add_argument("--lambda", dest="lam", type=_lambda_value, default="auto",
                      help="rank-penalty weight; 'auto' balances the objective "
                           "terms once at the start, which lands well above the "
                           "best-quality range — tune by hand (0.5..1 is a good "
                           "start on 8-bit imagery)")
    fuse.add_argument("--rho", type=float, default=400.0)
    fuse.add_argument("--iters", type=_positive_int, default=50)
    fuse.add_argument("--tol", type=float, default=1e-4,
                      help="stop when the relative iterate change drops below this")
    fuse.add_argument("--cg-tol", type=float, default=1e-8)
    fuse.add_argument("--threads", type=_positive_int, default=1)
    fuse.add_argument("--color", action="store_true",
                      help="treat frames as RGB (luma/chroma processing)")
    fuse.add_argument("--presmooth", type=float, default=1.5,
                      help="Gaussian sigma applied before the translation fit")
    fuse.add_argument("--radius", type=_positive_int, default=16,
                      help="flow filter half-width")
    fuse.add_argument("--report", help="write a JSON run report here")
    fuse.add_argument("--dump-flow", help="directory for per-frame flow fields (text)")

    met = sub.add_parser("metrics", help="compare two images")
    met.add_argument("reference")
    met.add_argument("test")
    met.add_argument("--data-range", type=float, default=255.0)
    met.add_argument("--region", help="inclusive crop x0,y0,x1,y1 before comparing")
    met.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


# ---------------------------------------------------------------------------


def _cmd_synth(args):
    if args.noise < 0:
        raise InvalidInputError(f"noise must be >= 0, got {args.noise}")
    if args.input:
        hr = fileio.read_image(args.input)
        if hr.ndim == 3:
            hr = colorspace.rgb_to_ycbcr(hr)[..., 0]
    else:
        hr = synth.make_scene(tuple(args.size), seed=args.scene_seed)
    if hr.shape[0] % args.factor or hr.shape[1] % args.factor:
        raise InvalidInputError(
            f"scene shape {hr.shape} not divisible by factor {args.factor}")
    motions = synth.default_motions(args.frames, seed=args.seed,
                                    max_shift=args.max_shift,
                                    max_rotate=args.max_rotate,
                                    max_illum=args.max_illum)
    frames = synth.synthesize_sequence(hr, motions, args.factor,
                                       noise_ratio=args.noise, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_image(os.path.join(args.out, f"scene.{args.format}"), hr)
    for i, frame in enumerate(frames):
        fileio.write_image(os.path.join(args.out, f"frame_{i:03d}.{args.format}"), frame)
    synth.save_motions(os.path.join(args.out, "motions.json"), motions,
                       args.factor, args.noise, args.seed)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _collect_frame_paths(args_frames):
    if len(args_frames) == 1 and os.path.isdir(args_frames[0]):
        root = args_frames[0]
        names = sorted(n for n in os.listdir(root)
                       if n.startswith("frame_") and n.lower().endswith((".png", ".pgm")))
        if not names:
            raise DataError(f"no frame_*.png or frame_*.pgm files in {root}")
        return [os.path.join(root, n) for n in names]
    return list(args_frames)


def _cmd_fuse(args):
    paths = _collect_frame_paths(args.frames)
    frames = [fileio.read_image(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise DataError(f"frames disagree in shape: {sorted(shapes)}")
    if args.reference >= len(frames):
        raise InvalidInputError(
            f"reference index {args.reference} out of range for {len(frames)} frames")

    scfg = SolverConfig(lam=args.lam, rho=args.rho, max_iters=args.iters,
                        rel_tol=args.tol, cg_tol=args.cg_tol, threads=args.threads)
    rcfg = RegistrationConfig(radius=args.radius, presmooth_sigma=args.presmooth,
                              threads=args.threads)

    if args.color:
        if frames[0].ndim != 3:
            raise DataError("--color given but frames are grayscale")
        result = reconstruct_color(frames, args.factor, reference=args.reference,
                                   solver_config=scfg, registration_config=rcfg)
    else:
        if frames[0].ndim == 3:
            frames = [colorspace.rgb_to_ycbcr(f)[..., 0] for f in frames]
        result = reconstruct(frames, args.factor, reference=args.reference,
                             solver_config=scfg, registration_config=rcfg,
                             keep_flows=bool(args.dump_flow))

    fileio.write_image(args.out, result.image)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(result.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.dump_flow:
        os.makedirs(args.dump_flow, exist_ok=True)
        for i, flow in enumerate(result.flows):
            if flow is None:
                continue
            np.savetxt(os.path.join(args.dump_flow, f"flow_u_{i:03d}.txt"),
                       flow.u, fmt="%.17g")
            np.savetxt(os.path.join(args.dump_flow, f"flow_v_{i:03d}.txt"),
                       flow.v, fmt="%.17g")
    excl = result.report.get("excluded", [])
    note = f" ({len(excl)} frame(s) excluded)" if excl else ""
    print(f"wrote {args.out}{note}")
    return 0


def _cmd_metrics(args):
    a = fileio.read_image(args.reference)
    b = fileio.read_image(args.test)
    if a.shape != b.shape:
        raise DataError(f"image shapes differ: {a.shape} vs {b.shape}")
    region = None
    if args.region:
        try:
            x0, y0, x1, y1 = (int(t) for t in args.region.split(","))
        except ValueError:
            raise InvalidInputError(f"bad region {args.region!r}, want x0,y0,x1,y1")
        region = metrics.OverlapRegion(x0=x0, y0=y0, x1=x1, y1=y1)
    if a.ndim == 3:
        a = colorspace.rgb_to_ycbcr(a, args.data_range)[..., 0]
        b = colorspace.rgb_to_ycbcr(b, args.data_range)[..., 0]
    p = metrics.psnr(a, b, data_range=args.data_range, region=region)
    s = metrics.ssim(a, b, data_range=args.data_range, region=region)
    if args.json:
        print(json.dumps({"psnr_db": p, "ssim": s}, sort_keys=True))
    else:
        print(f"psnr_db={p:.6f}")
        print(f"ssim={s:.6f}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "fuse":
            return _cmd_fuse(args)
        return _cmd_metrics(args)
    except InvalidInputError as exc:
        print(f"mfsr: {exc}", file=sys.stderr)
        return 2
    except MfsrError as exc:
        print(f"mfsr: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
