"""Command-line entry point: ``patchfill {inpaint,bench,segment,layers,energy}``."""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import bench
from .engine import BilateralParams, InpaintParams, global_patch_energy, inpaint
from .image import Raster, detect_damaged, load_mask, load_raster, save_raster
from .layers import assign_layers, inpaint_by_layers, train_som
from .segmentation import (SegParams, checkerboard_phi, circle_phi, evolve_level_set,
                           phase_labels)


def _odd_patch(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid patch size {text!r}") from None
    if v % 2 == 0:
        raise argparse.ArgumentTypeError("patch size must be odd")
    if v < 5:
        raise argparse.ArgumentTypeError("patch size must be at least 5")
    return v


def _patch_list(text: str) -> list[int]:
    return [_odd_patch(t) for t in text.split(",") if t]


def _grid(text: str) -> tuple[int, int]:
    try:
        m, n = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like MxN, got {text!r}") from None
    if m < 1 or n < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return m, n


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    if a <= 0 or b <= 0:
        raise argparse.ArgumentTypeError("bilateral sigmas must be positive")
    return a, b


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("INPAINT_THREADS")
    return max(1, int(env)) if env and env.isdigit() else 1


def _target_mask(args, raster):
    if args.mask:
        return load_mask(args.mask, raster.shape)
    marker = 255 if args.marker is None else args.marker
    return detect_damaged(raster, marker)


def cmd_inpaint(args) -> int:
    raster = load_raster(args.inp)
    mask = _target_mask(args, raster)
    bil = BilateralParams(*args.bilateral) if args.bilateral else None
    params = InpaintParams(patch_size=args.patch, search_radius=args.radius, use_sea=not args.no_sea,
                           bilateral=bil, rng_seed=args.seed, workers=_threads(args),
                           allow_filled_sources=args.allow_filled_sources)
    if args.grid:
        out, report, _ = inpaint_by_layers(raster, mask, *args.grid, seed=args.seed, params=params)
    elif args.phase_restrict:
        # damaged pixels carry no data weight
        lam = np.where(mask.flags, 0.0, 1.0)
        seg = evolve_level_set(raster, None, SegParams(lam=lam, nu=args.nu, max_iters=args.iters))
        labels = phase_labels(seg.field)
        out, report = inpaint(raster, mask, params, labels=labels)
    else:
        out, report = inpaint(raster, mask, params)
    save_raster(out, args.out)
    text = report.to_text()
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w") as fh:
            if args.report.endswith(".csv"):
                fh.write(report.csv_header() + "\n" + report.csv_row() + "\n")
            else:
                fh.write(text)
    return 0


def cmd_bench(args) -> int:
    if args.fixtures:
        fx = bench.load_fixture_dir(args.fixtures)
    else:
        fx = bench.builtin_fixtures(args.fixture, args.size, args.mask_frac, args.seed)
    strategies = [s for s in args.strategies.split(",") if s]
    for s in strategies:
        if s not in ("brute", "sea"):
            raise UsageError(f"unknown strategy {s!r}")
    records = bench.run_bench(fx, args.patch, strategies, energy=args.energy, workers=_threads(args))
    lines = [bench.CSV_HEADER] + [r.csv_row() for r in records]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_segment(args) -> int:
    raster = load_raster(args.inp)
    lam = 1.0
    if args.lambda_map:
        lam = load_raster(args.lambda_map).data.mean(axis=2) / 255.0
        if lam.shape != raster.shape:
            raise ValueError("lambda map shape does not match image")
    params = SegParams(lam=lam, nu=args.nu, max_iters=args.iters, dt=args.dt)
    phi0 = circle_phi(raster.shape) if args.init == "circle" else checkerboard_phi(raster.shape)
    res = evolve_level_set(raster, phi0, params)
    label = np.where(res.field.phi > 0, 255.0, 0.0)
    if args.out.lower().endswith(".ppm"):
        label = np.repeat(label[:, :, None], 3, axis=2)
    save_raster(Raster(label), args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("step,energy\n")
            for i, e in enumerate(res.energies):
                fh.write(f"{i},{e!r}\n")
    sys.stdout.write(f"iterations={res.iterations}\nconverged={res.converged}\n"
                     f"c1={res.field.c1!r}\nc2={res.field.c2!r}\n")
    return 0


def cmd_layers(args) -> int:
    raster = load_raster(args.inp)
    mask = _target_mask(args, raster)
    m, n = args.grid
    som = train_som(raster, mask, m, n, args.epochs, seed=args.seed)
    lm = assign_layers(raster, mask, som)
    scale = 255.0 / max(lm.count - 1, 1)
    img = np.where(lm.index < 0, 255.0, lm.index * scale)
    if args.out.lower().endswith(".ppm"):
        img = np.repeat(img[:, :, None], 3, axis=2)
    save_raster(Raster(np.clip(img, 0, 255)), args.out)
    hits_text = "neuron,row,col,r,g,b,hits\n" + "".join(
        f"{k},{k // n},{k % n},{w[0]:.4f},{w[1]:.4f},{w[2]:.4f},{h}\n"
        for k, (w, h) in enumerate(zip(som.weights, som.hits)))
    if args.hits:
        with open(args.hits, "w") as fh:
            fh.write(hits_text)
    else:
        sys.stdout.write(hits_text)
    return 0


def cmd_energy(args) -> int:
    raster = load_raster(args.inp)
    mask = load_mask(args.orig_mask, raster.shape)
    sys.stdout.write(f"{global_patch_energy(raster, mask, args.patch)!r}\n")
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchfill", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common_mask(p):
        p.add_argument("--mask", help="target mask file, nonzero = fill (overrides --marker)")
        p.add_argument("--marker", type=int, default=None, help="in-band damage intensity (default 255)")

    p = sub.add_parser("inpaint", help="fill a damaged region")
    p.add_argument("--in", dest="inp", required=True)
    common_mask(p)
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=_odd_patch, default=9)
    p.add_argument("--radius", type=float, default=math.inf, help="search window radius (default: whole image)")
    p.add_argument("--no-sea", action="store_true", help="use the exhaustive scan")
    p.add_argument("--bilateral", type=_pair, metavar="SS,SR", help="prefilter sigmas for matching")
    p.add_argument("--grid", type=_grid, metavar="MxN", help="restrict exemplars to SOM layers")
    p.add_argument("--phase-restrict", action="store_true", help="restrict exemplars to the segmentation phase")
    p.add_argument("--nu", type=float, default=0.01 * 255 ** 2)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-filled-sources", action="store_true")
    p.add_argument("--report", help="write the fill report (CSV if *.csv, else key=value)")
    p.add_argument("--threads", type=int, default=None, help="worker count (env INPAINT_THREADS)")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("bench", help="exhaustive vs successive-elimination timings")
    p.add_argument("--fixtures", help="directory of <id>.png + <id>_mask.png [+ <id>_truth.png]")
    p.add_argument("--fixture", default="two-texture", choices=["two-texture", "periodic"])
    p.add_argument("--size", type=lambda s: tuple(int(v) for v in s.lower().split("x")), default=(400, 300),
                   metavar="WxH")
    p.add_argument("--mask-frac", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch", type=_patch_list, default=[9], help="comma-separated odd sizes")
    p.add_argument("--strategies", default="brute,sea")
    p.add_argument("--energy", action="store_true", help="also compute the global patch energy")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("segment", help="two-phase level-set segmentation")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="phase label image (0/255)")
    p.add_argument("--trace", help="energy trace CSV")
    p.add_argument("--nu", type=float, default=0.01 * 255 ** 2)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--lambda-map", help="per-pixel weight image, 255 = weight 1")
    p.add_argument("--init", choices=["checkerboard", "circle"], default="checkerboard")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("layers", help="SOM colour layers")
    p.add_argument("--in", dest="inp", required=True)
    common_mask(p)
    p.add_argument("--out", required=True, help="layer index image scaled to 0-255")
    p.add_argument("--hits", help="per-neuron hit count CSV")
    p.add_argument("--grid", type=_grid, default=(4, 4), metavar="MxN")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_layers)

    p = sub.add_parser("energy", help="global patch energy of a completed image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--orig-mask", required=True)
    p.add_argument("--patch", type=_odd_patch, default=9)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_energy)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"patchfill {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
