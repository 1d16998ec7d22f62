"""Exhaustive-vs-SEA benchmark harness."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import fixtures
from .engine import InpaintParams, global_patch_energy, inpaint
from .image import Raster, RegionMask, load_mask, load_raster, quantize

CSV_HEADER = "id,w,h,mask_frac,patch,strategy,seconds,examined,pruned,energy,psnr"


@dataclass
class Fixture:
    id: str
    raster: Raster
    mask: RegionMask
    truth: Raster | None = None


@dataclass
class BenchRecord:
    id: str
    w: int
    h: int
    mask_frac: float
    patch: int
    strategy: str
    seconds: float
    examined: int
    pruned: int
    energy: float | None
    psnr: float | None

    def csv_row(self) -> str:
        def f(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return "inf" if math.isinf(v) else f"{v:.6g}"
            return str(v)
        return ",".join(f(getattr(self, k)) for k in CSV_HEADER.split(","))


def psnr(a: Raster, b: Raster) -> float:
    mse = float(np.mean((quantize(a.data).astype(float) - quantize(b.data).astype(float)) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)


def builtin_fixtures(name: str = "two-texture", size=(400, 300), mask_frac: float = 0.10,
                     seed: int = 0) -> list[Fixture]:
    """Deterministic synthetic fixtures; the damaged image is the truth with the mask blanked."""
    if name == "two-texture":
        truth = fixtures.two_texture(size[0], size[1], seed=seed)
        mask = fixtures.blob_mask(truth.shape, mask_frac, seed=seed + 1)
    elif name == "periodic":
        truth = fixtures.periodic_tile(5, (size[1], size[0]), seed=seed)
        mask = fixtures.centered_gap(truth.shape, min(20, min(size) // 3))
    else:
        raise ValueError(f"unknown fixture {name!r}")
    damaged = truth.copy_data()
    damaged[mask.flags] = 0.0
    return [Fixture(name, Raster(damaged), mask, truth)]


def load_fixture_dir(path) -> list[Fixture]:
    """``<stem>.<ext>`` images with ``<stem>_mask.<ext>`` and optional ``<stem>_truth.<ext>``."""
    if not os.path.isdir(path):
        raise FileNotFoundError(f"fixture directory {path} not found")
    out = []
    names = sorted(os.listdir(path))
    for fn in names:
        stem, ext = os.path.splitext(fn)
        if ext.lower() not in (".png", ".pgm", ".ppm") or stem.endswith(("_mask", "_truth")):
            continue
        mask_fn = next((c for c in names if os.path.splitext(c)[0] == stem + "_mask"), None)
        if mask_fn is None:
            raise FileNotFoundError(f"fixture {fn} has no {stem}_mask image")
        raster = load_raster(os.path.join(path, fn))
        mask = load_mask(os.path.join(path, mask_fn), raster.shape)
        truth_fn = next((c for c in names if os.path.splitext(c)[0] == stem + "_truth"), None)
        truth = load_raster(os.path.join(path, truth_fn)) if truth_fn else None
        out.append(Fixture(stem, raster, mask, truth))
    if not out:
        raise FileNotFoundError(f"no fixtures in {path}")
    return out


def run_bench(fixture_list, patch_sizes=(9,), strategies=("brute", "sea"), energy: bool = True,
              workers: int = 1) -> list[BenchRecord]:
    """Run every strategy on identical inputs; raise if their outputs differ."""
    records = []
    for fx in fixture_list:
        for p in patch_sizes:
            outputs = {}
            rows = []
            for strat in strategies:
                if strat not in ("brute", "sea"):
                    raise ValueError(f"unknown strategy {strat!r}")
                params = InpaintParams(patch_size=p, use_sea=strat == "sea", workers=workers)
                out, rep = inpaint(fx.raster, fx.mask, params)
                outputs[strat] = quantize(out.data).tobytes()
                rows.append((strat, out, rep))
            if len(set(outputs.values())) > 1:
                raise RuntimeError(f"{fx.id}: strategies produced different images")
            e = None
            if energy:
                e = global_patch_energy(rows[0][1], fx.mask, p)
            for strat, out, rep in rows:
                records.append(BenchRecord(
                    fx.id, fx.raster.width, fx.raster.height, fx.mask.count / fx.mask.flags.size, p, strat,
                    rep.seconds, rep.examined, rep.pruned, e,
                    psnr(out, fx.truth) if fx.truth is not None else None))
    return records
