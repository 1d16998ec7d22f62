"""Greedy exemplar fill loop, confidence bookkeeping, bilateral smoothing and
the global patch-coherence energy used to score completions."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .front import confidence_at, data_terms_at, front_flags
from .image import Raster, RegionMask
from .search import NoCandidateError, PatchQuery, PatchSearcher, restrict_window


class UnfillableError(RuntimeError):
    pass


@dataclass(frozen=True)
class BilateralParams:
    sigma_s: float = 3.0
    sigma_r: float = 30.0
    radius: int | None = None

    def __post_init__(self):
        if self.sigma_s <= 0 or self.sigma_r <= 0:
            raise ValueError("bilateral sigmas must be positive")
        if self.radius is None:
            object.__setattr__(self, "radius", int(math.ceil(3 * self.sigma_s)))
        if self.radius < 1:
            raise ValueError("bilateral radius must be >= 1")


@dataclass(frozen=True)
class InpaintParams:
    patch_size: int = 9
    search_radius: float = math.inf
    use_sea: bool = True
    bilateral: BilateralParams | None = None
    rng_seed: int = 0  # reserved; the engine is deterministic
    allow_filled_sources: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.patch_size < 5 or self.patch_size % 2 == 0:
            raise ValueError("patch size must be odd and at least 5")
        if math.isfinite(self.search_radius) and self.search_radius < self.patch_size:
            raise ValueError("search radius must be at least the patch size")


@dataclass
class FillStep:
    target: tuple[int, int]
    exemplar: tuple[int, int]
    filled: np.ndarray  # (N, 2) positions written this step


@dataclass
class FillReport:
    iterations: int = 0
    examined: int = 0
    pruned: int = 0
    seconds: float = 0.0
    energy: float | None = None
    steps: list[FillStep] = field(default_factory=list)
    fallbacks: list[tuple[int, int]] = field(default_factory=list)
    confidence: np.ndarray | None = None

    FIELDS = ("iterations", "examined", "pruned", "seconds", "energy")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def to_text(self) -> str:
        """Flat ``key=value`` block, one pair per line."""
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k}={'' if v is None else _fmt(v)}")
        lines.append(f"fallbacks={len(self.fallbacks)}")
        return "\n".join(lines) + "\n"

    def csv_header(self) -> str:
        return ",".join(self.FIELDS)

    def csv_row(self) -> str:
        return ",".join("" if v is None else _fmt(v) for v in self.as_dict().values())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def update_confidence(conf: np.ndarray, p_hat, filled, value: float) -> np.ndarray:
    """Return a copy of ``conf`` with ``value`` written at every filled position."""
    if not 0.0 <= value <= 1.0:
        raise ValueError("confidence value must lie in [0, 1]")
    out = np.array(conf, dtype=np.float64)
    pts = np.asarray(list(filled), dtype=np.intp).reshape(-1, 2)
    out[pts[:, 0], pts[:, 1]] = value
    return out


def inpaint(raster: Raster, mask: RegionMask, params: InpaintParams | None = None, *,
            labels: np.ndarray | None = None) -> tuple[Raster, FillReport]:
    """Fill the target region of ``raster`` by greedy exemplar copying.

    ``labels`` optionally restricts the search: a front pixel with label
    ``k >= 0`` only accepts exemplars centred on pixels labelled ``k``. If no
    such exemplar exists the search falls back to the whole source region and
    the front pixel is recorded in ``report.fallbacks``.
    """
    params = params or InpaintParams()
    mask.check_pairs(raster)
    t0 = time.perf_counter()
    p = params.patch_size
    half = p // 2
    h, w = raster.shape

    out = raster.copy_data()
    match = out if params.bilateral is None else bilateral_filter(raster, params.bilateral).copy_data()
    match = np.ascontiguousarray(match)
    target = np.array(mask.flags)
    known = ~target
    conf = known.astype(np.float64)
    report = FillReport()

    if target.any():
        searcher = PatchSearcher(match, mask.source, p, workers=params.workers)
        if not searcher.admissible.any():
            raise UnfillableError("source region admits no full patch")
        search = searcher.sea if params.use_sea else searcher.bruteforce
        allowed_cache: dict[int, np.ndarray] = {}

    while target.any():
        front = np.argwhere(front_flags(target, known))
        if len(front) == 0:
            raise UnfillableError("target region has no pixel adjacent to known data")
        cterm = confidence_at(front, conf, known, p)
        pr = cterm * data_terms_at(front, match, known)
        best = int(np.argmax(pr))  # first maximum = smallest row, then column
        y, x = (int(v) for v in front[best])
        c_hat = float(cterm[best])

        query = PatchQuery.from_known((y, x), p, known)
        window = None
        if math.isfinite(params.search_radius):
            window = restrict_window((y, x), params.search_radius, (h, w))
        allowed = None
        if labels is not None and labels[y, x] >= 0:
            lab = int(labels[y, x])
            if lab not in allowed_cache:
                allowed_cache[lab] = labels == lab
            allowed = allowed_cache[lab]
        if params.allow_filled_sources:
            searcher.refresh(match, known)
        try:
            res = search(query, window, allowed)
        except NoCandidateError:
            if allowed is None and window is None:
                raise UnfillableError(f"no admissible exemplar for front pixel {(y, x)}") from None
            report.fallbacks.append((y, x))
            try:
                res = search(query, None, None)
            except NoCandidateError:
                raise UnfillableError(f"no admissible exemplar for front pixel {(y, x)}") from None

        qy, qx = res.center
        y0, y1 = max(y - half, 0), min(y + half + 1, h)
        x0, x1 = max(x - half, 0), min(x + half + 1, w)
        ly, lx = np.nonzero(target[y0:y1, x0:x1])
        ty, tx = ly + y0, lx + x0
        sy, sx = ty - y + qy, tx - x + qx
        out[ty, tx] = out[sy, sx]
        if match is not out:
            match[ty, tx] = match[sy, sx]
        conf[ty, tx] = c_hat
        target[ty, tx] = False
        known[ty, tx] = True

        report.iterations += 1
        report.examined += res.candidates_examined
        report.pruned += res.candidates_pruned
        report.steps.append(FillStep((y, x), (qy, qx), np.column_stack([ty, tx])))

    report.seconds = max(time.perf_counter() - t0, 1e-9)
    report.confidence = conf
    return Raster(out), report


def verify_verbatim(result: Raster, report: FillReport) -> bool:
    """Check every filled pixel equals the exemplar pixel at the same offset."""
    data = result.data
    for step in report.steps:
        ty, tx = step.filled[:, 0], step.filled[:, 1]
        sy = ty - step.target[0] + step.exemplar[0]
        sx = tx - step.target[1] + step.exemplar[1]
        if not np.array_equal(data[ty, tx], data[sy, sx]):
            return False
    return True


def bilateral_filter(raster: Raster, params: BilateralParams | None = None) -> Raster:
    """Normalized bilateral smoothing with Gaussian spatial and range kernels.

    Each output pixel is ``sum_q I_q f(|p-q|) g(|I_p-I_q|) / k_p`` over the
    square window of the given radius clipped to the image, where
    ``k_p = sum_q f g``. The range distance uses all channels.
    """
    params = params or BilateralParams()
    data = raster.data
    h, w, _ = data.shape
    r = params.radius
    num = np.zeros_like(data)
    den = np.zeros((h, w))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            fs = math.exp(-(dy * dy + dx * dx) / (2.0 * params.sigma_s ** 2))
            py0, py1 = max(0, -dy), min(h, h - dy)
            px0, px1 = max(0, -dx), min(w, w - dx)
            if py1 <= py0 or px1 <= px0:
                continue
            centre = data[py0:py1, px0:px1]
            other = data[py0 + dy:py1 + dy, px0 + dx:px1 + dx]
            dist2 = ((centre - other) ** 2).sum(axis=2)
            wgt = fs * np.exp(-dist2 / (2.0 * params.sigma_r ** 2))
            num[py0:py1, px0:px1] += wgt[:, :, None] * (other - centre)
            den[py0:py1, px0:px1] += wgt
    # accumulating offsets from I_p keeps a constant image an exact fixed point
    return Raster(np.clip(data + num / den[:, :, None], 0.0, 255.0))


def global_patch_energy(raster: Raster, mask: RegionMask, patch_size: int) -> float:
    """Sum over patches touching the original target region of the best SSD
    against any patch lying wholly in the source region.

    Only patches fully inside the image are scored; the raster must already be
    completely filled.
    """
    mask.check_pairs(raster)
    half = patch_size // 2
    h, w = raster.shape
    searcher = PatchSearcher(raster.data, mask.source, patch_size)
    if not searcher.admissible.any():
        raise NoCandidateError("source region admits no full patch")
    m = mask.flags.astype(np.int64)
    table = np.zeros((h + 1, w + 1), dtype=np.int64)
    table[1:, 1:] = m.cumsum(0).cumsum(1)
    p = patch_size
    touch = (table[p:, p:] - table[:-p, p:] - table[p:, :-p] + table[:-p, :-p]) > 0
    full = np.ones((p, p), dtype=bool)
    total = 0.0
    for ty, tx in np.argwhere(touch):
        q = PatchQuery((ty + half, tx + half), p, full)
        total += searcher.sea(q).ssd
    return float(total)
