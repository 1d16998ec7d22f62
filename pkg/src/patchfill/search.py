"""Exemplar search: partial-mask SSD, exhaustive scan and successive elimination.

The successive-elimination search (SEA) never skips the true optimum. Every
candidate gets a cheap lower bound on its SSD built from row-run sums:
for a run of ``L`` valid cells, Cauchy-Schwarz gives
``sum(d**2) >= sum(d)**2 / L``. Runs and channels are bounded separately
and added. Candidates are then evaluated in ascending-bound order until the
next bound exceeds the incumbent. Exact SSDs come from the same routine the
exhaustive scan uses, so both strategies return bit-identical results.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .image import Raster, RegionMask

_CHUNK = 4096


class NoCandidateError(RuntimeError):
    """No admissible exemplar patch exists for a query."""


class Window(NamedTuple):
    """Half-open rectangle ``[top, bottom) x [left, right)`` of candidate centres."""

    top: int
    left: int
    bottom: int
    right: int

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def width(self) -> int:
        return self.right - self.left


@dataclass(frozen=True)
class PatchQuery:
    center: tuple[int, int]
    patch_size: int
    validity: np.ndarray
    valid_count: int = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.validity, dtype=bool)
        p = self.patch_size
        if p < 3 or p % 2 == 0:
            raise ValueError("patch size must be odd and at least 3")
        if v.shape != (p, p):
            raise ValueError(f"validity must be {p}x{p}")
        object.__setattr__(self, "validity", v)
        object.__setattr__(self, "center", (int(self.center[0]), int(self.center[1])))
        object.__setattr__(self, "valid_count", int(v.sum()))
        if self.valid_count < 1:
            raise ValueError("query has no valid cells")

    @classmethod
    def from_known(cls, center, patch_size: int, known: np.ndarray) -> "PatchQuery":
        """Validity = inside the image and known."""
        h, w = known.shape
        half = patch_size // 2
        y, x = center
        v = np.zeros((patch_size, patch_size), dtype=bool)
        y0, y1 = max(y - half, 0), min(y + half + 1, h)
        x0, x1 = max(x - half, 0), min(x + half + 1, w)
        v[y0 - (y - half):y1 - (y - half), x0 - (x - half):x1 - (x - half)] = known[y0:y1, x0:x1]
        return cls((y, x), patch_size, v)


@dataclass
class MatchResult:
    center: tuple[int, int]
    ssd: float
    candidates_examined: int
    candidates_pruned: int
    # populated only by audited SEA runs: pruned candidates' (bound, true ssd)
    audit: np.ndarray | None = None


def restrict_window(front_pixel, radius: float, image_bounds) -> Window:
    """Square of side ``2*radius + 1`` around ``front_pixel`` clamped to the image.

    ``image_bounds`` is ``(height, width)`` or a :class:`Window`.
    """
    if isinstance(image_bounds, Window):
        b = image_bounds
    else:
        b = Window(0, 0, int(image_bounds[0]), int(image_bounds[1]))
    y, x = front_pixel
    if not np.isfinite(radius):
        return b
    r = int(radius)
    return Window(max(y - r, b.top), max(x - r, b.left), min(y + r + 1, b.bottom), min(x + r + 1, b.right))


class PatchSearcher:
    """Search state for one image and one source region.

    ``data`` is an ``(H, W, C)`` float array; ``source`` marks pixels an
    exemplar patch may cover. Candidate patches must lie fully inside the
    image and fully inside ``source``.
    """

    def __init__(self, data: np.ndarray, source: np.ndarray, patch_size: int, workers: int = 1):
        if patch_size < 3 or patch_size % 2 == 0:
            raise ValueError("patch size must be odd and at least 3")
        self.patch_size = patch_size
        self.half = patch_size // 2
        self.workers = max(1, int(workers))
        self.refresh(data, source)

    def refresh(self, data: np.ndarray, source: np.ndarray | None = None) -> None:
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        self.data = data
        self.flat = data.ravel()
        h, w, c = data.shape
        self.height, self.width, self.channels = h, w, c
        chw = np.moveaxis(data, 2, 0)
        self.rowcum = np.zeros((c, h, w + 1))
        np.cumsum(chw, axis=2, out=self.rowcum[:, :, 1:])
        self.sat = np.zeros((c, h + 1, w + 1))
        np.cumsum(self.rowcum[:, :, 1:], axis=1, out=self.sat[:, 1:, 1:])
        if source is not None:
            self.source = np.asarray(source, dtype=bool)
            p = self.patch_size
            hc, wc = h - p + 1, w - p + 1
            if hc <= 0 or wc <= 0:
                self.admissible = np.zeros((max(hc, 0), max(wc, 0)), dtype=bool)
            else:
                bad = np.zeros((h + 1, w + 1), dtype=np.int64)
                bad[1:, 1:] = (~self.source).astype(np.int64).cumsum(0).cumsum(1)
                box = bad[p:, p:] - bad[:-p, p:] - bad[p:, :-p] + bad[:-p, :-p]
                self.admissible = box == 0

    # -------------------------------------------------------------- layout

    def _layout(self, query: PatchQuery):
        if query.patch_size != self.patch_size:
            raise ValueError("query patch size differs from searcher patch size")
        p, half, c, w = self.patch_size, self.half, self.channels, self.width
        cy, cx = query.center
        dy, dx = np.nonzero(query.validity)
        ty, tx = cy - half + dy, cx - half + dx
        if np.any((ty < 0) | (ty >= self.height) | (tx < 0) | (tx >= w)):
            raise ValueError("query marks cells outside the image as valid")
        target = self.data[ty, tx].ravel()
        offs = ((dy * w + dx)[:, None] * c + np.arange(c)[None, :]).ravel()
        runs = []
        for r in range(p):
            row = query.validity[r]
            if not row.any():
                continue
            edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(np.int8), [0]])))
            for a, b in zip(edges[0::2], edges[1::2]):
                # live values: filled query cells are newer than the prefix sums
                tsum = self.data[cy - half + r, cx - half + a:cx - half + b].sum(axis=0)
                runs.append((r, int(a), int(b), tsum))
        # coarse level: stack vertically adjacent identical runs into rectangles
        rects = []
        for r, a, b, tsum in runs:
            for rect in rects:
                if rect[1] == r and rect[2] == a and rect[3] == b:
                    rect[1] = r + 1
                    rect[4] = rect[4] + tsum
                    break
            else:
                rects.append([r, r + 1, a, b, tsum])
        return target, offs, runs, rects

    def _ssd(self, tl: np.ndarray, target, offs) -> np.ndarray:
        # one row per candidate, reduced along the contiguous axis: the value
        # for a candidate does not depend on which batch it is evaluated in
        out = np.empty(len(tl))
        base = tl * self.channels
        for i in range(0, len(tl), _CHUNK):
            vals = self.flat[base[i:i + _CHUNK, None] + offs[None, :]]
            vals -= target
            vals *= vals
            out[i:i + _CHUNK] = vals.sum(axis=1)
        return out

    def _ssd_parallel(self, tl, target, offs) -> np.ndarray:
        if self.workers == 1 or len(tl) <= _CHUNK:
            return self._ssd(tl, target, offs)
        parts = np.array_split(tl, self.workers)
        with ThreadPoolExecutor(self.workers) as ex:
            return np.concatenate(list(ex.map(lambda t: self._ssd(t, target, offs), parts)))

    def _candidates(self, window: Window | None, allowed: np.ndarray | None):
        """Admissible candidates as (region origin, region shape, flat top-left indices)."""
        half = self.half
        hc, wc = self.admissible.shape
        if window is None:
            y0, x0, y1, x1 = 0, 0, hc, wc
        else:
            y0 = max(window.top - half, 0)
            x0 = max(window.left - half, 0)
            y1 = min(window.bottom - half, hc)
            x1 = min(window.right - half, wc)
        if y1 <= y0 or x1 <= x0:
            return (0, 0), (0, 0), np.empty(0, dtype=np.intp), None
        sub = self.admissible[y0:y1, x0:x1]
        if allowed is not None:
            sub = sub & allowed[y0 + half:y1 + half, x0 + half:x1 + half]
        loc = np.flatnonzero(sub)
        ly, lx = np.divmod(loc, x1 - x0)
        tl = (ly + y0) * self.width + (lx + x0)
        return (y0, x0), (y1 - y0, x1 - x0), tl, loc

    def _center_of(self, tl: int) -> tuple[int, int]:
        y, x = divmod(int(tl), self.width)
        return y + self.half, x + self.half

    def lower_bounds(self, query: PatchQuery, centers) -> np.ndarray:
        """Row-run lower bounds for explicit candidate centres ``(N, 2)``."""
        _, _, runs, _ = self._layout(query)
        pts = np.asarray(centers, dtype=np.intp).reshape(-1, 2)
        ty, tx = pts[:, 0] - self.half, pts[:, 1] - self.half
        out = np.zeros(len(pts))
        return self._run_bounds(ty * self.width + tx, runs)

    def _run_bounds(self, tl: np.ndarray, runs) -> np.ndarray:
        ty, tx = np.divmod(tl, self.width)
        out = np.zeros(len(tl))
        for c in range(self.channels):
            rc = self.rowcum[c]
            for r, a, b, tsum in runs:
                d = rc[ty + r, tx + b] - rc[ty + r, tx + a] - tsum[c]
                out += d * d * (1.0 / (b - a))
        return out

    def _rect_bounds(self, origin, shape, rects) -> np.ndarray:
        """Coarse bound over a candidate region: one Cauchy-Schwarz term per
        rectangle and channel, each read from the summed-area table."""
        y0, x0 = origin
        hh, ww = shape
        out = np.zeros((hh, ww))
        for c in range(self.channels):
            t = self.sat[c]
            for r0, r1, a, b, tsum in rects:
                ya, yb = y0 + r0, y0 + r1
                xa, xb = x0 + a, x0 + b
                d = t[yb:yb + hh, xb:xb + ww] - t[ya:ya + hh, xb:xb + ww]
                d -= t[yb:yb + hh, xa:xa + ww]
                d += t[ya:ya + hh, xa:xa + ww]
                d -= tsum[c]
                d *= d
                d *= 1.0 / ((r1 - r0) * (b - a))
                out += d
        return out

    # ------------------------------------------------------------- search

    def bruteforce(self, query: PatchQuery, window: Window | None = None,
                   allowed: np.ndarray | None = None) -> MatchResult:
        target, offs, _, _ = self._layout(query)
        _, _, tl, _ = self._candidates(window, allowed)
        if len(tl) == 0:
            raise NoCandidateError(f"no admissible exemplar for query at {query.center}")
        ssd = self._ssd_parallel(tl, target, offs)
        k = int(np.argmin(ssd))
        return MatchResult(self._center_of(tl[k]), float(ssd[k]), len(tl), 0)

    def sea(self, query: PatchQuery, window: Window | None = None,
            allowed: np.ndarray | None = None, audit: bool = False) -> MatchResult:
        target, offs, runs, rects = self._layout(query)
        origin, shape, tl, loc = self._candidates(window, allowed)
        n = len(tl)
        if n == 0:
            raise NoCandidateError(f"no admissible exemplar for query at {query.center}")
        # level 0 on every candidate
        bnd = self._rect_bounds(origin, shape, rects).ravel()[loc]

        ssd = np.full(n, np.inf)
        evaluated = np.zeros(n, dtype=bool)
        k0 = min(n, 16)
        first = np.argpartition(bnd, k0 - 1)[:k0] if k0 < n else np.arange(n)
        ssd[first] = self._ssd(tl[first], target, offs)
        evaluated[first] = True
        best = ssd[first].min()

        # level 1 (row runs) only where the coarse bound survives
        live = np.flatnonzero(~evaluated & (bnd <= _threshold(best)))
        if len(rects) < len(runs) and len(live):
            fine = self._run_bounds(tl[live], runs)
            bnd[live] = np.maximum(bnd[live], fine)
            live = live[bnd[live] <= _threshold(best)]

        order = live[np.argsort(bnd[live], kind="stable")]
        step = 256
        i = 0
        while i < len(order):
            chunk = order[i:i + step]
            chunk = chunk[bnd[chunk] <= _threshold(best)]
            if len(chunk) == 0:
                break
            vals = self._ssd(tl[chunk], target, offs)
            ssd[chunk] = vals
            evaluated[chunk] = True
            best = min(best, vals.min())
            i += step
            step = min(step * 2, _CHUNK)

        ties = np.flatnonzero(ssd == best)
        k = ties[0]  # candidates are in row-major order
        examined = int(evaluated.sum())
        result = MatchResult(self._center_of(tl[k]), float(best), examined, n - examined)
        if audit:
            pruned = np.flatnonzero(~evaluated)
            result.audit = np.column_stack([bnd[pruned], self._ssd(tl[pruned], target, offs)])
        return result


def _threshold(best: float) -> float:
    # slack absorbs rounding in the prefix-sum bounds
    return best + 1e-9 * (1.0 + best)


# ------------------------------------------------------------ public API

def _searcher(raster: Raster, mask: RegionMask, patch_size: int) -> PatchSearcher:
    mask.check_pairs(raster)
    return PatchSearcher(raster.data, mask.source, patch_size)


def ssd_partial(query: PatchQuery, candidate_center, raster: Raster, mask: RegionMask | None = None) -> float:
    """SSD between the query and a candidate over the query's valid cells."""
    half = query.patch_size // 2
    cy, cx = candidate_center
    h, w = raster.shape
    if cy - half < 0 or cx - half < 0 or cy + half >= h or cx + half >= w:
        raise ValueError(f"candidate {candidate_center} does not fit inside the image")
    if mask is not None and mask.flags[cy - half:cy + half + 1, cx - half:cx + half + 1].any():
        raise ValueError("candidate not in source region")
    source = np.ones(raster.shape, dtype=bool) if mask is None else mask.source
    s = PatchSearcher(raster.data, source, query.patch_size)
    target, offs, _, _ = s._layout(query)
    tl = np.array([(cy - half) * w + (cx - half)])
    return float(s._ssd(tl, target, offs)[0])


def best_match_bruteforce(query: PatchQuery, raster: Raster, mask: RegionMask,
                          window: Window | None = None, *, allowed=None, workers: int = 1) -> MatchResult:
    """Exhaustive scan; ties go to the smallest row, then column."""
    s = _searcher(raster, mask, query.patch_size)
    s.workers = max(1, workers)
    return s.bruteforce(query, window, allowed)


def best_match_sea(query: PatchQuery, raster: Raster, mask: RegionMask,
                   window: Window | None = None, *, searcher: PatchSearcher | None = None,
                   allowed=None, audit: bool = False) -> MatchResult:
    """Successive-elimination search; same (centre, ssd) as the exhaustive scan."""
    s = searcher if searcher is not None else _searcher(raster, mask, query.patch_size)
    return s.sea(query, window, allowed, audit=audit)


def run_bound(target: np.ndarray, candidate: np.ndarray, validity: np.ndarray) -> float:
    """Row-run bound for explicit ``(P, P, C)`` patches; reference implementation."""
    total = 0.0
    for r in range(validity.shape[0]):
        row = validity[r]
        edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(np.int8), [0]])))
        for a, b in zip(edges[0::2], edges[1::2]):
            d = target[r, a:b].sum(axis=0) - candidate[r, a:b].sum(axis=0)
            total += float((d ** 2).sum() / (b - a))
    return total


def block_bound(target: np.ndarray, candidate: np.ndarray, validity: np.ndarray) -> float:
    """Single-block bound ``sum_c (dS_c)^2 / N`` over all valid cells."""
    v = validity.astype(bool)
    d = target[v].sum(axis=0) - candidate[v].sum(axis=0)
    return float((d ** 2).sum() / v.sum())
