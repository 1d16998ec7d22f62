"""Self-organizing map colour layers and damage routing."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .engine import FillReport, InpaintParams, inpaint
from .image import Raster, RegionMask

UNASSIGNED = -1


@dataclass
class SomGrid:
    rows: int
    cols: int
    weights: np.ndarray  # (rows * cols, 3), row-major neuron order
    epoch: int = 0
    lr0: float = 0.5
    radius0: float = 2.0
    hits: np.ndarray | None = None
    epoch_errors: list | None = None

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def lattice(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.size), self.cols)
        return np.column_stack([r, c]).astype(np.float64)


@dataclass
class LayerMap:
    index: np.ndarray  # (H, W) int, UNASSIGNED for damaged pixels
    count: int


def _rgb(raster: Raster) -> np.ndarray:
    d = raster.data
    return np.repeat(d, 3, axis=2) if d.shape[2] == 1 else d


@numba.njit(cache=True)
def _train_epoch(w, lattice, samples, order, step0, total, lr0, radius0, lr_end, radius_end):
    n_units = w.shape[0]
    for k in range(order.shape[0]):
        x = samples[order[k]]
        frac = (step0 + k) / max(total - 1, 1)
        lr = lr0 * (lr_end / lr0) ** frac
        rad = radius0 * (radius_end / radius0) ** frac
        best = 0
        best_d = np.inf
        for u in range(n_units):
            d = 0.0
            for ch in range(3):
                t = w[u, ch] - x[ch]
                d += t * t
            if d < best_d:
                best_d = d
                best = u
        for u in range(n_units):
            dy = lattice[u, 0] - lattice[best, 0]
            dx = lattice[u, 1] - lattice[best, 1]
            g2 = dy * dy + dx * dx
            # neighbourhood is truncated at the current radius
            if g2 > rad * rad:
                continue
            h = lr * np.exp(-g2 / (2.0 * rad * rad))
            for ch in range(3):
                w[u, ch] += h * (x[ch] - w[u, ch])


def bmu(samples: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best-matching unit (lowest index on ties) and its distance per sample."""
    d2 = ((samples[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
    idx = np.argmin(d2, axis=1)
    return idx, np.sqrt(d2[np.arange(len(samples)), idx])


def quantization_error(samples: np.ndarray, weights: np.ndarray) -> float:
    return float(bmu(samples, weights)[1].mean())


def train_som(raster: Raster, mask: RegionMask | None = None, m: int = 4, n: int = 4, epochs: int = 10,
              lr0: float = 0.5, radius0: float | None = None, seed: int = 0) -> SomGrid:
    """Online SOM over the RGB values of the known pixels.

    Learning rate and neighbourhood radius decay exponentially over all
    training steps to ``lr0 / 100`` and 0.5. Pixels in ``mask`` are never
    sampled.
    """
    if m * n < 2:
        raise ValueError("SOM needs at least two neurons")
    if m * n > 255:
        raise ValueError("more than 255 neurons leaves units that never win; use a smaller grid")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    rgb = _rgb(raster)
    keep = np.ones(raster.shape, dtype=bool) if mask is None else ~mask.flags
    samples = np.ascontiguousarray(rgb[keep], dtype=np.float64)
    if len(samples) == 0:
        raise ValueError("no known pixels to train on")
    if radius0 is None:
        radius0 = max(m, n) / 2.0
    radius0 = max(float(radius0), 0.5)
    rng = np.random.default_rng(seed)
    som = SomGrid(m, n, samples[rng.integers(0, len(samples), m * n)].copy(), 0, lr0, radius0)
    lattice = som.lattice()
    total = epochs * len(samples)
    som.epoch_errors = []
    for e in range(epochs):
        order = rng.permutation(len(samples))
        _train_epoch(som.weights, lattice, samples, order, e * len(samples), total,
                     lr0, radius0, lr0 / 100.0, 0.5)
        som.epoch = e + 1
        som.epoch_errors.append(quantization_error(samples, som.weights))
    np.clip(som.weights, 0.0, 255.0, out=som.weights)
    som.hits = np.bincount(bmu(samples, som.weights)[0], minlength=som.size)
    return som


def assign_layers(raster: Raster, mask: RegionMask | None, som: SomGrid) -> LayerMap:
    """Layer index = BMU of each known pixel; damaged pixels stay unassigned."""
    rgb = _rgb(raster)
    idx = np.full(raster.shape, UNASSIGNED, dtype=np.int64)
    keep = np.ones(raster.shape, dtype=bool) if mask is None else ~mask.flags
    idx[keep] = bmu(rgb[keep], som.weights)[0]
    return LayerMap(idx, som.size)


def route_damaged(layer_map: LayerMap, mask: RegionMask, radius: int = 2) -> list[RegionMask]:
    """Split the target region by the majority layer of nearby known pixels.

    Votes come from known pixels within Chebyshev ``radius``; ties go to the
    lowest layer index, and a pixel with no known neighbour retries with the
    radius doubled.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    target = mask.flags
    known = ~target
    if not known.any():
        raise ValueError("no known context: target covers the whole image")
    h, w = target.shape
    route = np.full((h, w), UNASSIGNED, dtype=np.int64)
    pending = target.copy()
    r = radius
    while pending.any():
        counts = np.stack([_box_count((layer_map.index == k) & known, r) for k in range(layer_map.count)])
        votes = counts[:, pending]
        has = votes.sum(axis=0) > 0
        ys, xs = np.nonzero(pending)
        win = np.argmax(votes, axis=0)
        route[ys[has], xs[has]] = win[has]
        pending[ys[has], xs[has]] = False
        r *= 2
    return [RegionMask(route == k) for k in range(layer_map.count)]


def _box_count(ind: np.ndarray, r: int) -> np.ndarray:
    h, w = ind.shape
    t = np.zeros((h + 1, w + 1), dtype=np.int64)
    t[1:, 1:] = ind.astype(np.int64).cumsum(0).cumsum(1)
    yy, xx = np.mgrid[0:h, 0:w]
    y0, y1 = np.clip(yy - r, 0, h), np.clip(yy + r + 1, 0, h)
    x0, x1 = np.clip(xx - r, 0, w), np.clip(xx + r + 1, 0, w)
    return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


def inpaint_by_layers(raster: Raster, mask: RegionMask, m: int = 4, n: int = 4, epochs: int = 10,
                      seed: int = 0, params: InpaintParams | None = None, route_radius: int = 2,
                      som: SomGrid | None = None) -> tuple[Raster, FillReport, LayerMap]:
    """Inpaint with each damaged pixel's exemplars restricted to its routed layer.

    One greedy pass over the whole target region; a front pixel only accepts
    exemplars centred on known pixels of its layer. With a single layer this
    is plain :func:`inpaint`.
    """
    if m * n == 1:
        out, rep = inpaint(raster, mask, params)
        return out, rep, LayerMap(np.where(mask.flags, UNASSIGNED, 0), 1)
    if som is None:
        som = train_som(raster, mask, m, n, epochs, seed=seed)
    lm = assign_layers(raster, mask, som)
    labels = lm.index.copy()
    for k, part in enumerate(route_damaged(lm, mask, route_radius)):
        labels[part.flags] = k
    out, rep = inpaint(raster, mask, params, labels=labels)
    return out, rep, lm
