"""Seeded synthetic test images, so the repository ships no binary assets."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import Raster, RegionMask


def periodic_tile(period: int = 5, shape=(45, 45), channels: int = 1, seed: int = 0) -> Raster:
    """Image tiled by one random ``period x period`` block of distinct values."""
    rng = np.random.default_rng(seed)
    n = period * period
    step = 250 // n if n <= 250 else 1
    tile = (rng.permutation(n) * step).reshape(period, period).astype(np.float64)
    if channels == 3:
        tile = np.stack([tile, 250 - tile, (tile * 7) % 251], axis=-1)
    reps = (-(-shape[0] // period), -(-shape[1] // period)) + ((1,) if channels == 3 else ())
    img = np.tile(tile, reps)[: shape[0], : shape[1]]
    return Raster(img)


def centered_gap(shape, size: int = 20) -> RegionMask:
    h, w = shape
    m = np.zeros((h, w), dtype=bool)
    y0, x0 = (h - size) // 2, (w - size) // 2
    m[y0:y0 + size, x0:x0 + size] = True
    return RegionMask(m)


def _texture(rng, h, w, palette, kind):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if kind == "stripes":
        base = 0.5 + 0.5 * np.sin(2 * np.pi * (xx * 0.9 + yy * 0.4) / 11.0)
        base += 0.15 * rng.standard_normal((h, w))
    else:
        base = ndimage.gaussian_filter(rng.standard_normal((h, w)), 2.0)
        base = (base - base.min()) / (np.ptp(base) + 1e-12)
        base += 0.08 * rng.standard_normal((h, w))
    base = np.clip(base, 0.0, 1.0)
    lo, hi = np.asarray(palette[0], float), np.asarray(palette[1], float)
    return lo + base[:, :, None] * (hi - lo)


def two_texture(width: int = 400, height: int = 300, seed: int = 0) -> Raster:
    """RGB image: warm stripes on the left half, cool blotches on the right."""
    rng = np.random.default_rng(seed)
    half = width // 2
    left = _texture(rng, height, half, ((120, 40, 20), (250, 170, 60)), "stripes")
    right = _texture(rng, height, width - half, ((10, 60, 90), (80, 160, 240)), "blotches")
    img = np.concatenate([left, right], axis=1)
    return Raster(np.round(np.clip(img, 0, 254)))


def blob_mask(shape, fraction: float = 0.10, seed: int = 0, margin: int = 12) -> RegionMask:
    """Union of seeded discs and rectangles covering at least ``fraction`` of the image."""
    rng = np.random.default_rng(seed)
    h, w = shape
    m = np.zeros((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    scale = max(3, int(min(h, w) * 0.06))
    while m.mean() < fraction:
        cy = int(rng.integers(margin, h - margin))
        cx = int(rng.integers(margin, w - margin))
        if rng.random() < 0.5:
            r = int(rng.integers(scale // 2 + 1, scale + 2))
            m |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        else:
            hh = int(rng.integers(2, scale + 1))
            ww = int(rng.integers(scale, 3 * scale))
            if rng.random() < 0.5:
                hh, ww = ww, hh
            m[max(cy - hh // 2, margin):min(cy + hh // 2 + 1, h - margin),
              max(cx - ww // 2, margin):min(cx + ww // 2 + 1, w - margin)] = True
    return RegionMask(m)


def two_constant(shape=(128, 128), levels=(60.0, 200.0), sigma: float = 10.0, seed: int = 0):
    """Disc at ``levels[1]`` on a ``levels[0]`` background plus Gaussian noise.

    Returns ``(raster, truth)`` with ``truth`` True inside the disc.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    truth = (yy - h / 2 + 0.5) ** 2 + (xx - w / 2 + 0.5) ** 2 <= (0.3 * min(h, w)) ** 2
    img = np.where(truth, levels[1], levels[0]).astype(np.float64)
    if sigma > 0:
        img = img + sigma * rng.standard_normal((h, w))
    return Raster(np.clip(img, 0, 255)), truth


EIGHT_COLORS = np.array([[r, g, b] for r in (30, 225) for g in (30, 225) for b in (30, 225)], dtype=float)


def eight_colors(size: int = 32, seed: int = 0) -> Raster:
    """Vertical bands of the eight RGB-cube corner colours (pairwise distance >= 195)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(8)
    band = np.repeat(order, -(-size // 8))[:size]
    img = EIGHT_COLORS[band][None, :, :].repeat(size, axis=0)
    return Raster(img)
