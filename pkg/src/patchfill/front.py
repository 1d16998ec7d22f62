"""Fill front, confidence term, isophote data term and fill priority.

Coordinates are ``(row, col)`` pairs and 2-vectors are ``(dy, dx)``.
"""
from __future__ import annotations

import numpy as np

from .image import Raster, RegionMask

ALPHA = 255.0


def _flags(mask) -> np.ndarray:
    return mask.flags if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool)


def front_flags(target: np.ndarray, known: np.ndarray | None = None) -> np.ndarray:
    """Boolean grid of target pixels with at least one known 4-neighbour."""
    if known is None:
        known = ~target
    near = np.zeros_like(target)
    near[1:, :] |= known[:-1, :]
    near[:-1, :] |= known[1:, :]
    near[:, 1:] |= known[:, :-1]
    near[:, :-1] |= known[:, 1:]
    return target & near


def extract_front(mask) -> np.ndarray:
    """Front pixel positions as an ``(N, 2)`` int array in row-major order."""
    return np.argwhere(front_flags(_flags(mask)))


def _windows(arr: np.ndarray, points: np.ndarray, r: int, fill) -> np.ndarray:
    """``(N, 2r+1, 2r+1, ...)`` neighbourhoods of ``points``, padded with ``fill``."""
    pad = [(r, r), (r, r)] + [(0, 0)] * (arr.ndim - 2)
    if fill == "edge":
        big = np.pad(arr, pad, mode="edge")
    else:
        big = np.pad(arr, pad, mode="constant", constant_values=fill)
    off = np.arange(-r, r + 1)
    yy = points[:, 0, None, None] + r + off[None, :, None]
    xx = points[:, 1, None, None] + r + off[None, None, :]
    return big[yy, xx]


def normals_at(points, unknown: np.ndarray) -> np.ndarray:
    """Unit normals pointing out of the unknown region, one per position.

    Central differences of a 3x3 box-smoothed indicator (edge-replicated at
    the image border); a vanishing gradient gives the zero vector, which marks
    a degenerate front pixel such as an isolated hole.
    """
    pts = np.asarray(points, dtype=np.intp).reshape(-1, 2)
    win = _windows(unknown.astype(np.float64), pts, 2, "edge")
    box = np.zeros((len(pts), 3, 3))
    for i in range(3):
        for j in range(3):
            box[:, i, j] = win[:, i:i + 3, j:j + 3].sum(axis=(1, 2)) / 9.0
    n = np.stack([-(box[:, 2, 1] - box[:, 0, 1]) / 2.0, -(box[:, 1, 2] - box[:, 1, 0]) / 2.0], axis=-1)
    norm = np.hypot(n[:, 0], n[:, 1])
    ok = norm > 1e-12
    n[ok] /= norm[ok][:, None]
    n[~ok] = 0.0
    return n


def fill_normals(unknown: np.ndarray) -> np.ndarray:
    """:func:`normals_at` evaluated on every pixel, ``(H, W, 2)``."""
    h, w = unknown.shape
    pts = np.argwhere(np.ones((h, w), dtype=bool))
    return normals_at(pts, unknown).reshape(h, w, 2)


def _one_sided(lum: np.ndarray, known: np.ndarray, axis: int) -> np.ndarray:
    # forward/backward differences over known pairs; keep the larger magnitude
    fwd = np.zeros_like(lum)
    bwd = np.zeros_like(lum)
    has_f = np.zeros(lum.shape, dtype=bool)
    has_b = np.zeros(lum.shape, dtype=bool)
    lo = [slice(None)] * lum.ndim
    hi = [slice(None)] * lum.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    pair = known[lo] & known[hi]
    d = lum[hi] - lum[lo]
    fwd[lo] = np.where(pair, d, 0.0)
    has_f[lo] = pair
    bwd[hi] = np.where(pair, d, 0.0)
    has_b[hi] = pair
    out = np.where(np.abs(bwd) > np.abs(fwd), bwd, fwd)
    return np.where(has_f | has_b, out, 0.0)


def known_gradient(data: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Intensity gradient ``(..., 2)`` using only known pixels.

    Channels are averaged first. Each partial derivative is the larger of the
    forward/backward differences whose two pixels are both known; unknown
    pixels get a zero gradient. The last two axes of ``known`` are (row, col).
    """
    lum = data.mean(axis=-1) if data.ndim == known.ndim + 1 else np.asarray(data, dtype=np.float64)
    ay, ax = known.ndim - 2, known.ndim - 1
    g = np.stack([_one_sided(lum, known, ay), _one_sided(lum, known, ax)], axis=-1)
    g[~known] = 0.0
    return g


def isophotes_at(points, data: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Isophote vectors for front pixels.

    A front pixel's own value is unknown, so it borrows the strongest known
    gradient in its 3x3 neighbourhood (first in raster order on ties) and
    rotates it by 90 degrees.
    """
    pts = np.asarray(points, dtype=np.intp).reshape(-1, 2)
    d = data if data.ndim == 3 else data[:, :, None]
    lum = _windows(d.mean(axis=2), pts, 2, 0.0)
    kn = _windows(known, pts, 2, False)
    g = known_gradient(lum, kn)[:, 1:4, 1:4].reshape(len(pts), 9, 2)
    mag = np.where(kn[:, 1:4, 1:4].reshape(len(pts), 9), np.hypot(g[..., 0], g[..., 1]), -1.0)
    k = np.argmax(mag, axis=1)
    grad = g[np.arange(len(pts)), k]
    return np.stack([-grad[:, 1], grad[:, 0]], axis=-1)


def confidence_map_sums(conf: np.ndarray, known: np.ndarray):
    """Integral images of known confidence, for vectorized patch sums."""
    c = np.where(known, conf, 0.0)
    table = np.zeros((c.shape[0] + 1, c.shape[1] + 1))
    table[1:, 1:] = c.cumsum(0).cumsum(1)
    return table


def confidence_at(points, conf: np.ndarray, known: np.ndarray, patch_size: int,
                  table: np.ndarray | None = None) -> np.ndarray:
    """Vectorized confidence term for an ``(N, 2)`` array of positions."""
    h, w = known.shape
    half = patch_size // 2
    pts = np.asarray(points, dtype=np.intp).reshape(-1, 2)
    if table is None:
        table = confidence_map_sums(conf, known)
    y0 = np.clip(pts[:, 0] - half, 0, h)
    y1 = np.clip(pts[:, 0] + half + 1, 0, h)
    x0 = np.clip(pts[:, 1] - half, 0, w)
    x1 = np.clip(pts[:, 1] + half + 1, 0, w)
    s = table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
    area = (y1 - y0) * (x1 - x0)
    return s / area


def confidence_term(p, conf: np.ndarray, mask, patch_size: int) -> float:
    """Mean confidence of the known pixels in the patch around ``p``.

    ``mask`` marks pixels that are still unknown; the denominator counts all
    patch pixels that fall inside the image.
    """
    _check_patch(patch_size)
    unknown = _flags(mask)
    h, w = unknown.shape
    y, x = p
    if not (0 <= y < h and 0 <= x < w):
        raise IndexError(f"position {p} outside image {h}x{w}")
    half = patch_size // 2
    ys = slice(max(y - half, 0), min(y + half + 1, h))
    xs = slice(max(x - half, 0), min(x + half + 1, w))
    c = np.where(unknown[ys, xs], 0.0, conf[ys, xs])
    return float(c.sum() / c.size)


def data_term(p, raster: Raster, normal, mask) -> float:
    """``|isophote . normal| / 255`` at front pixel ``p``; 0 for a degenerate normal."""
    n = np.asarray(normal, dtype=np.float64)
    if not np.any(n):
        return 0.0
    known = ~_flags(mask)
    iso = isophotes_at(np.array([p]), raster.data, known)[0]
    return float(abs(iso @ n) / ALPHA)


def priority(p, raster: Raster, mask, conf: np.ndarray, patch_size: int, normal=None) -> float:
    """Fill priority: confidence term times data term."""
    unknown = _flags(mask)
    if normal is None:
        normal = normals_at(np.array([p]), unknown)[0]
    return confidence_term(p, conf, unknown, patch_size) * data_term(p, raster, normal, unknown)


def data_terms_at(points, data: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Vectorized data term for front positions; ``known`` marks trusted pixels."""
    pts = np.asarray(points, dtype=np.intp).reshape(-1, 2)
    normals = normals_at(pts, ~known)
    iso = isophotes_at(pts, data, known)
    return np.abs(np.sum(iso * normals, axis=1)) / ALPHA


def priorities_at(points, data: np.ndarray, known: np.ndarray, conf: np.ndarray,
                  patch_size: int) -> np.ndarray:
    """Vectorized priorities for front positions."""
    return confidence_at(points, conf, known, patch_size) * data_terms_at(points, data, known)


def initial_confidence(mask) -> np.ndarray:
    return (~_flags(mask)).astype(np.float64)


def _check_patch(patch_size: int) -> None:
    if patch_size < 3 or patch_size % 2 == 0:
        raise ValueError("patch size must be odd and at least 3")
