"""Two-phase piecewise-constant and piecewise-smooth Mumford-Shah tools.

Colour rasters are segmented on their channel mean. ``phi > 0`` is phase 1
(mean ``c1``), ``phi <= 0`` is phase 2 (mean ``c2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg

from .image import Raster, RegionMask


class EvolutionDiverged(RuntimeError):
    pass


class PoissonNotConverged(RuntimeError):
    pass


@dataclass
class LevelSetField:
    phi: np.ndarray
    c1: float = 0.0
    c2: float = 0.0
    eps: float = 1.5

    @property
    def phase1(self) -> np.ndarray:
        return self.phi > 0


@dataclass
class SegParams:
    lam: np.ndarray | float = 1.0
    nu: float = 0.01 * 255.0 ** 2
    mu_smooth: float = 1.0
    dt: float = 5e-4
    max_iters: int = 500
    tol: float = 1e-4
    eps: float = 1.5
    reinit_every: int = 25

    def __post_init__(self):
        if np.any(np.asarray(self.lam) < 0) or self.nu < 0 or self.mu_smooth < 0:
            raise ValueError("segmentation weights must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class SegResult:
    field: LevelSetField
    energies: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _gray(raster) -> np.ndarray:
    data = raster.data if isinstance(raster, Raster) else np.asarray(raster, dtype=np.float64)
    return data.mean(axis=2) if data.ndim == 3 else data


def _lam(params: SegParams, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(params.lam, dtype=np.float64), shape)


def checkerboard_phi(shape, period: float = 5.0) -> np.ndarray:
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return np.sin(np.pi * xx / period) * np.sin(np.pi * yy / period)


def circle_phi(shape, center=None, radius=None) -> np.ndarray:
    h, w = shape
    cy, cx = center if center is not None else (h / 2.0, w / 2.0)
    r = radius if radius is not None else min(h, w) / 4.0
    yy, xx = np.mgrid[0:h, 0:w]
    return r - np.hypot(yy - cy, xx - cx)


def heaviside(phi, eps: float = 1.5):
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(phi / eps))


def dirac(phi, eps: float = 1.5):
    return (eps / np.pi) / (eps ** 2 + phi ** 2)


def curvature(phi: np.ndarray) -> np.ndarray:
    """``div(grad phi / |grad phi|)`` with central differences, zero-flux border."""
    p = np.pad(phi, 1, mode="edge")
    fx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    fy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    fxx = p[1:-1, 2:] - 2 * phi + p[1:-1, :-2]
    fyy = p[2:, 1:-1] - 2 * phi + p[:-2, 1:-1]
    fxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4.0
    den = (fx ** 2 + fy ** 2) ** 1.5 + 1e-8
    return (fxx * fy ** 2 - 2 * fx * fy * fxy + fyy * fx ** 2) / den


def region_means(raster, phi, lam=1.0, previous=None) -> tuple[float, float]:
    """lambda-weighted mean intensity of each phase.

    An empty (or zero-weight) phase keeps its ``previous`` mean, or the global
    mean if none is given.
    """
    img = _gray(raster)
    phi = phi.phi if isinstance(phi, LevelSetField) else phi
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), img.shape)
    inside = phi > 0
    out = []
    for i, sel in enumerate((inside, ~inside)):
        wsum = lam[sel].sum()
        if wsum > 0:
            out.append(float((lam[sel] * img[sel]).sum() / wsum))
        elif previous is not None:
            out.append(float(previous[i]))
        else:
            out.append(float(img.mean()))
    return out[0], out[1]


def contour_length(phi: np.ndarray, eps: float = 1.5) -> float:
    """Length of the zero set as the total variation of the smoothed Heaviside."""
    gy, gx = np.gradient(heaviside(phi, eps))
    return float(np.hypot(gx, gy).sum())


def ms_energy(raster, phi, params: SegParams | None = None, c=None) -> float:
    """Piecewise-constant energy: weighted squared deviation from the phase
    means plus ``nu`` times the contour length."""
    params = params or SegParams()
    img = _gray(raster)
    phi_arr = phi.phi if isinstance(phi, LevelSetField) else phi
    lam = _lam(params, img.shape)
    c1, c2 = c if c is not None else region_means(img, phi_arr, lam)
    inside = phi_arr > 0
    data = (lam * np.where(inside, (img - c1) ** 2, (img - c2) ** 2)).sum()
    length = contour_length(phi_arr, params.eps) if params.nu > 0 else 0.0
    return float(data + params.nu * length)


def reinitialize(phi: np.ndarray) -> np.ndarray:
    """Signed distance to the zero set, preserving the phase of every pixel."""
    inside = phi > 0
    if inside.all() or not inside.any():
        return phi.copy()
    d_in = ndimage.distance_transform_edt(inside)
    d_out = ndimage.distance_transform_edt(~inside)
    return np.where(inside, d_in - 0.5, -(d_out - 0.5))


def evolve_level_set(raster, phi=None, params: SegParams | None = None) -> SegResult:
    """Gradient descent on the piecewise-constant energy.

    Each trial step is ``phi += dt * dirac(phi) * (lam*((u0-c2)**2 - (u0-c1)**2)
    + nu*curvature(phi))`` followed by a mean update. A step that raises the
    energy is rejected and ``dt`` halved; five accepted steps in a row grow
    ``dt`` by 1.2 up to its initial value. Stops when the fraction of pixels
    changing phase stays below ``tol`` for 10 accepted steps.
    """
    # overflow is detected explicitly via the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        return _evolve(raster, phi, params or SegParams())


def _evolve(raster, phi, params):
    img = _gray(raster)
    lam = _lam(params, img.shape)
    if phi is None:
        phi = checkerboard_phi(img.shape)
    phi = np.array(phi.phi if isinstance(phi, LevelSetField) else phi, dtype=np.float64)
    c = region_means(img, phi, lam)
    energy = ms_energy(img, phi, params, c)
    result = SegResult(LevelSetField(phi, c[0], c[1], params.eps), [energy])
    dt = params.dt
    streak = 0
    accepted = 0
    quiet = []
    d1 = d2 = None
    for it in range(params.max_iters):
        result.iterations = it + 1
        if d1 is None:
            d1 = (img - c[0]) ** 2
            d2 = (img - c[1]) ** 2
        force = lam * (d2 - d1)
        if params.nu > 0:
            force = force + params.nu * curvature(phi)
        step = dirac(phi, params.eps) * force
        trial = phi + dt * step
        if not np.all(np.isfinite(trial)):
            raise EvolutionDiverged(f"evolution diverged at iteration {it}")
        c_new = region_means(img, trial, lam, previous=c)
        e_new = ms_energy(img, trial, params, c_new)
        if e_new > energy + 1e-12 * max(1.0, abs(energy)):
            dt *= 0.5
            streak = 0
            if dt < params.dt * 1e-8:
                result.converged = True
                break
            continue
        flipped = np.count_nonzero((trial > 0) != (phi > 0))
        phi, c, energy = trial, c_new, e_new
        d1 = d2 = None
        accepted += 1
        result.energies.append(energy)
        streak += 1
        if streak >= 5:
            dt = min(dt * 1.2, params.dt)
            streak = 0
        if params.reinit_every and accepted % params.reinit_every == 0:
            re = reinitialize(phi)
            e_re = ms_energy(img, re, params, c)
            if e_re <= energy:
                phi, energy = re, e_re
                result.energies[-1] = energy
        quiet.append(flipped / phi.size)
        if len(quiet) >= 10 and sum(quiet[-10:]) < params.tol:
            result.converged = True
            break
    result.field = LevelSetField(phi, c[0], c[1], params.eps)
    return result


def region_laplacian(region: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Graph Laplacian ``degree - adjacency`` over the 4-connected region.

    Edges leaving the region are dropped, which is the zero-flux condition.
    Returns the matrix and the ``(N, 2)`` pixel positions it indexes.
    """
    h, w = region.shape
    idx = -np.ones((h, w), dtype=np.int64)
    pts = np.argwhere(region)
    idx[pts[:, 0], pts[:, 1]] = np.arange(len(pts))
    rows, cols = [], []
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    r = np.concatenate(rows)
    cc = np.concatenate(cols)
    n = len(pts)
    adj = sparse.coo_matrix((np.ones(2 * len(r)), (np.concatenate([r, cc]), np.concatenate([cc, r]))),
                            shape=(n, n)).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sparse.diags(deg) - adj).tocsr(), pts


def solve_damped_poisson(raster, region, params: SegParams | None = None, tol: float = 1e-4,
                         max_iter: int = 10000) -> np.ndarray:
    """Smooth approximation ``u`` with ``lam*(u - u0) = mu * laplace(u)`` on ``region``.

    ``region`` is a boolean grid, a :class:`RegionMask` or a level-set array
    (``phi > 0`` is used). Zero-flux at the region border. Pixels outside the
    region keep ``u0``. Solved by Jacobi-preconditioned conjugate gradients.
    """
    params = params or SegParams()
    img = _gray(raster)
    if isinstance(region, RegionMask):
        region = region.flags
    elif isinstance(region, LevelSetField):
        region = region.phi > 0
    elif np.asarray(region).dtype != bool:
        region = np.asarray(region) > 0
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("region is empty")
    lam = _lam(params, img.shape)
    out = img.copy()
    if params.mu_smooth == 0:
        return out
    lap, pts = region_laplacian(region)
    lv = lam[pts[:, 0], pts[:, 1]]
    u0 = img[pts[:, 0], pts[:, 1]]
    a = (sparse.diags(lv) + params.mu_smooth * lap).tocsr()
    b = lv * u0
    diag = a.diagonal()
    precond = sparse.diags(1.0 / np.where(diag > 0, diag, 1.0))
    u, info = cg(a, b, x0=u0.copy(), rtol=1e-14, atol=tol * 1e-4, maxiter=max_iter, M=precond)
    res = np.abs(lv * (u - u0) + params.mu_smooth * (lap @ u)).max()
    if not res < tol:
        raise PoissonNotConverged(f"damped Poisson solve stopped with residual {res:.3e}")
    out[pts[:, 0], pts[:, 1]] = u
    return out


def poisson_residual(u, raster, region, params: SegParams | None = None) -> float:
    """``max |lam*(u - u0) - mu*laplace(u)|`` over the region (zero-flux Laplacian)."""
    params = params or SegParams()
    img = _gray(raster)
    region = np.asarray(region, dtype=bool)
    lap, pts = region_laplacian(region)
    lv = _lam(params, img.shape)[pts[:, 0], pts[:, 1]]
    uu = u[pts[:, 0], pts[:, 1]]
    return float(np.abs(lv * (uu - img[pts[:, 0], pts[:, 1]]) + params.mu_smooth * (lap @ uu)).max())


def boundary_flux(u, raster, region, params: SegParams | None = None) -> float:
    """Net flux of ``u`` through the region border.

    By the divergence theorem it equals ``sum(lam*(u - u0)) / mu`` over the
    region, which vanishes under a zero-flux boundary.
    """
    params = params or SegParams()
    img = _gray(raster)
    region = np.asarray(region, dtype=bool)
    lam = _lam(params, img.shape)
    return float(abs((lam[region] * (u[region] - img[region])).sum()) / params.mu_smooth)


def piecewise_smooth(raster, phi, params: SegParams | None = None) -> np.ndarray:
    """``u1`` on phase 1 and ``u2`` on phase 2, each from its own damped Poisson solve."""
    phi = phi.phi if isinstance(phi, LevelSetField) else phi
    inside = phi > 0
    out = _gray(raster).copy()
    for sel in (inside, ~inside):
        if sel.any():
            u = solve_damped_poisson(raster, sel, params)
            out[sel] = u[sel]
    return out


def structure_mask_from_segmentation(phi) -> tuple[RegionMask, RegionMask]:
    """Complementary masks ``(phi > 0, phi <= 0)``."""
    phi = phi.phi if isinstance(phi, LevelSetField) else np.asarray(phi)
    inside = phi > 0
    return RegionMask(inside), RegionMask(~inside)


def phase_labels(phi) -> np.ndarray:
    """0 for phase 1, 1 for phase 2; usable as ``labels`` for :func:`inpaint`."""
    phi = phi.phi if isinstance(phi, LevelSetField) else np.asarray(phi)
    return np.where(phi > 0, 0, 1)
