import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patchfill import fixtures
from patchfill.engine import (BilateralParams, FillReport, InpaintParams, UnfillableError, bilateral_filter,
                              global_patch_energy, inpaint, update_confidence, verify_verbatim)
from patchfill.image import Raster, RegionMask


def bilateral_oracle(data, ss, sr, r):
    h, w, c = data.shape
    out = np.zeros_like(data)
    for y in range(h):
        for x in range(w):
            num = np.zeros(c)
            den = 0.0
            for qy in range(max(0, y - r), min(h, y + r + 1)):
                for qx in range(max(0, x - r), min(w, x + r + 1)):
                    f = math.exp(-((qy - y) ** 2 + (qx - x) ** 2) / (2 * ss * ss))
                    g = math.exp(-float(((data[qy, qx] - data[y, x]) ** 2).sum()) / (2 * sr * sr))
                    num += f * g * data[qy, qx]
                    den += f * g
            out[y, x] = num / den
    return out


def energy_oracle(data, mask, p):
    h, w = mask.shape
    r = p // 2
    src = [(y, x) for y in range(r, h - r) for x in range(r, w - r)
           if not mask[y - r:y + r + 1, x - r:x + r + 1].any()]
    total = 0.0
    for y in range(r, h - r):
        for x in range(r, w - r):
            if not mask[y - r:y + r + 1, x - r:x + r + 1].any():
                continue
            a = data[y - r:y + r + 1, x - r:x + r + 1]
            total += min(float(((a - data[sy - r:sy + r + 1, sx - r:sx + r + 1]) ** 2).sum()) for sy, sx in src)
    return total


def test_empty_mask_is_identity(rng):
    r = Raster(rng.integers(0, 256, (12, 12)).astype(float))
    out, rep = inpaint(r, RegionMask.empty(r.shape), InpaintParams(patch_size=5))
    np.testing.assert_array_equal(out.data, r.data)
    assert rep.iterations == 0


def test_single_pixel_in_constant_image():
    d = np.full((11, 11), 77.0)
    m = np.zeros((11, 11), bool)
    m[5, 5] = True
    d[5, 5] = 0.0
    out, rep = inpaint(Raster(d), RegionMask(m), InpaintParams(patch_size=5))
    assert out.data[5, 5, 0] == 77.0 and rep.iterations == 1


@pytest.mark.parametrize("patch", [5, 9])
def test_periodic_gap_is_restored(patch):
    truth = fixtures.periodic_tile(5, (45, 45), seed=0)
    mask = fixtures.centered_gap(truth.shape, 20)
    damaged = truth.copy_data()
    damaged[mask.flags] = 0
    out, rep = inpaint(Raster(damaged), mask, InpaintParams(patch_size=patch))
    np.testing.assert_array_equal(out.data, truth.data)
    assert global_patch_energy(out, mask, patch) == 0.0
    assert verify_verbatim(out, rep)


def test_update_confidence_examples():
    c = np.zeros((4, 4))
    out = update_confidence(c, (1, 1), [(0, 0), (1, 2), (3, 3)], 0.7)
    assert out[0, 0] == out[1, 2] == out[3, 3] == 0.7
    assert out.sum() == pytest.approx(2.1)
    assert (update_confidence(c, (1, 1), [], 0.7) == c).all()
    with pytest.raises(ValueError):
        update_confidence(c, (0, 0), [(0, 0)], 1.5)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_sequential_confidence_updates_stay_bounded(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, (6, 6))
    for _ in range(10):
        pts = rng.integers(0, 6, (rng.integers(0, 6), 2))
        c = update_confidence(c, (0, 0), pts, float(rng.uniform(0, 1)))
        assert c.min() >= 0 and c.max() <= 1


def test_bilateral_constant_fixed_point():
    r = Raster(np.full((9, 9, 3), 123.4))
    out = bilateral_filter(r, BilateralParams(2.0, 10.0))
    assert (out.data == r.data).all()


def test_bilateral_small_range_sigma_is_identity(rng):
    r = Raster(rng.integers(0, 256, (10, 10)).astype(float))
    out = bilateral_filter(r, BilateralParams(2.0, 1e-3, 2))
    np.testing.assert_array_equal(out.data, r.data)


@pytest.mark.parametrize("channels", [1, 3])
def test_bilateral_matches_direct_loop(rng, channels):
    data = rng.uniform(0, 255, (16, 16, channels))
    got = bilateral_filter(Raster(data), BilateralParams(1.5, 40.0, 2)).data
    want = bilateral_oracle(data, 1.5, 40.0, 2)
    np.testing.assert_allclose(got, want, rtol=1e-6)


def test_bilateral_params():
    assert BilateralParams().radius == 9
    with pytest.raises(ValueError):
        BilateralParams(0.0, 1.0)
    with pytest.raises(ValueError):
        BilateralParams(1.0, 1.0, 0)


def test_energy_constant_image_any_mask(rng):
    r = Raster(np.full((14, 14), 9.0))
    m = RegionMask(rng.random((14, 14)) < 0.1)
    assert global_patch_energy(r, m, 5) == 0.0


def test_energy_matches_exhaustive_oracle(rng):
    truth = fixtures.periodic_tile(4, (12, 12), seed=2)
    mask = np.zeros((12, 12), bool)
    mask[3:5, 3:5] = True
    d = truth.copy_data()
    d[4, 4] = (d[4, 4] + 50) % 250  # one altered filled pixel
    e = global_patch_energy(Raster(d), RegionMask(mask), 3)
    assert e == energy_oracle(d, mask, 3)
    assert e > 0
    with pytest.raises(RuntimeError):
        global_patch_energy(Raster(d), RegionMask(np.ones((12, 12), bool)), 3)


def random_pair(rng, size=20):
    img = fixtures.two_texture(size, size, seed=int(rng.integers(1000)))
    mask = np.zeros((size, size), bool)
    for _ in range(rng.integers(1, 3)):
        y, x = rng.integers(4, size - 8, 2)
        mask[y:y + rng.integers(2, 5), x:x + rng.integers(2, 5)] = True
    return img, RegionMask(mask)


def test_engine_invariants_small(rng):
    for _ in range(6):
        img, mask = random_pair(rng)
        out, rep = inpaint(img, mask, InpaintParams(patch_size=5))
        assert rep.iterations <= mask.count
        assert verify_verbatim(out, rep)
        assert rep.confidence.min() >= 0 and rep.confidence.max() <= 1
        filled = np.concatenate([s.filled for s in rep.steps])
        assert len(filled) == mask.count and len({tuple(p) for p in filled}) == mask.count
        # known pixels untouched
        np.testing.assert_array_equal(out.data[~mask.flags], img.data[~mask.flags])


def test_determinism_and_workers(rng):
    img, mask = random_pair(rng, 28)
    a, _ = inpaint(img, mask, InpaintParams(patch_size=5, workers=1))
    b, _ = inpaint(img, mask, InpaintParams(patch_size=5, workers=1))
    c, _ = inpaint(img, mask, InpaintParams(patch_size=5, workers=4))
    assert a.data.tobytes() == b.data.tobytes() == c.data.tobytes()


def test_restricted_radius_and_filled_sources(rng):
    img, mask = random_pair(rng, 30)
    out, rep = inpaint(img, mask, InpaintParams(patch_size=5, search_radius=8))
    assert verify_verbatim(out, rep)
    for s in rep.steps:
        assert abs(s.exemplar[0] - s.target[0]) <= 8 and abs(s.exemplar[1] - s.target[1]) <= 8
    out2, rep2 = inpaint(img, mask, InpaintParams(patch_size=5, allow_filled_sources=True))
    assert verify_verbatim(out2, rep2)
    a, _ = inpaint(img, mask, InpaintParams(patch_size=5, allow_filled_sources=True, use_sea=False))
    assert a.data.tobytes() == out2.data.tobytes()


def test_bilateral_prefilter_keeps_verbatim_copies(rng):
    img, mask = random_pair(rng, 24)
    out, rep = inpaint(img, mask, InpaintParams(patch_size=5, bilateral=BilateralParams(1.0, 20.0, 2)))
    assert verify_verbatim(out, rep)
    np.testing.assert_array_equal(out.data[~mask.flags], img.data[~mask.flags])


def test_label_restriction_and_fallback():
    img = fixtures.two_texture(40, 24, seed=5)
    mask = np.zeros((24, 40), bool)
    mask[10:13, 8:11] = True
    labels = np.zeros((24, 40), int)
    labels[:, 20:] = 1
    out, rep = inpaint(img, RegionMask(mask), InpaintParams(patch_size=5), labels=labels)
    assert all(s.exemplar[1] < 20 for s in rep.steps) and not rep.fallbacks
    labels[:] = 1
    labels[mask] = 2  # no source pixel carries label 2
    out, rep = inpaint(img, RegionMask(mask), InpaintParams(patch_size=5), labels=labels)
    assert rep.fallbacks and verify_verbatim(out, rep)


def test_unfillable():
    img = Raster(np.zeros((8, 8)))
    m = np.ones((8, 8), bool)
    m[0, 0] = False
    with pytest.raises(UnfillableError):
        inpaint(img, RegionMask(m), InpaintParams(patch_size=5))


def test_params_validation():
    with pytest.raises(ValueError, match="odd"):
        InpaintParams(patch_size=8)
    with pytest.raises(ValueError):
        InpaintParams(patch_size=3)
    with pytest.raises(ValueError):
        InpaintParams(patch_size=9, search_radius=4)


def test_report_serialization():
    rep = FillReport(iterations=3, examined=10, pruned=5, seconds=0.5, energy=0.0)
    text = rep.to_text()
    assert "iterations=3\n" in text and "energy=0.0\n" in text
    assert rep.csv_header() == "iterations,examined,pruned,seconds,energy"
    assert rep.csv_row() == "3,10,5,0.5,0.0"
