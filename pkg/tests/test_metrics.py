import numpy as np
import pytest

from mfsr import (
    InvalidInputError,
    OverlapRegion,
    bilinear_upsample,
    overlap_from_shifts,
    psnr,
    ssim,
)


def test_region_slices_and_list():
    region = OverlapRegion(x0=1, y0=2, x1=4, y1=5)
    sy, sx = region.slices
    assert (sy.start, sy.stop) == (2, 6)
    assert (sx.start, sx.stop) == (1, 5)
    assert region.to_list() == [1, 2, 4, 5]


def test_region_rejects_degenerate():
    with pytest.raises(InvalidInputError):
        OverlapRegion(x0=3, y0=0, x1=2, y1=5)
    with pytest.raises(InvalidInputError):
        OverlapRegion(x0=-1, y0=0, x1=2, y1=5)


def test_overlap_from_shifts():
    region = overlap_from_shifts([(0, 0), (2, -1), (-1, 1)], hr_shape=(8, 10))
    # largest positive x-shift 2, largest negative 1: columns 2..8
    # largest positive y-shift 1, largest negative 1: rows 1..6
    assert region.to_list() == [2, 1, 8, 6]


def test_overlap_all_zero_covers_everything():
    region = overlap_from_shifts([(0, 0)] * 3, hr_shape=(4, 6))
    assert region.to_list() == [0, 0, 5, 3]


def test_overlap_empty_raises():
    with pytest.raises(InvalidInputError):
        overlap_from_shifts([(3, 0), (-3, 0)], hr_shape=(4, 5))


def test_psnr_reference_values():
    a = np.zeros((10, 10))
    b = np.ones((10, 10))
    # MSE 1 at peak 255: 10 log10(255^2) = 48.1308 dB
    assert psnr(a, b) == pytest.approx(48.130803608679344)
    assert psnr(a, b, data_range=1.0) == pytest.approx(0.0)
    assert psnr(a, a) == float("inf")


def test_psnr_region_crop():
    a = np.zeros((4, 4))
    b = np.zeros((4, 4))
    b[0, 0] = 100.0
    region = OverlapRegion(x0=1, y0=1, x1=3, y1=3)
    assert psnr(a, b, region=region) == float("inf")
    assert psnr(a, b) < 40


def test_psnr_shape_mismatch():
    with pytest.raises(InvalidInputError):
        psnr(np.zeros((3, 3)), np.zeros((3, 4)))


def test_psnr_region_out_of_bounds():
    region = OverlapRegion(x0=0, y0=0, x1=5, y1=5)
    with pytest.raises(InvalidInputError):
        psnr(np.zeros((3, 3)), np.zeros((3, 3)), region=region)


def test_ssim_identical_is_one(rng):
    a = rng.uniform(0, 255, (12, 12))
    assert ssim(a, a) == pytest.approx(1.0)


def test_ssim_ranks_degradations(rng):
    a = rng.uniform(0, 255, (16, 16))
    slightly = a + rng.normal(0, 5, a.shape)
    badly = a + rng.normal(0, 60, a.shape)
    assert ssim(a, badly) < ssim(a, slightly) < 1.0


def test_ssim_against_direct_formula(rng):
    a = rng.uniform(0, 255, (9, 9))
    b = rng.uniform(0, 255, (9, 9))
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    ma, mb = a.mean(), b.mean()
    cov = np.mean((a - ma) * (b - mb))
    expect = ((2 * ma * mb + c1) * (2 * cov + c2)) / (
        (ma ** 2 + mb ** 2 + c1) * (a.var() + b.var() + c2))
    assert ssim(a, b) == pytest.approx(expect, rel=1e-12)


def test_bilinear_upsample_frozen_values():
    img = np.array([[0.0, 2.0], [4.0, 6.0]])
    out = bilinear_upsample(img, 2)
    expect = np.array([
        [0.0, 1.0, 2.0, 2.0],
        [2.0, 3.0, 4.0, 4.0],
        [4.0, 5.0, 6.0, 6.0],
        [4.0, 5.0, 6.0, 6.0],
    ])
    np.testing.assert_allclose(out, expect, atol=1e-14)


def test_bilinear_upsample_hits_lattice(rng):
    # the coordinate convention matches decimation: every r-th output
    # pixel reproduces the input exactly
    img = rng.uniform(0, 255, (5, 7))
    for r in [1, 2, 3]:
        out = bilinear_upsample(img, r)
        assert out.shape == (5 * r, 7 * r)
        np.testing.assert_allclose(out[::r, ::r], img, atol=1e-12)


def test_bilinear_upsample_rejects_bad_factor():
    with pytest.raises(InvalidInputError):
        bilinear_upsample(np.zeros((3, 3)), 0)
