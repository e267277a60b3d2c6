"""Image quality metrics and the shared-coverage region they run on."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class OverlapRegion:
    """Inclusive pixel box ``[x0, x1] x [y0, y1]`` (x = column, y = row)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1):
            raise InvalidInputError(f"degenerate region {self}")

    @property
    def slices(self):
        return slice(self.y0, self.y1 + 1), slice(self.x0, self.x1 + 1)

    def to_list(self):
        return [self.x0, self.y0, self.x1, self.y1]


def overlap_from_shifts(int_shifts, hr_shape):
    """Region of the high-resolution grid covered by every frame.

    ``int_shifts`` holds the per-frame integer displacements
    ``(l_x, l_y)``; a frame shifted by ``+l`` contributes no data to the
    first ``l`` columns (and symmetrically at the other edge for
    negative shifts), so the common region starts at the largest
    positive shift and ends before the largest negative one.
    """
    rm, rn = hr_shape
    lpx = max(0, max((lx for lx, _ in int_shifts), default=0))
    lmx = max(0, max((-lx for lx, _ in int_shifts), default=0))
    lpy = max(0, max((ly for _, ly in int_shifts), default=0))
    lmy = max(0, max((-ly for _, ly in int_shifts), default=0))
    x1, y1 = rn - lmx - 1, rm - lmy - 1
    if lpx > x1 or lpy > y1:
        raise InvalidInputError("shifts leave no commonly covered pixels")
    return OverlapRegion(x0=lpx, y0=lpy, x1=x1, y1=y1)


def _crop(a, b, region):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"images differ in shape: {a.shape} vs {b.shape}")
    if region is not None:
        if region.x1 >= a.shape[1] or region.y1 >= a.shape[0]:
            raise InvalidInputError(f"region {region} exceeds image shape {a.shape}")
        a = a[region.slices]
        b = b[region.slices]
    return a, b


def psnr(a, b, data_range=255.0, region=None):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a, b = _crop(a, b, region)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range * data_range / mse))


def ssim(a, b, data_range=255.0, region=None):
    """Structural similarity computed once over the whole (cropped) image.

    Single-window variant: means, population variances and covariance
    are taken over all pixels, with the usual stabilizers
    ``c1 = (0.01 d)^2`` and ``c2 = (0.03 d)^2``.
    """
    a, b = _crop(a, b, region)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = ((a - ma) * (b - mb)).mean()
    return float(((2 * ma * mb + c1) * (2 * cov + c2))
                 / ((ma * ma + mb * mb + c1) * (va + vb + c2)))


def bilinear_upsample(img, r):
    """Upsample by ``r`` with bilinear interpolation, for baselines.

    High-resolution pixel ``j`` maps to low-resolution coordinate
    ``j / r`` (matching the decimation that keeps the top-left sample
    of each cell); border samples clamp.
    """
    img = np.asarray(img, dtype=float)
    if r < 1:
        raise InvalidInputError(f"factor must be >= 1, got {r}")
    if r == 1:
        return img.copy()
    h, w = img.shape
    yy, xx = np.mgrid[0:r * h, 0:r * w].astype(float)
    yy /= r
    xx /= r
    y0 = np.clip(np.floor(yy).astype(int), 0, h - 2)
    x0 = np.clip(np.floor(xx).astype(int), 0, w - 2)
    fy = np.clip(yy - y0, 0.0, 1.0)
    fx = np.clip(xx - x0, 0.0, 1.0)
    return ((1 - fy) * (1 - fx) * img[y0, x0]
            + (1 - fy) * fx * img[y0, x0 + 1]
            + fy * (1 - fx) * img[y0 + 1, x0]
            + fy * fx * img[y0 + 1, x0 + 1])
