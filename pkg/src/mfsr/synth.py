"""Synthetic test sequences with known ground-truth motion.

Frames are produced by warping a high-resolution scene, applying the
same periodic blur + decimation the reconstruction assumes, and adding
white Gaussian noise.  Pure translations use a periodic bilinear warp,
which on the sample grid is exactly the composition of the cyclic
integer shift and the two-tap fractional shift — so with zero noise
the frames satisfy the observation model to round-off.  Rotations use
clamped bilinear resampling about the image center.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError, InvalidInputError
from .geometry import GridGeometry, vec
from .operators import Blur, Downsample

MOTIONS_SCHEMA = 1


@dataclass(frozen=True)
class Motion:
    """Per-frame ground truth: translation (low-res pixels), rotation, gain."""

    sx: float = 0.0
    sy: float = 0.0
    theta: float = 0.0   # degrees, counter-clockwise about the center
    alpha: float = 1.0   # multiplicative illumination factor


def make_scene(shape, seed=0, bandwidth=0.16, cutoff=0.45, power=2.0):
    """Random band-limited scene normalized to [0, 255].

    White Gaussian spectrum shaped by ``exp(-(rad/bandwidth)^power)``
    and hard-cut at ``cutoff`` cycles/sample; smooth but textured, with
    enough mid-band energy that interpolation baselines leave visible
    room for improvement.
    """
    h, w = shape
    if h < 2 or w < 2:
        raise InvalidInputError(f"scene shape too small: {shape}")
    rng = np.random.default_rng(seed)
    spectrum = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    rad = np.hypot(fy, fx)
    amp = np.exp(-(rad / bandwidth) ** power) * (rad < cutoff)
    img = np.fft.ifft2(spectrum * amp).real
    img -= img.min()
    peak = img.max()
    if peak > 0:
        img *= 255.0 / peak
    return img


def translate_periodic(img, dx, dy):
    """Shift by a real displacement with periodic bilinear interpolation.

    ``out(x) = img(x + d)``: positive ``dx`` moves content left, i.e.
    the output frame "looks ahead" by ``d``.
    """
    img = np.asarray(img, dtype=float)
    ix, fx = int(np.floor(dx)), dx - np.floor(dx)
    iy, fy = int(np.floor(dy)), dy - np.floor(dy)
    out = np.roll(img, (-iy, -ix), axis=(0, 1))
    if fx != 0.0:
        out = (1 - fx) * out + fx * np.roll(out, -1, axis=1)
    if fy != 0.0:
        out = (1 - fy) * out + fy * np.roll(out, -1, axis=0)
    return out


def warp_frame(hr, motion, r):
    """Apply one frame's motion to the high-resolution scene.

    Translation is given in low-resolution pixels and scaled by ``r``
    here.  Zero rotation takes the exact periodic path; otherwise the
    rotation (about the center) and translation are applied together by
    clamped bilinear resampling.
    """
    hr = np.asarray(hr, dtype=float)
    dx, dy = r * motion.sx, r * motion.sy
    if motion.theta == 0.0:
        out = translate_periodic(hr, dx, dy)
    else:
        h, w = hr.shape
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        yy, xx = np.mgrid[0:h, 0:w].astype(float)
        t = np.deg2rad(motion.theta)
        ct, st = np.cos(t), np.sin(t)
        # source position for each destination pixel: rotate then shift
        xs = cx + ct * (xx - cx) - st * (yy - cy) + dx
        ys = cy + st * (xx - cx) + ct * (yy - cy) + dy
        out = ndimage.map_coordinates(hr, [ys, xs], order=1, mode="nearest")
    if motion.alpha != 1.0:
        out = motion.alpha * out
    return out


def synthesize_sequence(hr, motions, r, noise_ratio=0.0, seed=0, data_range=255.0):
    """Render low-resolution frames from a scene and a motion list.

    Each frame is warped, blurred, decimated, then perturbed with white
    Gaussian noise of standard deviation ``noise_ratio * data_range``.
    The noise stream is per-frame (seeded by ``(seed, index)``), so a
    frame's pixels do not depend on how many frames are rendered.
    """
    hr = np.asarray(hr, dtype=float)
    rm, rn = hr.shape
    if rm % r or rn % r:
        raise InvalidInputError(f"scene shape {hr.shape} not divisible by factor {r}")
    if noise_ratio < 0:
        raise InvalidInputError(f"noise ratio must be >= 0, got {noise_ratio}")
    geom = GridGeometry(rm // r, rn // r, r)
    blur = Blur(geom)
    down = Downsample(geom)
    frames = []
    for idx, motion in enumerate(motions):
        warped = warp_frame(hr, motion, r)
        g = down.matvec(blur.matvec(vec(warped))).reshape(geom.lr_shape, order="F")
        if noise_ratio > 0:
            rng = np.random.default_rng([int(seed), idx])
            g = g + rng.normal(0.0, noise_ratio * data_range, g.shape)
        frames.append(g)
    return frames


def default_motions(count, seed=0, max_shift=0.45, max_rotate=0.0, max_illum=0.0):
    """Random motion set with an identity first frame.

    Translations are drawn uniformly from ``[-max_shift, max_shift]``
    per axis, rotations from ``[-max_rotate, max_rotate]`` degrees and
    gains from ``1 +- max_illum``.
    """
    if count < 1:
        raise InvalidInputError(f"need at least one frame, got {count}")
    rng = np.random.default_rng(int(seed))
    motions = [Motion()]
    for _ in range(count - 1):
        sx, sy = rng.uniform(-max_shift, max_shift, 2)
        theta = rng.uniform(-max_rotate, max_rotate) if max_rotate > 0 else 0.0
        alpha = 1.0 + (rng.uniform(-max_illum, max_illum) if max_illum > 0 else 0.0)
        motions.append(Motion(sx=float(sx), sy=float(sy), theta=float(theta),
                              alpha=float(alpha)))
    return motions


def save_motions(path, motions, factor, noise_ratio, seed):
    doc = {
        "schema": MOTIONS_SCHEMA,
        "factor": factor,
        "noise_ratio": noise_ratio,
        "seed": seed,
        "frames": [
            {"index": i, "sx": m.sx, "sy": m.sy, "theta": m.theta, "alpha": m.alpha}
            for i, m in enumerate(motions)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_motions(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"cannot read {path}: file not found")
    except json.JSONDecodeError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    if doc.get("schema") != MOTIONS_SCHEMA:
        raise DataError(f"{path}: unsupported motions schema {doc.get('schema')!r}")
    frames = sorted(doc["frames"], key=lambda f: f["index"])
    motions = [Motion(sx=f["sx"], sy=f["sy"], theta=f.get("theta", 0.0),
                      alpha=f.get("alpha", 1.0)) for f in frames]
    return motions, doc
