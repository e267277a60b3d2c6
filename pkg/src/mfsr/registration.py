"""Frame registration: local all-pass flow plus translation refinement.

The flow estimator compares each frame against the reference through a
small bank of Gaussian-derivative filters.  Around every pixel it fits
coefficients ``c`` so that the filtered difference between the two
frames vanishes over a square window, then converts the fitted filter
into a displacement via its first moments.  The result is a dense flow
field whose integer part is undone by resampling; the sub-pixel
remainder is then refined globally by a damped Gauss-Newton fit of a
pure translation.

Sign convention: if ``moving(x) == reference(x + s)`` (the moving frame
looks ``s`` pixels ahead), the estimated flow/translation is ``+s``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidInputError

# ---------------------------------------------------------------------------
# filter bank


@dataclass(frozen=True)
class LapFilterBank:
    """Gaussian filter bank on support ``[-R, R]^2``.

    ``taps[0]`` is the Gaussian itself; the others multiply it by
    ``k``, ``l``, ``k^2 + l^2 - 2 sigma^2``, ``k l`` and ``k^2 - l^2``.
    ``parity[j]`` is the sign the filter picks up under coordinate
    reversal, ``moment_sum`` / ``moment_x`` / ``moment_y`` the raw
    moments used to turn fitted coefficients into a displacement.
    """

    radius: int
    sigma: float
    taps: np.ndarray          # (6, 2R+1, 2R+1)
    parity: np.ndarray        # (6,)
    moment_sum: np.ndarray    # (6,)
    moment_x: np.ndarray      # (6,)
    moment_y: np.ndarray      # (6,)


def build_filter_bank(radius=16):
    if radius < 1:
        raise InvalidInputError(f"filter radius must be >= 1, got {radius}")
    sigma = (radius + 2) / 4.0
    k = np.arange(-radius, radius + 1)
    kk, ll = np.meshgrid(k, k, indexing="xy")
    g = np.exp(-(kk ** 2 + ll ** 2) / (2.0 * sigma ** 2))
    taps = np.stack([
        g,
        kk * g,
        ll * g,
        (kk ** 2 + ll ** 2 - 2.0 * sigma ** 2) * g,
        kk * ll * g,
        (kk ** 2 - ll ** 2) * g,
    ])
    parity = np.array([1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
    return LapFilterBank(
        radius=radius,
        sigma=sigma,
        taps=taps,
        parity=parity,
        moment_sum=taps.sum(axis=(1, 2)),
        moment_x=(kk * taps).sum(axis=(1, 2)),
        moment_y=(ll * taps).sum(axis=(1, 2)),
    )


# ---------------------------------------------------------------------------
# dense flow


@dataclass
class FlowField:
    u: np.ndarray      # x-displacement per pixel
    v: np.ndarray      # y-displacement per pixel
    valid: np.ndarray  # bool mask: pixels whose local fit was well posed


def lap_flow(moving, reference, bank=None, cond_max=1e12):
    """Dense displacement field between ``moving`` and ``reference``.

    Per pixel, solves the 5x5 normal equations accumulated over a
    ``(2R+1)^2`` window of filtered-difference products.  Systems whose
    condition number exceeds ``cond_max`` (or is non-finite) are marked
    invalid and get zero flow, as do pixels where the displacement
    denominator collapses.  A border of width ``R`` is replaced by the
    nearest interior value when the image is large enough to have one.
    """
    moving = np.asarray(moving, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if moving.shape != reference.shape:
        raise InvalidInputError(
            f"frame shapes differ: {moving.shape} vs {reference.shape}")
    if bank is None:
        bank = build_filter_bank()
    R = bank.radius

    feats = [
        fftconvolve(moving, bank.taps[j], mode="same")
        - bank.parity[j] * fftconvolve(reference, bank.taps[j], mode="same")
        for j in range(6)
    ]

    box = np.ones((2 * R + 1, 2 * R + 1))
    G = np.empty(reference.shape + (5, 5))
    b = np.empty(reference.shape + (5,))
    for a in range(1, 6):
        for c in range(a, 6):
            e = fftconvolve(feats[a] * feats[c], box, mode="same")
            G[..., a - 1, c - 1] = e
            G[..., c - 1, a - 1] = e
        b[..., a - 1] = fftconvolve(feats[a] * feats[0], box, mode="same")

    with np.errstate(all="ignore"):
        cond = np.linalg.cond(G)
    valid = np.isfinite(cond) & (cond < cond_max)
    coef = np.zeros(reference.shape + (5,))
    if valid.any():
        coef[valid] = np.linalg.solve(G[valid], -b[valid][..., None])[..., 0]

    den = bank.moment_sum[0] + coef @ bank.moment_sum[1:]
    num_x = 2.0 * (bank.moment_x[0] + coef @ bank.moment_x[1:])
    num_y = 2.0 * (bank.moment_y[0] + coef @ bank.moment_y[1:])
    degenerate = np.abs(den) < 1e-12 * np.abs(bank.moment_sum[0])
    safe_den = np.where(degenerate, 1.0, den)
    good = valid & ~degenerate
    u = np.where(good, num_x / safe_den, 0.0)
    v = np.where(good, num_y / safe_den, 0.0)

    if min(reference.shape) > 2 * R:
        u = np.pad(u[R:-R, R:-R], R, mode="edge")
        v = np.pad(v[R:-R, R:-R], R, mode="edge")
    return FlowField(u=u, v=v, valid=good)


def resample_integer_flow(frame, flow):
    """Undo the integer part of a flow by index remapping.

    The integer part is truncated toward zero per pixel; source indices
    are clamped to the image. Returns the resampled frame together with
    the median integer displacement ``(ix, iy)`` that the caller adds
    back to any residual sub-pixel estimate.
    """
    frame = np.asarray(frame, dtype=float)
    iu = np.trunc(flow.u).astype(int)
    iv = np.trunc(flow.v).astype(int)
    h, w = frame.shape
    yy, xx = np.mgrid[0:h, 0:w]
    out = frame[np.clip(yy - iv, 0, h - 1), np.clip(xx - iu, 0, w - 1)]
    return out, (int(np.median(iu)), int(np.median(iv)))


# ---------------------------------------------------------------------------
# translation refinement


@dataclass
class TranslationEstimate:
    sx: float
    sy: float
    sse: float
    converged: bool
    iterations: int
    sse_history: list = field(default_factory=list)


def estimate_translation(moving, reference, max_iters=50, tol=1e-6, damping=1e-3):
    """Fit a global translation by damped Gauss-Newton.

    Minimizes the sum of squared differences between ``moving``
    resampled at ``(x - sx, y - sy)`` (bilinear) and ``reference``,
    excluding pixels whose source falls outside the image.  The damping
    factor multiplies the diagonal of the normal matrix and is scaled
    down tenfold on accepted steps, up tenfold on rejections; only
    strictly decreasing steps are taken.
    """
    moving = np.asarray(moving, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if moving.shape != reference.shape:
        raise InvalidInputError(
            f"frame shapes differ: {moving.shape} vs {reference.shape}")
    h, w = reference.shape
    if h < 2 or w < 2:
        return TranslationEstimate(0.0, 0.0, 0.0, False, 0)
    yy, xx = np.mgrid[0:h, 0:w].astype(float)

    def eval_at(s):
        sy_, sx_ = yy - s[1], xx - s[0]
        inside = (sx_ >= 0) & (sx_ <= w - 1) & (sy_ >= 0) & (sy_ <= h - 1)
        syc = np.clip(sy_, 0, h - 1)
        sxc = np.clip(sx_, 0, w - 1)
        y0 = np.clip(np.floor(syc).astype(int), 0, h - 2)
        x0 = np.clip(np.floor(sxc).astype(int), 0, w - 2)
        fy = syc - y0
        fx = sxc - x0
        val = ((1 - fy) * (1 - fx) * moving[y0, x0]
               + (1 - fy) * fx * moving[y0, x0 + 1]
               + fy * (1 - fx) * moving[y0 + 1, x0]
               + fy * fx * moving[y0 + 1, x0 + 1])
        # analytic derivative of the bilinear sample w.r.t. (sx, sy)
        gx = ((1 - fy) * (moving[y0, x0 + 1] - moving[y0, x0])
              + fy * (moving[y0 + 1, x0 + 1] - moving[y0 + 1, x0]))
        gy = ((1 - fx) * (moving[y0 + 1, x0] - moving[y0, x0])
              + fx * (moving[y0 + 1, x0 + 1] - moving[y0, x0 + 1]))
        res = (val - reference)[inside]
        return float((res ** 2).sum()), res, -gx[inside], -gy[inside]

    s = np.zeros(2)
    mu = damping
    sse, res, jx, jy = eval_at(s)
    history = [sse]
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        jac = np.stack([jx, jy], axis=1)
        jtj = jac.T @ jac
        grad = jac.T @ res
        if res.size == 0 or np.abs(np.diag(jtj)).max() == 0.0:
            break
        accepted = False
        delta = np.zeros(2)
        for _ in range(25):
            try:
                delta = np.linalg.solve(jtj + mu * np.diag(np.diag(jtj)), -grad)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            sse2, res2, jx2, jy2 = eval_at(s + delta)
            if sse2 < sse:
                s = s + delta
                sse, res, jx, jy = sse2, res2, jx2, jy2
                history.append(sse)
                mu = max(mu / 10.0, 1e-15)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
        if np.linalg.norm(delta) < tol:
            converged = True
            break
    return TranslationEstimate(
        sx=float(s[0]), sy=float(s[1]), sse=sse,
        converged=converged, iterations=iters, sse_history=history)


@dataclass
class FrameRegistration:
    """Result of registering one frame: total motion plus the pieces.

    ``restored`` is the frame with the integer part of its flow undone;
    the solver models it as displaced by only ``(residual_sx,
    residual_sy)`` from the reference.  ``estimate`` carries the total
    displacement (residual plus the median integer flow).
    """

    estimate: TranslationEstimate
    residual_sx: float
    residual_sy: float
    int_flow: tuple
    restored: np.ndarray
    flow: object = None  # FlowField; None for the reference frame


def register_pair(moving, reference, bank=None, cond_max=1e12, presmooth_sigma=0.0,
                  max_iters=50, tol=1e-6, damping=1e-3):
    """Full two-stage registration of one frame against the reference.

    Runs the dense flow, undoes its integer part, optionally
    Gaussian-smooths both frames (noise makes the interpolated residual
    variance depend on the sampling fraction, which biases the raw SSE
    fit; smoothing flattens that out), then refines the remaining
    sub-pixel translation.  The smoothing affects only the fit, not the
    restored frame that is returned.
    """
    from scipy.ndimage import gaussian_filter

    flow = lap_flow(moving, reference, bank=bank, cond_max=cond_max)
    restored, (ix, iy) = resample_integer_flow(moving, flow)
    a, b = restored, np.asarray(reference, dtype=float)
    if presmooth_sigma > 0:
        a = gaussian_filter(a, presmooth_sigma, mode="nearest")
        b = gaussian_filter(b, presmooth_sigma, mode="nearest")
    est = estimate_translation(a, b, max_iters=max_iters, tol=tol, damping=damping)
    total = TranslationEstimate(
        sx=est.sx + ix, sy=est.sy + iy, sse=est.sse,
        converged=est.converged, iterations=est.iterations,
        sse_history=est.sse_history)
    return FrameRegistration(estimate=total, residual_sx=est.sx, residual_sy=est.sy,
                             int_flow=(ix, iy), restored=restored, flow=flow)


def register_frames(frames, reference_index=0, bank=None, cond_max=1e12,
                    presmooth_sigma=0.0, threads=1, **lm_kwargs):
    """Register every frame of a stack against the chosen reference.

    Returns a list of :class:`FrameRegistration` in frame order; the
    reference entry is an exact zero estimate with no flow.
    """
    frames = [np.asarray(f, dtype=float) for f in frames]
    if not 0 <= reference_index < len(frames):
        raise InvalidInputError(
            f"reference index {reference_index} out of range for {len(frames)} frames")
    if bank is None:
        bank = build_filter_bank()

    def one(i):
        if i == reference_index:
            est = TranslationEstimate(0.0, 0.0, 0.0, True, 0)
            return FrameRegistration(estimate=est, residual_sx=0.0, residual_sy=0.0,
                                     int_flow=(0, 0), restored=frames[i], flow=None)
        return register_pair(frames[i], frames[reference_index], bank=bank,
                             cond_max=cond_max, presmooth_sigma=presmooth_sigma,
                             **lm_kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(frames))))
    return [one(i) for i in range(len(frames))]
