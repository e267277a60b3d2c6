"""End-to-end reconstruction: register, model, solve, report.

The pipeline registers every frame against a reference, resamples away
the integer part of the motion, splits the remaining scaled
displacement into integer and fractional parts, builds the per-frame
observation operators, and runs the low-rank fusion solver on the
restored frames.  Frames whose estimated displacement is implausibly
large are dropped with a note instead of poisoning the solve.

For bit-reproducible output the solver sees the included frames in a
canonical order (reference first, the rest sorted by their motion
parameters and a content hash), so cross-frame reductions do not
depend on the order frames were supplied in.  Report rows are keyed by
the caller's frame indices.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import colorspace
from .errors import InvalidInputError, ReconstructionError
from .geometry import GridGeometry, decompose_displacement, unvec, vec
from .metrics import bilinear_upsample, overlap_from_shifts
from .operators import IntegerShift, Window, build_frame_operator
from .registration import build_filter_bank, register_frames, resample_integer_flow
from .solver import FrameTerm, SolverConfig, admm_solve

REPORT_SCHEMA = 1


@dataclass
class RegistrationConfig:
    radius: int = 16             # filter-bank half-width
    cond_max: float = 1e12
    presmooth_sigma: float = 1.5  # Gaussian blur before the translation fit
    max_shift_factor: float = 0.25  # exclude frames moving more than this * min(m, n)
    lm_max_iters: int = 50
    lm_tol: float = 1e-6
    lm_damping: float = 1e-3
    threads: int = 1


@dataclass
class ReconstructionResult:
    image: np.ndarray
    report: dict
    flows: list = field(default_factory=list)  # per input frame; None unless kept


def _content_key(frame):
    return hashlib.sha256(np.ascontiguousarray(frame).tobytes()).hexdigest()


def fuse_stack(stack, int_shifts, geom):
    """Average per-frame latents after undoing their integer shifts.

    A column whose residual motion crossed a whole high-resolution
    pixel lives on its own frame's grid; shifting it back first keeps
    the average aligned.  With all-zero integer parts this is exactly
    the plain column average.
    """
    cols = np.empty_like(stack)
    for j, (lx, ly) in enumerate(int_shifts):
        cols[:, j] = IntegerShift(geom, lx, ly).rmatvec(stack[:, j])
    return cols.mean(axis=1)


def _solve_plane(planes, rows, included, geom, scfg, reference):
    """Order frames canonically, build terms, solve, un-shift, average."""
    by_index = {row["index"]: row for row in rows}
    others = [i for i in included if i != reference]
    others.sort(key=lambda i: (by_index[i]["l"], by_index[i]["eps"],
                               _content_key(planes[i])))
    order = [reference] + others

    int_shifts = [tuple(by_index[i]["l"]) for i in order]
    lpx = max(0, max(lx for lx, _ in int_shifts))
    lmx = max(0, max(-lx for lx, _ in int_shifts))
    lpy = max(0, max(ly for _, ly in int_shifts))
    lmy = max(0, max(-ly for _, ly in int_shifts))

    terms = []
    f0 = np.empty((geom.hr_size, len(order)))
    for j, i in enumerate(order):
        (lx, ly), (ex, ey) = by_index[i]["l"], by_index[i]["eps"]
        forward = build_frame_operator(geom, ex, ey)
        window = Window(geom, l_x=lx, l_y=ly, l_plus_x=lpx, l_minus_x=lmx,
                        l_plus_y=lpy, l_minus_y=lmy)
        terms.append(FrameTerm(g=vec(planes[i]), forward=forward, window=window.diag))
        # interpolated frames start the solve much closer to the scene
        # than adjoint images do, which also keeps an automatic lambda
        # proportionate to the actual misfit
        f0[:, j] = vec(bilinear_upsample(planes[i], geom.r))

    result = admm_solve(terms, scfg, f0=f0)
    image = unvec(fuse_stack(result.stack, int_shifts, geom), geom.hr_shape)
    overlap = overlap_from_shifts(int_shifts, geom.hr_shape)
    return image, result.report.to_dict(), overlap


def reconstruct(frames, factor, reference=0, solver_config=None,
                registration_config=None, keep_flows=False):
    """Fuse grayscale low-resolution frames into one high-resolution image.

    Parameters
    ----------
    frames : sequence of 2-D arrays
        Low-resolution frames, identical shapes.
    factor : int
        Super-resolution factor.
    reference : int
        Index of the frame the others are registered to.  The output
        lies on this frame's grid, scaled by ``factor``.

    Returns
    -------
    ReconstructionResult
        Raw (unclamped) fused image plus a JSON-serializable report.
    """
    frames = [np.asarray(f, dtype=float) for f in frames]
    _validate_stack(frames, reference)
    scfg = solver_config or SolverConfig()
    rcfg = registration_config or RegistrationConfig()
    m, n = frames[0].shape
    geom = GridGeometry(m, n, int(factor))

    reg = _register(frames, reference, rcfg)
    rows, included = _registration_rows(reg, reference, rcfg, geom)
    if len(frames) >= 2 and len(included) < 2:
        raise ReconstructionError(
            f"only {len(included)} of {len(frames)} frames usable after registration")

    image, solver_report, overlap = _solve_plane(
        [r.restored for r in reg], rows, included, geom, scfg, reference)

    report = {
        "schema": REPORT_SCHEMA,
        "factor": geom.r,
        "reference": reference,
        "lr_shape": [m, n],
        "hr_shape": list(geom.hr_shape),
        "frames": rows,
        "excluded": [i for i in range(len(frames)) if i not in included],
        "overlap": overlap.to_list(),
        "solver": solver_report,
    }
    flows = [r.flow for r in reg] if keep_flows else []
    return ReconstructionResult(image=image, report=report, flows=flows)


def reconstruct_color(frames, factor, reference=0, solver_config=None,
                      registration_config=None, data_range=255.0):
    """Fuse RGB frames: register on luma, solve the three channels.

    Chroma channels are handled as signed offsets from the neutral
    level, so achromatic inputs stay exactly achromatic.  Registration
    runs once on luma and its flow restores the chroma planes; the
    regularization weight is estimated on luma (when "auto") and reused
    for chroma.  The final image is clamped to ``[0, data_range]``.
    """
    frames = [np.asarray(f, dtype=float) for f in frames]
    for i, f in enumerate(frames):
        if f.ndim != 3 or f.shape[2] != 3:
            raise InvalidInputError(f"frame {i} is not RGB (shape {f.shape})")
    scfg = solver_config or SolverConfig()
    rcfg = registration_config or RegistrationConfig()
    ycc = [colorspace.rgb_to_ycbcr(f, data_range) for f in frames]
    offset = colorspace.chroma_offset(data_range)

    luma = [f[..., 0] for f in ycc]
    _validate_stack(luma, reference)
    m, n = luma[0].shape
    geom = GridGeometry(m, n, int(factor))
    reg = _register(luma, reference, rcfg)
    rows, included = _registration_rows(reg, reference, rcfg, geom)
    if len(frames) >= 2 and len(included) < 2:
        raise ReconstructionError(
            f"only {len(included)} of {len(frames)} frames usable after registration")

    y_img, y_rep, overlap = _solve_plane(
        [r.restored for r in reg], rows, included, geom, scfg, reference)
    chroma_cfg = replace(scfg, lam=y_rep["lambda"])

    channels = [y_img]
    solver_reports = {"y": y_rep}
    for name, ch in (("cb", 1), ("cr", 2)):
        planes = []
        for i, r in enumerate(reg):
            plane = ycc[i][..., ch] - offset
            if r.flow is not None:
                plane, _ = resample_integer_flow(plane, r.flow)
            planes.append(plane)
        img, rep, _ = _solve_plane(planes, rows, included, geom, chroma_cfg, reference)
        channels.append(img + offset)
        solver_reports[name] = rep

    out = colorspace.ycbcr_to_rgb(np.stack(channels, axis=-1), data_range)
    out = np.clip(out, 0.0, data_range)
    report = {
        "schema": REPORT_SCHEMA,
        "factor": geom.r,
        "reference": reference,
        "lr_shape": [m, n],
        "hr_shape": list(geom.hr_shape),
        "frames": rows,
        "excluded": [i for i in range(len(frames)) if i not in included],
        "overlap": overlap.to_list(),
        "solver": solver_reports,
        "color": True,
    }
    return ReconstructionResult(image=out, report=report)


# ---------------------------------------------------------------------------
# pieces


def _validate_stack(frames, reference):
    if not frames:
        raise InvalidInputError("need at least one frame")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.ndim != 2:
            raise InvalidInputError(f"frame {i} is not 2-D (shape {f.shape})")
        if f.shape != shape:
            raise InvalidInputError(
                f"frame {i} shape {f.shape} differs from frame 0 shape {shape}")
    if not 0 <= reference < len(frames):
        raise InvalidInputError(
            f"reference index {reference} out of range for {len(frames)} frames")


def _register(frames, reference, rcfg):
    bank = build_filter_bank(rcfg.radius)
    return register_frames(frames, reference_index=reference, bank=bank,
                           cond_max=rcfg.cond_max,
                           presmooth_sigma=rcfg.presmooth_sigma,
                           threads=rcfg.threads, max_iters=rcfg.lm_max_iters,
                           tol=rcfg.lm_tol, damping=rcfg.lm_damping)


def _registration_rows(reg, reference, rcfg, geom):
    """Summarize registration per frame and pick which frames to keep."""
    m, n = geom.lr_shape
    bound = rcfg.max_shift_factor * min(m, n)
    rows = []
    included = []
    for i, fr in enumerate(reg):
        est = fr.estimate
        disp = float(np.hypot(est.sx, est.sy))
        note = ""
        ok = True
        if i != reference and disp > bound:
            ok = False
            note = f"displacement {disp:.2f} px exceeds bound {bound:.2f}"
        elif i != reference and not est.converged:
            note = "translation fit stopped before convergence"
        lx, ex = decompose_displacement(fr.residual_sx, geom.r)
        ly, ey = decompose_displacement(fr.residual_sy, geom.r)
        rows.append({
            "index": i,
            "sx": est.sx, "sy": est.sy,
            "residual": [fr.residual_sx, fr.residual_sy],
            "l": [lx, ly], "eps": [ex, ey],
            "flow_median": list(fr.int_flow),
            "lm_converged": bool(est.converged),
            "lm_iterations": est.iterations,
            "lm_sse": est.sse,
            "included": ok,
            "note": note,
        })
        if ok:
            included.append(i)
    return rows, included
