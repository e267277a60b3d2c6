"""Multi-frame super-resolution via low-rank fusion.

Registers shifted low-resolution frames against a reference, models
each one as a blurred, shifted decimation of a common high-resolution
image, and fuses the stack by nuclear-norm-regularized least squares.

Typical use::

    from mfsr import reconstruct
    result = reconstruct(frames, factor=2)
    result.image  # high-resolution array
"""

from .errors import (DataError, InvalidInputError, MfsrError,
                     ReconstructionError, SolverDivergedError)
from .fileio import read_image, write_image
from .geometry import GridGeometry, decompose_displacement, unvec, vec
from .metrics import OverlapRegion, bilinear_upsample, overlap_from_shifts, psnr, ssim
from .pipeline import (ReconstructionResult, RegistrationConfig, fuse_stack,
                       reconstruct, reconstruct_color)
from .registration import (FlowField, FrameRegistration, LapFilterBank,
                           TranslationEstimate, build_filter_bank,
                           estimate_translation, lap_flow, register_frames,
                           register_pair, resample_integer_flow)
from .solver import (AdmmResult, FrameTerm, SolveReport, SolverConfig, admm_solve,
                     estimate_lambda, nuclear_norm, singular_values,
                     solve_f_subproblem, svt)
from .synth import (Motion, default_motions, load_motions, make_scene,
                    save_motions, synthesize_sequence, translate_periodic,
                    warp_frame)

__version__ = "0.1.0"

__all__ = [
    "AdmmResult", "DataError", "FlowField", "FrameRegistration", "FrameTerm",
    "GridGeometry", "InvalidInputError", "LapFilterBank", "MfsrError", "Motion",
    "OverlapRegion", "ReconstructionError", "ReconstructionResult",
    "RegistrationConfig", "SolveReport", "SolverConfig", "SolverDivergedError",
    "TranslationEstimate", "admm_solve", "bilinear_upsample",
    "build_filter_bank", "decompose_displacement", "default_motions",
    "estimate_lambda", "estimate_translation", "fuse_stack", "lap_flow",
    "load_motions", "make_scene", "nuclear_norm", "overlap_from_shifts", "psnr",
    "read_image", "reconstruct", "reconstruct_color", "register_frames", "register_pair",
    "resample_integer_flow", "save_motions", "singular_values",
    "solve_f_subproblem", "ssim", "svt", "synthesize_sequence",
    "translate_periodic", "unvec", "vec", "warp_frame", "write_image",
]
