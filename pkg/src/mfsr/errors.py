"""Exception types shared across the package."""


class MfsrError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(MfsrError, ValueError):
    """Bad argument values: malformed geometry, out-of-range parameters."""


class DataError(MfsrError):
    """Unreadable or inconsistent input data (files, frame stacks)."""


class SolverDivergedError(MfsrError):
    """Solver produced non-finite iterates; carries the iteration index."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


class ReconstructionError(MfsrError):
    """Pipeline could not produce a result (e.g. too few usable frames)."""
