"""Grid geometry and vectorization conventions.

Everything downstream assumes column-major (Fortran) vectorization of
images: an ``rm x rn`` high-resolution image ``F`` maps to a vector of
length ``r*r*m*n`` with the row index running fastest.  Under that
convention a separable operator ``A_x (x) A_y`` (Kronecker product,
x-factor outer) acts on ``vec(F)`` as ``vec(A_y @ F @ A_x.T)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class GridGeometry:
    """Dimensions tying a low-resolution grid to its high-resolution lift.

    Parameters
    ----------
    m, n : int
        Low-resolution image height and width.
    r : int
        Integer super-resolution factor (>= 1).
    """

    m: int
    n: int
    r: int

    def __post_init__(self):
        for name in ("m", "n", "r"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise InvalidInputError(f"{name} must be an integer, got {v!r}")
        if self.m <= 0 or self.n <= 0:
            raise InvalidInputError(f"grid dims must be positive, got m={self.m}, n={self.n}")
        if self.r < 1:
            raise InvalidInputError(f"factor must be >= 1, got r={self.r}")

    @property
    def lr_shape(self):
        return (self.m, self.n)

    @property
    def hr_shape(self):
        return (self.r * self.m, self.r * self.n)

    @property
    def lr_size(self):
        return self.m * self.n

    @property
    def hr_size(self):
        return self.r * self.r * self.m * self.n


def vec(img):
    """Column-major flatten."""
    return np.asarray(img).reshape(-1, order="F")


def unvec(v, shape):
    """Inverse of :func:`vec` for the given 2-D shape."""
    v = np.asarray(v)
    if v.size != shape[0] * shape[1]:
        raise InvalidInputError(f"vector of size {v.size} does not fit shape {shape}")
    return v.reshape(shape, order="F")


def decompose_displacement(s, r):
    """Split a scaled displacement into integer and fractional parts.

    The high-resolution displacement ``r*s`` is written as ``l + eps``
    with ``l`` integer and ``eps`` in ``[0, 1)``, i.e. ``l = floor(r*s)``.

    Returns
    -------
    (l, eps) : (int, float)
    """
    rs = float(r) * float(s)
    l = int(np.floor(rs))
    eps = rs - l
    # guard against eps == 1.0 from floating round-off just below an integer
    if eps >= 1.0:
        l += 1
        eps = 0.0
    return l, eps
