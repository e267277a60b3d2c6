"""Dense reference constructions of the observation operators.

These build explicit matrices straight from the entrywise definitions
— index arithmetic and Kronecker products only, sharing no code with
the fast operators in :mod:`.operators`.  They exist as an oracle for
tests and for debugging on small grids; cost is O((r^2 m n)^2) memory,
so keep the grids tiny.
"""

import numpy as np

from .errors import InvalidInputError
from .operators import blur_taps


def dense_cyclic_shift(n, l):
    """The permutation ``N_n(l)``: row ``j`` picks source ``(j + l) mod n``."""
    a = np.zeros((n, n))
    for j in range(n):
        a[j, (j + int(l)) % n] = 1.0
    return a


def dense_frac_shift(n, eps):
    """The circulant interpolator ``T_n(eps)``."""
    if not 0.0 <= eps < 1.0:
        raise InvalidInputError(f"eps must lie in [0, 1), got {eps}")
    a = np.zeros((n, n))
    for j in range(n):
        a[j, j] = 1.0 - eps
        a[j, (j + 1) % n] += eps  # += so the taps merge when n == 1
    return a


def _dense_downsample_1d(n, r):
    # picks every r-th sample: I_n (x) e_0^T
    e0 = np.zeros((1, r))
    e0[0, 0] = 1.0
    return np.kron(np.eye(n), e0)


def dense_downsample(m, n, r):
    """Decimation ``D`` of an ``rm x rn`` image, x-factor outer."""
    return np.kron(_dense_downsample_1d(n, r), _dense_downsample_1d(m, r))


def dense_blur(m, n, r):
    """Periodic separable blur ``K`` on the high-resolution grid."""
    taps = blur_taps(r)
    h = len(taps) // 2

    def circulant(size):
        a = np.zeros((size, size))
        for t, w in enumerate(taps):
            off = t - h
            for j in range(size):
                a[j, (j + off) % size] += w
        return a

    return np.kron(circulant(r * n), circulant(r * m))


def dense_integer_shift(m, n, r, l_x, l_y):
    return np.kron(dense_cyclic_shift(r * n, l_x), dense_cyclic_shift(r * m, l_y))


def dense_fractional_shift(m, n, r, eps_x, eps_y):
    return np.kron(dense_frac_shift(r * n, eps_x), dense_frac_shift(r * m, eps_y))


def dense_window(m, n, r, l_x=0, l_y=0, l_plus_x=0, l_minus_x=0, l_plus_y=0, l_minus_y=0):
    """Diagonal validity mask for one frame, as a dense matrix."""
    rm, rn = r * m, r * n

    def axis_diag(size, lo, hi):
        d = np.zeros(size)
        if not (0 <= lo <= hi <= size):
            raise InvalidInputError(f"window bounds [{lo}, {hi}) out of range for size {size}")
        d[lo:hi] = 1.0
        return np.diag(d)

    wx = axis_diag(rn, l_plus_x - l_x, rn - (l_minus_x + l_x))
    wy = axis_diag(rm, l_plus_y - l_y, rm - (l_minus_y + l_y))
    return np.kron(wx, wy)


def dense_frame_operator(m, n, r, eps_x, eps_y, l_x=0, l_y=0):
    """Full forward matrix ``D K C_i B_i`` for one frame."""
    return (dense_downsample(m, n, r)
            @ dense_blur(m, n, r)
            @ dense_fractional_shift(m, n, r, eps_x, eps_y)
            @ dense_integer_shift(m, n, r, l_x, l_y))


def dump_matrix(path, a):
    """Write a matrix to a text file at full float64 precision."""
    np.savetxt(path, np.asarray(a), fmt="%.17g")
