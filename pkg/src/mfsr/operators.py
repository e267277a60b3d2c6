"""Structured linear operators for the observation model.

Each low-resolution frame is modeled as ``g_i = D K C_i B_i f + n_i``:
an integer cyclic shift ``B_i``, a fractional (linear-interpolation)
shift ``C_i``, a periodic box blur ``K`` and ``r``-fold decimation ``D``
applied to the vectorized high-resolution image ``f``.  All operators
here act on column-major vectors (see :mod:`.geometry`) but are applied
internally as separable image operations, so a matvec costs O(r^2 m n)
instead of materializing any matrix.

The 1-D building blocks are exposed as ``cyclic_shift_vec`` (the
permutation ``N_n(l)``) and ``frac_shift_vec`` (the circulant two-tap
interpolator ``T_n(eps)``); the 2-D operators are their Kronecker
lifts, x-axis factor outer, y-axis factor inner.
"""

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .geometry import GridGeometry, unvec, vec

# ---------------------------------------------------------------------------
# 1-D building blocks


def cyclic_shift_vec(x, l):
    """Apply the cyclic shift permutation: ``out[j] = x[(j + l) mod n]``."""
    x = np.asarray(x)
    return np.roll(x, -int(l), axis=0)


def frac_shift_vec(x, eps):
    """Apply the two-tap periodic interpolator.

    ``out[j] = (1 - eps) * x[j] + eps * x[(j + 1) mod n]`` with
    ``eps`` in ``[0, 1)``.
    """
    if not 0.0 <= eps < 1.0:
        raise InvalidInputError(f"fractional shift must lie in [0, 1), got {eps}")
    x = np.asarray(x)
    if eps == 0.0:
        return x.copy()
    return (1.0 - eps) * x + eps * np.roll(x, -1, axis=0)


def blur_taps(r):
    """1-D taps of the periodic anti-aliasing blur for factor ``r``.

    For even ``r`` the taps are ``[1/2, 1, ..., 1, 1/2] / r`` with
    ``r - 1`` interior ones (a length ``r + 1`` symmetric window whose
    entries sum to 1).  Factor 1 is the identity.  Odd factors >= 3 use
    a plain length-``r`` box, the symmetric window of matching support.
    """
    if r < 1:
        raise InvalidInputError(f"factor must be >= 1, got {r}")
    if r == 1:
        return np.array([1.0])
    if r % 2 == 0:
        return np.concatenate(([0.5], np.ones(r - 1), [0.5])) / r
    return np.ones(r) / r


# ---------------------------------------------------------------------------
# operator interface


class LinearOperator:
    """Minimal matrix-free operator: forward and adjoint matvecs."""

    in_dim: int
    out_dim: int

    def matvec(self, x):
        raise NotImplementedError

    def rmatvec(self, y):
        raise NotImplementedError

    def normal_matvec(self, x):
        """Apply ``A^T A`` in one call."""
        return self.rmatvec(self.matvec(x))

    def as_matrix(self):
        """Materialize the operator column by column (tests / small grids)."""
        out = np.empty((self.out_dim, self.in_dim))
        e = np.zeros(self.in_dim)
        for j in range(self.in_dim):
            e[j] = 1.0
            out[:, j] = self.matvec(e)
            e[j] = 0.0
        return out


class _GridOperator(LinearOperator):
    def __init__(self, geom: GridGeometry):
        self.geom = geom
        self.in_dim = geom.hr_size
        self.out_dim = geom.hr_size

    def _img(self, x):
        return unvec(x, self.geom.hr_shape)


class Downsample(_GridOperator):
    """Keep the top-left sample of every ``r x r`` cell (``D``).

    The adjoint scatters low-resolution values back onto that lattice,
    so ``D D^T`` is the identity on the low-resolution grid.
    """

    def __init__(self, geom):
        super().__init__(geom)
        self.out_dim = geom.lr_size

    def matvec(self, x):
        r = self.geom.r
        return vec(self._img(x)[::r, ::r])

    def rmatvec(self, y):
        r = self.geom.r
        out = np.zeros(self.geom.hr_shape)
        out[::r, ::r] = unvec(y, self.geom.lr_shape)
        return vec(out)


class Blur(_GridOperator):
    """Separable periodic blur ``K`` with the factor-``r`` window taps."""

    def __init__(self, geom):
        super().__init__(geom)
        self.taps = blur_taps(geom.r)
        self.kernel2d = np.outer(self.taps, self.taps)

    def matvec(self, x):
        out = ndimage.convolve(self._img(x), self.kernel2d, mode="wrap")
        return vec(out)

    # the kernel is symmetric, so K is self-adjoint
    rmatvec = matvec

    def spectrum(self):
        """Eigenvalues of ``K`` on the 2-D DFT basis, as an ``rm x rn`` grid."""
        rm, rn = self.geom.hr_shape
        ky = np.zeros(rm)
        kx = np.zeros(rn)
        h = len(self.taps) // 2
        for t, w in enumerate(self.taps):
            ky[(t - h) % rm] += w
            kx[(t - h) % rn] += w
        return np.outer(np.fft.fft(ky), np.fft.fft(kx))


class FractionalShift(_GridOperator):
    """Separable sub-pixel shift ``C_i = T(eps_x) (x) T(eps_y)``."""

    def __init__(self, geom, eps_x, eps_y):
        super().__init__(geom)
        for name, e in (("eps_x", eps_x), ("eps_y", eps_y)):
            if not 0.0 <= e < 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1), got {e}")
        self.eps_x = float(eps_x)
        self.eps_y = float(eps_y)

    def matvec(self, x):
        img = self._img(x)
        ex, ey = self.eps_x, self.eps_y
        out = (1.0 - ex) * img + ex * np.roll(img, -1, axis=1)
        out = (1.0 - ey) * out + ey * np.roll(out, -1, axis=0)
        return vec(out)

    def rmatvec(self, y):
        img = self._img(y)
        ex, ey = self.eps_x, self.eps_y
        out = (1.0 - ex) * img + ex * np.roll(img, 1, axis=1)
        out = (1.0 - ey) * out + ey * np.roll(out, 1, axis=0)
        return vec(out)

    def spectrum(self):
        rm, rn = self.geom.hr_shape
        wy = np.exp(2j * np.pi * np.fft.fftfreq(rm))
        wx = np.exp(2j * np.pi * np.fft.fftfreq(rn))
        fy = (1.0 - self.eps_y) + self.eps_y * wy
        fx = (1.0 - self.eps_x) + self.eps_x * wx
        return np.outer(fy, fx)


class IntegerShift(_GridOperator):
    """Separable cyclic shift ``B_i = N(l_x) (x) N(l_y)``."""

    def __init__(self, geom, l_x, l_y):
        super().__init__(geom)
        self.l_x = int(l_x)
        self.l_y = int(l_y)

    def matvec(self, x):
        return vec(np.roll(self._img(x), (-self.l_y, -self.l_x), axis=(0, 1)))

    def rmatvec(self, y):
        return vec(np.roll(self._img(y), (self.l_y, self.l_x), axis=(0, 1)))


class Window(_GridOperator):
    """Diagonal 0/1 mask selecting rows/columns valid for frame ``i``.

    Along x the first ``l_plus_x - l_x`` and last ``l_minus_x + l_x``
    columns are zeroed (likewise along y), where ``l_plus``/``l_minus``
    bound the largest positive/negative integer shifts over all frames
    and ``(l_x, l_y)`` is this frame's own shift.
    """

    def __init__(self, geom, l_x=0, l_y=0, l_plus_x=0, l_minus_x=0, l_plus_y=0, l_minus_y=0):
        super().__init__(geom)
        rm, rn = geom.hr_shape
        for name, v in (("l_plus_x", l_plus_x), ("l_minus_x", l_minus_x),
                        ("l_plus_y", l_plus_y), ("l_minus_y", l_minus_y)):
            if v < 0:
                raise InvalidInputError(f"{name} must be >= 0, got {v}")
        lo_x, hi_x = l_plus_x - l_x, rn - (l_minus_x + l_x)
        lo_y, hi_y = l_plus_y - l_y, rm - (l_minus_y + l_y)
        if not (0 <= lo_x <= hi_x <= rn and 0 <= lo_y <= hi_y <= rm):
            raise InvalidInputError(
                f"window bounds out of range: x [{lo_x}, {hi_x}) of {rn}, "
                f"y [{lo_y}, {hi_y}) of {rm}")
        wx = np.zeros(rn)
        wx[lo_x:hi_x] = 1.0
        wy = np.zeros(rm)
        wy[lo_y:hi_y] = 1.0
        self.mask = np.outer(wy, wx)
        self.diag = vec(self.mask)

    def matvec(self, x):
        return np.asarray(x) * self.diag

    rmatvec = matvec


class Composed(LinearOperator):
    """Product ``ops[0] @ ops[1] @ ... @ ops[-1]`` of compatible operators."""

    def __init__(self, *ops):
        if not ops:
            raise InvalidInputError("need at least one operator to compose")
        for a, b in zip(ops, ops[1:]):
            if a.in_dim != b.out_dim:
                raise InvalidInputError(
                    f"cannot compose: {type(a).__name__} expects {a.in_dim}, "
                    f"{type(b).__name__} produces {b.out_dim}")
        self.ops = ops
        self.in_dim = ops[-1].in_dim
        self.out_dim = ops[0].out_dim

    def matvec(self, x):
        for op in reversed(self.ops):
            x = op.matvec(x)
        return x

    def rmatvec(self, y):
        for op in self.ops:
            y = op.rmatvec(y)
        return y


def build_frame_operator(geom, eps_x, eps_y, l_x=0, l_y=0):
    """Forward operator ``D K C_i B_i`` for one frame (``B`` omitted when 0)."""
    ops = [Downsample(geom), Blur(geom), FractionalShift(geom, eps_x, eps_y)]
    if l_x or l_y:
        ops.append(IntegerShift(geom, l_x, l_y))
    return Composed(*ops)
