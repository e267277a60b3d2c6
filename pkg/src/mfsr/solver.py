"""Low-rank fusion solver.

Stacks the per-frame high-resolution estimates as columns of ``F`` and
minimizes a nuclear-norm-regularized least-squares objective

    lambda * ||W o F||_* + 1/2 sum_i ||g_i - A_i f_i||^2

by an alternating scheme: a singular-value threshold on the masked
stack, one conjugate-gradient solve per frame, then a scaled dual
update.  The fused image is the column average of ``F``.

The dual step size follows the printed scheme this implements (the
multiplier moves by ``1/rho`` while the threshold is ``lambda * rho``),
so the effective nuclear weight at a fixed point is ``lambda * rho``.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverDivergedError
from .operators import LinearOperator

# ---------------------------------------------------------------------------
# singular-value machinery

_SV_DROP = 1e-12  # relative cutoff below which directions are treated as null


def singular_values(x):
    """Descending singular values of ``x`` via the Gram matrix of its short side."""
    x = np.asarray(x, dtype=float)
    g = x.T @ x if x.shape[1] <= x.shape[0] else x @ x.T
    w = np.linalg.eigvalsh(g)
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def nuclear_norm(x):
    return float(singular_values(x).sum())


def svt(x, tau):
    """Singular-value thresholding ``U max(S - tau, 0) V^T``.

    Works through the eigendecomposition of the short-side Gram matrix,
    so the cost is O(N p^2) for an ``N x p`` stack with small ``p``.
    Directions with singular value below ``1e-12`` of the largest are
    dropped (they are null up to round-off and their quotient is
    unstable).
    """
    x = np.asarray(x, dtype=float)
    if tau < 0:
        raise InvalidInputError(f"threshold must be >= 0, got {tau}")
    if x.shape[1] > x.shape[0]:
        return svt(x.T, tau).T
    g = x.T @ x
    w, v = np.linalg.eigh(g)
    sigma = np.sqrt(np.clip(w, 0.0, None))
    smax = sigma.max(initial=0.0)
    if smax == 0.0:
        return np.zeros_like(x)
    keep = sigma > _SV_DROP * smax
    scale = np.zeros_like(sigma)
    scale[keep] = np.maximum(sigma[keep] - tau, 0.0) / sigma[keep]
    return (x @ v) @ (v * scale).T


# ---------------------------------------------------------------------------
# per-frame data

@dataclass
class FrameTerm:
    """One frame's contribution: data vector, forward operator, window diagonal."""

    g: np.ndarray
    forward: LinearOperator
    window: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        self.window = np.asarray(self.window, dtype=float).reshape(-1)
        if self.forward.out_dim != self.g.size:
            raise InvalidInputError(
                f"operator output {self.forward.out_dim} != data size {self.g.size}")
        if self.forward.in_dim != self.window.size:
            raise InvalidInputError(
                f"operator input {self.forward.in_dim} != window size {self.window.size}")


def solve_f_subproblem(term, h_col, lam_col, rho, x0, tol=1e-8, max_iters=500):
    """One frame update: CG on the regularized normal equations.

    Solves ``(A^T A + (1/rho) W) f = A^T g + W lam + (1/rho) W h`` from
    the warm start ``x0``.  The system can be singular (the window
    zeroes rows and ``A`` has a null space) but stays consistent; CG
    handles that as long as the iterates remain in the range, so the
    best (lowest-residual) iterate is tracked and returned.

    Returns ``(x, iterations, converged)``.
    """
    a = term.forward
    w = term.window
    inv_rho = 1.0 / rho

    def matvec(x):
        return a.rmatvec(a.matvec(x)) + inv_rho * (w * x)

    rhs = a.rmatvec(term.g) + w * lam_col + inv_rho * (w * h_col)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, True

    x = np.array(x0, dtype=float, copy=True)
    r = rhs - matvec(x)
    p = r.copy()
    rs = float(r @ r)
    best_x, best_rn = x.copy(), np.sqrt(rs)
    if best_rn <= tol * bnorm:
        return x, 0, True
    for it in range(1, max_iters + 1):
        ap = matvec(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            # numerically lost positive-definiteness; bail with best so far
            return best_x, it, False
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        rn = np.sqrt(rs_new)
        if rn < best_rn:
            best_rn = rn
            best_x = x.copy()
        if rn <= tol * bnorm:
            return x, it, True
        p = r + (rs_new / rs) * p
        rs = rs_new
    return best_x, max_iters, False


def estimate_lambda(stack, terms):
    """Balance the data misfit against the masked stack's nuclear norm.

    ``lambda = (1/2 sum_i ||g_i - A_i f_i||^2) / ||W o F||_*`` evaluated
    at the given stack.  Returns ``(value, fallback)`` where ``fallback``
    flags a degenerate denominator (< 1e-12), in which case the value
    is 1.0.
    """
    resid = 0.0
    for i, term in enumerate(terms):
        d = term.g - term.forward.matvec(stack[:, i])
        resid += float(d @ d)
    masked = stack * np.stack([t.window for t in terms], axis=1)
    denom = nuclear_norm(masked)
    if denom < 1e-12:
        return 1.0, True
    return 0.5 * resid / denom, False


# ---------------------------------------------------------------------------
# ADMM driver

@dataclass
class SolverConfig:
    lam: object = "auto"        # float >= 0, or "auto" to balance at the start
    rho: float = 400.0
    max_iters: int = 50
    rel_tol: float = 1e-4       # stop when the relative F-change drops below this
    cg_tol: float = 1e-8
    cg_max_iters: int = 500
    reestimate_lambda: bool = False
    threads: int = 1

    def validate(self):
        if self.lam != "auto":
            if not np.isreal(self.lam) or float(self.lam) < 0:
                raise InvalidInputError(
                    f"lambda must be a number >= 0 or 'auto', got {self.lam!r}")
        if self.rho <= 0:
            raise InvalidInputError(f"rho must be positive, got {self.rho}")
        if self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.threads < 1:
            raise InvalidInputError(f"threads must be >= 1, got {self.threads}")


@dataclass
class SolveReport:
    iterations: int = 0
    lambda_used: float = 0.0
    lambda_source: str = "given"   # given | auto | fallback
    rho: float = 0.0
    objective: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)
    f_change: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    wall_ms: float = 0.0
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "lambda": self.lambda_used,
            "lambda_source": self.lambda_source,
            "rho": self.rho,
            "objective": self.objective,
            "primal_residual": self.primal_residual,
            "f_change": self.f_change,
            "cg_iterations": self.cg_iterations,
            "wall_ms": self.wall_ms,
            "warnings": self.warnings,
        }


@dataclass
class AdmmResult:
    f: np.ndarray        # fused high-resolution vector (column average)
    stack: np.ndarray    # final per-frame stack F
    report: SolveReport


def admm_solve(terms, config=None, f0=None):
    """Run the alternating solver over a list of :class:`FrameTerm`.

    Initialization: each column of ``F`` starts at the adjoint image
    ``A_i^T g_i`` unless ``f0`` (an ``N x p`` array) supplies a better
    starting stack; the multiplier starts at zero.  An automatic
    ``lam`` is balanced against whichever initialization is in effect,
    so callers with a decent upsampled guess get a far saner weight
    than the adjoint image (whose misfit is a large fraction of the
    signal energy) would suggest.  Per iteration: threshold
    the masked stack, solve the per-frame quadratic subproblems (warm
    started, optionally in parallel — frames are independent), update
    the multiplier, then record objective, primal residual and relative
    F-change.  Non-finite iterates abort with the iteration index.
    """
    if not terms:
        raise InvalidInputError("need at least one frame")
    config = config or SolverConfig()
    config.validate()
    n = terms[0].forward.in_dim
    for t in terms:
        if t.forward.in_dim != n:
            raise InvalidInputError("all frames must share the high-resolution grid")

    t0 = time.perf_counter()
    p = len(terms)
    masks = np.stack([t.window for t in terms], axis=1)
    if f0 is None:
        stack = np.stack([t.forward.rmatvec(t.g) for t in terms], axis=1)
    else:
        stack = np.array(f0, dtype=float)
        if stack.shape != (n, p):
            raise InvalidInputError(f"f0 must have shape {(n, p)}, got {stack.shape}")
    dual = np.zeros_like(stack)
    report = SolveReport(rho=config.rho)

    if config.lam == "auto":
        lam, fell_back = estimate_lambda(stack, terms)
        report.lambda_source = "fallback" if fell_back else "auto"
        if fell_back:
            report.warnings.append(
                "lambda estimate degenerate (nuclear norm < 1e-12); using 1.0")
    else:
        lam = float(config.lam)
        report.lambda_source = "given"
    report.lambda_used = lam

    inv_rho = 1.0 / config.rho
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for k in range(1, config.max_iters + 1):
            masked = masks * stack
            h = svt(masked - dual, lam * config.rho)

            prev = stack.copy()

            def update(i):
                return solve_f_subproblem(
                    terms[i], h[:, i], dual[:, i], config.rho, stack[:, i],
                    tol=config.cg_tol, max_iters=config.cg_max_iters)

            results = list(pool.map(update, range(p))) if pool else [update(i) for i in range(p)]
            cg_total = 0
            for i, (x, its, ok) in enumerate(results):
                stack[:, i] = x
                cg_total += its
                if not ok:
                    report.warnings.append(
                        f"cg: frame {i} missed tol at iteration {k} ({its} steps)")

            masked = masks * stack
            dual = dual + inv_rho * (h - masked)

            if not (np.isfinite(stack).all() and np.isfinite(dual).all()
                    and np.isfinite(h).all()):
                raise SolverDivergedError(k)

            resid = 0.0
            for i, t in enumerate(terms):
                d = t.g - t.forward.matvec(stack[:, i])
                resid += float(d @ d)
            report.objective.append(lam * nuclear_norm(masked) + 0.5 * resid)
            report.primal_residual.append(float(np.linalg.norm(h - masked)))
            report.cg_iterations.append(cg_total)
            denom = max(np.linalg.norm(prev), 1e-30)
            change = float(np.linalg.norm(stack - prev) / denom)
            report.f_change.append(change)
            report.iterations = k

            if config.reestimate_lambda:
                lam, fell_back = estimate_lambda(stack, terms)
                report.lambda_used = lam
                if fell_back:
                    report.warnings.append(f"lambda re-estimate degenerate at iteration {k}")

            if change < config.rel_tol:
                break
    finally:
        if pool:
            pool.shutdown()

    report.wall_ms = (time.perf_counter() - t0) * 1000.0
    return AdmmResult(f=stack.mean(axis=1), stack=stack, report=report)
