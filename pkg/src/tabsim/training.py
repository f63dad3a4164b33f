"""Output-weight solvers for the linear readout.

The readout minimizes the mean squared error

    cost(w) = 1/(2C) * ||H w - y||^2

either without constraints (Tikhonov-filtered pseudoinverse) or inside the
box that the current splitter can realize (projected gradient).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllConditionedError
from .network import OutputWeights

__all__ = [
    "BOX",
    "SolverOptions",
    "FitReport",
    "cost",
    "grad",
    "finite_diff_grad",
    "pseudoinverse_solve",
    "constrained_solve",
]

# largest magnitude a 12-bit splitter can encode
BOX = 1.0 - 2.0**-12


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    tol_rel_cost: float = 1e-10
    step_init: float = 1.0
    ridge: float = 1e-10
    box: tuple = (-BOX, BOX)
    # active-set refinement after each gradient step; False gives plain projected gradient
    active_set: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.tol_rel_cost >= 0:
            raise DomainError("tol_rel_cost must be >= 0")
        if not self.step_init > 0:
            raise DomainError("step_init must be positive")
        if not self.ridge >= 0:
            raise DomainError("ridge must be >= 0")
        lo, hi = self.box
        if not lo < hi:
            raise DomainError(f"empty box {self.box}")


@dataclass
class FitReport:
    final_cost: float
    iterations: int
    converged: bool
    active_box_fraction: float
    history: list = field(default_factory=list, repr=False)


def _values(w):
    return w.values if isinstance(w, OutputWeights) else np.asarray(w, dtype=float)


def _check(H, w, y):
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=float)
    if H.ndim != 2 or H.shape[0] == 0 or H.shape[1] == 0:
        raise DomainError(f"activation matrix must be non-empty 2-D, got shape {H.shape}")
    if y.shape != (H.shape[0],):
        raise DomainError(f"targets have shape {y.shape}, expected ({H.shape[0]},)")
    if w is not None and w.shape != (H.shape[1],):
        raise DomainError(f"weights have shape {w.shape}, expected ({H.shape[1]},)")
    return H, y


def cost(H, w, y):
    w = _values(w)
    H, y = _check(H, w, y)
    r = H @ w - y
    return float(r @ r) / (2.0 * H.shape[0])


def grad(H, w, y):
    """Exact gradient ``H^T (H w - y) / C`` of :func:`cost`."""
    w = _values(w)
    H, y = _check(H, w, y)
    return H.T @ (H @ w - y) / H.shape[0]


def finite_diff_grad(H, w, y, h=1e-6):
    """Central-difference gradient of :func:`cost`, one coordinate at a time."""
    if not h > 0:
        raise DomainError("finite-difference step must be positive")
    w = np.array(_values(w), dtype=float)
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (cost(H, w + e, y) - cost(H, w - e, y)) / (2.0 * h)
    return g


def pseudoinverse_solve(H, y, opts=SolverOptions()):
    """Least-squares weights via a Tikhonov-filtered SVD.

    Singular values are inverted as ``s / (s^2 + ridge)``, which equals the
    Moore-Penrose pseudoinverse for ``s^2 >> ridge`` and damps the rest.
    With ``ridge == 0`` a rank-deficient ``H`` is an error.
    """
    H, y = _check(H, None, y)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(y))):
        raise IllConditionedError("non-finite activation matrix or targets", float("inf"))
    try:
        U, s, Vt = np.linalg.svd(H, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"SVD failed: {exc}", float("inf")) from exc
    s_max = s[0] if s.size else 0.0
    cond = s_max / s[-1] if s[-1] > 0 else float("inf")
    if s_max == 0.0:
        raise IllConditionedError("activation matrix is identically zero", cond)
    if opts.ridge > 0:
        inv = s / (s * s + opts.ridge)
    else:
        cutoff = np.finfo(float).eps * max(H.shape) * s_max
        if s[-1] <= cutoff:
            raise IllConditionedError("rank-deficient activation matrix with ridge = 0", cond)
        inv = 1.0 / s
    w = Vt.T @ (inv * (U.T @ y))
    return OutputWeights(w, box=opts.box, constrained=False, meta={"cond": cond})


def _active_set_refine(H, y, w, lo, hi, f, max_moves):
    """Primal active-set descent from a feasible point (bounded least squares).

    Coordinates at a bound are held there; the others move toward the
    least-squares minimizer over the free face, stopping at the first bound
    they meet (which joins the held set).  On a stationary face the held
    coordinate whose gradient points most strongly into the box is released.
    Every move lowers the convex cost, so the result is never worse than
    ``f``.
    """
    held = (w <= lo) | (w >= hi)
    for _ in range(max_moves):
        free = ~held
        d = None
        if free.any():
            rhs = y - H[:, held] @ w[held]
            z = np.linalg.lstsq(H[:, free], rhs, rcond=None)[0]
            d = z - w[free]
            if np.linalg.norm(d) <= 1e-13 * (1.0 + np.linalg.norm(w)):
                d = None
        if d is None:
            g = grad(H, w, y)
            tol = 1e-13 * (1.0 + np.abs(g).max())
            pull = np.where(held & (w <= lo), -g, 0.0) + np.where(held & (w >= hi), g, 0.0)
            k = int(np.argmax(pull))
            if pull[k] <= tol:
                break
            held[k] = False
            continue
        wf = w[free]
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d > 0, (hi - wf) / d, np.where(d < 0, (lo - wf) / d, np.inf))
        t = float(np.min(room))
        trial = w.copy()
        if t >= 1.0:
            trial[free] = np.clip(z, lo, hi)
        else:
            t = max(t, 0.0)
            trial[free] = np.clip(wf + t * d, lo, hi)
            blocking = np.flatnonzero(free)[room <= t]
            trial[blocking] = np.where(d[room <= t] > 0, hi, lo)
        ft = cost(H, trial, y)
        if ft > f:
            break
        w, f = trial, ft
        held = (w <= lo) | (w >= hi)
        if t >= 1.0:
            # on the face minimizer; next pass checks the multipliers
            continue
    return w, f


def constrained_solve(H, y, opts=SolverOptions()):
    """Box-constrained least squares by projected gradient with backtracking.

    Starts from the clipped pseudoinverse solution.  Each iteration takes a
    projected gradient step, halving the step until the cost does not rise
    and growing it by 1.5x after acceptance.  With ``opts.active_set`` the
    step is followed by :func:`_active_set_refine`; tanh activation matrices
    are so ill-conditioned that gradient steps alone stall far from the
    optimum.  Accepted costs never increase.  Stops when an iteration
    improves the cost by less than ``tol_rel_cost`` (relative).
    """
    H, y = _check(H, None, y)
    lo, hi = opts.box
    w = np.clip(pseudoinverse_solve(H, y, opts).values, lo, hi)
    f = cost(H, w, y)
    history = [f]
    eta = opts.step_init
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = grad(H, w, y)
        w_new, f_new = w, f
        for _ in range(60):
            trial = np.clip(w - eta * g, lo, hi)
            ft = cost(H, trial, y)
            if ft <= f:
                w_new, f_new = trial, ft
                break
            eta *= 0.5
        if opts.active_set:
            w_new, f_new = _active_set_refine(H, y, w_new, lo, hi, f_new, 20 * H.shape[1] + 100)
        rel = (f - f_new) / f if f > 0 else 0.0
        w, f = w_new, f_new
        history.append(f)
        eta *= 1.5
        if rel <= opts.tol_rel_cost:
            converged = True
            break
    at_edge = np.mean((w <= lo) | (w >= hi))
    report = FitReport(f, it, converged, float(at_edge), history)
    return OutputWeights(w, box=opts.box, constrained=True), report
