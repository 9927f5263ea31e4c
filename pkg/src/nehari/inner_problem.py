"""The finite-dimensional inner problem.

For positive scalings ``s = (s_1, ..., s_M)`` the reduced energy of a tuple
is the function

    J(s) = sum_i a_i s_i^2 - sum_i b_i s_i^p + sum_{i != j} d_ij s_j^alpha_ij s_i^beta_ij

with ``a, b > 0``, ``d >= 0`` symmetric and ``alpha_ij + beta_ij = p``,
``alpha_ij = beta_ji``.  An interior critical point of ``J``, when it exists,
is unique and is the global maximum.  This module evaluates ``J`` and its
derivatives, brackets the maximiser and computes it by a safeguarded
projected Newton iteration.  ``brute_force_max`` is an exhaustive grid
search used to check the solver.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CouplingData",
    "Bracket",
    "CriticalPoint",
    "DomainError",
    "Infeasible",
    "NoInteriorCriticalPoint",
    "IterationLimit",
    "CostGuard",
    "eval_J",
    "grad_J",
    "hess_J",
    "bracket",
    "search_box",
    "maximize",
    "brute_force_max",
    "refined_log_step",
    "SAFETY",
]

SAFETY = 1e-3
MAX_COMPONENTS = 16
GRID_BUDGET = 20_000_000


class DomainError(ValueError):
    """Raised when J is evaluated outside (0, inf)^M."""


class Infeasible(ValueError):
    """The sufficient condition ``p b_i > 2 sum_j d_ij beta_ij`` fails."""


class NoInteriorCriticalPoint(RuntimeError):
    """J has no critical point in the open orthant."""


class IterationLimit(RuntimeError):
    pass


class CostGuard(ValueError):
    pass


@dataclass(frozen=True)
class CouplingData:
    """Coefficients of J.

    ``d``, ``alpha`` and ``beta`` are ``(M, M)`` arrays whose diagonals are
    ignored (and stored as zero).
    """

    p: float
    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        m = a.size
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        d = _square(self.d, m, "d")
        alpha = _square(self.alpha, m, "alpha")
        beta = _square(self.beta, m, "beta")
        for name, arr in (("a", a), ("b", b)):
            if arr.shape != (m,):
                raise ValueError(f"{name} must have shape ({m},), got {arr.shape}")
            if not np.all(arr > 0):
                raise ValueError(f"{name} must be positive")
        if m > MAX_COMPONENTS:
            raise ValueError(f"M={m} exceeds the supported maximum {MAX_COMPONENTS}")
        p = float(self.p)
        if not p > 2:
            raise ValueError("p must exceed 2")
        off = ~np.eye(m, dtype=bool)
        if np.any(d[off] < 0) or not np.allclose(d, d.T, rtol=1e-12, atol=0):
            raise ValueError("d must be symmetric and nonnegative")
        if m > 1:
            if np.any(alpha[off] <= 1) or np.any(beta[off] <= 1):
                raise ValueError("alpha_ij and beta_ij must exceed 1")
            if not np.allclose(alpha[off] + beta[off], p, rtol=1e-12, atol=1e-12):
                raise ValueError("alpha_ij + beta_ij must equal p")
            if not np.allclose(alpha, beta.T, rtol=1e-12, atol=1e-12):
                raise ValueError("alpha_ij must equal beta_ji")
        for arr in (d, alpha, beta):
            np.fill_diagonal(arr, 0.0)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def M(self) -> int:
        return self.a.size

    @classmethod
    def symmetric(cls, p, a, b, d=None):
        """Instance with ``alpha_ij = beta_ij = p/2``; ``d`` may be a scalar."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        m = a.size
        if d is None:
            d = 0.0
        d = np.asarray(d, dtype=float)
        if d.ndim == 0:
            d = np.full((m, m), float(d))
        half = np.full((m, m), p / 2.0)
        return cls(p, a, b, d, half, half)

    def scaled(self, factor: float) -> "CouplingData":
        return CouplingData(self.p, factor * self.a, factor * self.b, factor * self.d,
                            self.alpha, self.beta)

    def cross_load(self) -> np.ndarray:
        """``2 sum_{j != i} d_ij beta_ij`` for each i."""
        return 2.0 * np.sum(self.d * self.beta, axis=1)

    def is_feasible(self) -> bool:
        return bool(np.all(self.p * self.b > self.cross_load()))


def _square(x, m, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full((m, m), float(arr))
    arr = np.array(arr, dtype=float)
    if arr.shape != (m, m):
        raise ValueError(f"{name} must have shape ({m}, {m}), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class Bracket:
    r: float
    R: float


@dataclass(frozen=True)
class CriticalPoint:
    """Result of :func:`maximize`.

    ``status`` is one of ``"converged"``, ``"no_interior_critical_point"``
    or ``"iteration_limit"``.
    """

    s: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    status: str = "converged"

    def raise_for_status(self):
        if self.status == "no_interior_critical_point":
            raise NoInteriorCriticalPoint(
                f"no interior critical point (|grad J|={self.grad_norm:.3e}, s={self.s})")
        if self.status == "iteration_limit":
            raise IterationLimit(
                f"inner maximisation stopped after {self.iterations} iterations "
                f"with |grad J|={self.grad_norm:.3e}")
        return self


def _check_positive(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("J is only defined for s in (0, inf)^M")
    return s


def _pairs(m):
    return [(i, j) for i in range(m) for j in range(m) if i != j]


def eval_J(c: CouplingData, s) -> np.ndarray | float:
    """Evaluate J at ``s``; a trailing axis of length M is vectorised over."""
    s = _check_positive(s)
    value = (s**2) @ c.a - (s**c.p) @ c.b
    for i, j in _pairs(c.M):
        if c.d[i, j] != 0.0:
            value = value + c.d[i, j] * s[..., j] ** c.alpha[i, j] * s[..., i] ** c.beta[i, j]
    return value


def grad_J(c: CouplingData, s) -> np.ndarray:
    s = _check_positive(s)
    g = 2.0 * c.a * s - c.p * c.b * s ** (c.p - 1.0)
    g = np.array(g, dtype=float)
    for i, j in _pairs(c.M):
        if c.d[i, j] != 0.0:
            g[..., i] += (2.0 * c.d[i, j] * c.beta[i, j]
                          * s[..., j] ** c.alpha[i, j] * s[..., i] ** (c.beta[i, j] - 1.0))
    return g


def hess_J(c: CouplingData, s) -> np.ndarray:
    s = _check_positive(s)
    m = c.M
    h = np.zeros((m, m))
    h[np.diag_indices(m)] = 2.0 * c.a - c.p * (c.p - 1.0) * c.b * s ** (c.p - 2.0)
    for i, j in _pairs(m):
        if c.d[i, j] == 0.0:
            continue
        dij, al, be = c.d[i, j], c.alpha[i, j], c.beta[i, j]
        h[i, i] += 2.0 * dij * be * (be - 1.0) * s[j] ** al * s[i] ** (be - 2.0)
        h[i, j] += 2.0 * dij * be * al * s[j] ** (al - 1.0) * s[i] ** (be - 1.0)
    return h


def bracket(c: CouplingData, eta: float = SAFETY) -> Bracket:
    """Box ``[r, R]^M`` that contains the maximiser of J.

    Raises
    ------
    Infeasible
        If ``p b_i <= 2 sum_j d_ij beta_ij`` for some i.
    """
    load = c.cross_load()
    slack = c.p * c.b - load
    if np.any(slack <= 0):
        bad = int(np.argmin(slack))
        raise Infeasible(
            f"p*b[{bad}] = {c.p * c.b[bad]:.6g} <= 2*sum_j d*beta = {load[bad]:.6g}")
    e = 1.0 / (c.p - 2.0)
    r = (1.0 - eta) * np.min((2.0 * c.a / (c.p * c.b)) ** e)
    R = (1.0 + eta) * np.max((2.0 * c.a / slack) ** e)
    return Bracket(float(r), float(R))


def search_box(c: CouplingData, eta: float = SAFETY, reach: float = 1e6) -> Bracket:
    """Bracket when feasible, otherwise ``[r, reach * r_0]``.

    The lower end is valid for every instance since the cross terms are
    nonnegative; without feasibility no finite upper end is known, so a wide
    one is used and a maximiser pinned to it is reported as escaping.
    """
    if c.is_feasible():
        return bracket(c, eta)
    e = 1.0 / (c.p - 2.0)
    roots = (2.0 * c.a / (c.p * c.b)) ** e
    return Bracket(float((1.0 - eta) * roots.min()), float(reach * roots.max()))


def maximize(c: CouplingData, tol: float = 1e-10, max_iter: int = 200,
             s0=None, c1: float = 1e-4) -> CriticalPoint:
    """Locate the interior maximiser of J.

    Projected Newton with Armijo backtracking on ``-J`` in the variables
    ``x = log s``, clamped to the box from :func:`search_box`.  When the
    Hessian fails to be negative definite the step falls back to
    componentwise ascent.  Never raises for a valid instance; inspect
    ``status`` or call :meth:`CriticalPoint.raise_for_status`.
    """
    box = search_box(c)
    lo, hi = np.log(box.r), np.log(box.R)
    if s0 is None:
        s0 = (2.0 * c.a / (c.p * c.b)) ** (1.0 / (c.p - 2.0))
    x = np.clip(np.log(np.broadcast_to(np.asarray(s0, dtype=float), (c.M,))), lo, hi)
    edge = 1e-12 * max(1.0, abs(lo), abs(hi))

    def state(x):
        s = np.exp(x)
        return s, float(eval_J(c, s)), grad_J(c, s)

    s, val, g = state(x)
    it = 0
    while True:
        gmax = float(np.max(np.abs(g)))
        at_hi = (x >= hi - edge) & (g > 0)
        at_lo = (x <= lo + edge) & (g < 0)
        active = at_hi | at_lo
        if gmax <= tol:
            return CriticalPoint(s, val, gmax, it, True, "converged")
        free_g = np.abs(g[~active]).max() if np.any(~active) else 0.0
        if np.any(active) and free_g <= tol:
            return CriticalPoint(s, val, gmax, it, False, "no_interior_critical_point")
        if it >= max_iter:
            return CriticalPoint(s, val, gmax, it, False, "iteration_limit")
        it += 1

        gx = s * g  # gradient of J in log variables
        hx = hess_J(c, s) * np.outer(s, s) + np.diag(gx)
        free = ~active
        dx = np.zeros_like(x)
        newton = False
        hf = -hx[np.ix_(free, free)]
        try:
            chol = np.linalg.cholesky(hf)
            dx[free] = np.linalg.solve(chol.T, np.linalg.solve(chol, gx[free]))
            newton = True
        except np.linalg.LinAlgError:
            # indefinite: Newton with absolute eigenvalues keeps the ascent
            # direction and the curvature scaling
            w, v = np.linalg.eigh(hf)
            w = np.maximum(np.abs(w), 1e-10 * max(np.abs(w).max(), 1e-300))
            dx[free] = v @ ((v.T @ gx[free]) / w)
        step_cap = np.max(np.abs(dx))
        if step_cap > 1.0:
            dx /= step_cap

        t = 1.0
        accepted = False
        while t > 1e-14:
            x_new = np.clip(x + t * dx, lo, hi)
            s_new, val_new, g_new = state(x_new)
            gain = gx @ (x_new - x)
            if val_new >= val + c1 * gain and val_new > val - 1e-15 * abs(val):
                accepted = True
            elif newton and t == 1.0 and np.max(np.abs(g_new)) < 0.5 * gmax:
                # Armijo is below roundoff here; fall back on the gradient merit.
                accepted = True
            if accepted:
                break
            t *= 0.5
        if not accepted:
            at_bound = np.any(active) or np.any((x >= hi - edge) | (x <= lo + edge))
            status = "no_interior_critical_point" if at_bound else "iteration_limit"
            return CriticalPoint(s, val, gmax, it, False, status)
        x, s, val, g = x_new, s_new, val_new, g_new


def _log_grid(lo, hi, n):
    return np.exp(np.linspace(np.log(lo), np.log(hi), n))


def refined_log_step(lo: float, hi: float, n: int, refine: int = 0) -> float:
    """Log-spacing of the last lattice searched by :func:`brute_force_max`."""
    h = (np.log(hi) - np.log(lo)) / (n - 1)
    for _ in range(refine):
        h = 4.0 * h / (n - 1)
    return h


def brute_force_max(c: CouplingData, lo: float, hi: float, n: int, refine: int = 0,
                    budget: int = GRID_BUDGET) -> np.ndarray:
    """Exhaustive maximisation of J over a log-spaced lattice on ``[lo, hi]^M``.

    With ``refine > 0`` the search is repeated on a fresh n^M lattice
    spanning two cells either side of the incumbent.
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    if n < 2:
        raise ValueError("need n >= 2")
    if float(n) ** c.M > budget:
        raise CostGuard(f"{n}^{c.M} lattice points exceed budget {budget}")
    axes = [_log_grid(lo, hi, n)] * c.M
    h = (np.log(hi) - np.log(lo)) / (n - 1)
    best = _grid_argmax(c, axes)
    for _ in range(refine):
        axes = [np.exp(np.linspace(np.log(b) - 2 * h, np.log(b) + 2 * h, n)) for b in best]
        h = 4.0 * h / (n - 1)
        best = _grid_argmax(c, axes)
    return best


def _grid_argmax(c, axes, chunk=1 << 18):
    m = len(axes)
    n_first = axes[0].size
    rest = list(itertools.product(*[range(ax.size) for ax in axes[1:]])) if m > 1 else [()]
    rest = np.array(rest, dtype=int).reshape(len(rest), m - 1)
    rest_vals = np.stack([axes[k + 1][rest[:, k]] for k in range(m - 1)], axis=1) \
        if m > 1 else np.zeros((1, 0))
    best_val, best = -np.inf, None
    rows_per_chunk = max(1, chunk // max(1, len(rest_vals)))
    for start in range(0, n_first, rows_per_chunk):
        first = axes[0][start:start + rows_per_chunk]
        pts = np.concatenate([
            np.repeat(first, len(rest_vals))[:, None],
            np.tile(rest_vals, (first.size, 1)),
        ], axis=1)
        vals = eval_J(c, pts)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best = float(vals[k]), pts[k].copy()
    return best
