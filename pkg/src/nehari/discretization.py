"""Symmetry-reduced one-dimensional function spaces.

Every geometry handled here reduces to functions of one coordinate ``t`` on
an interval, integrated against a measure density ``w(t)``:

``ball``
    radial functions on a ball of radius ``radius``; ``t = |x|``,
    ``w = |S^{N-1}| t^{N-1}``, Dirichlet at the rim.
``exterior_radial``
    radial functions on ``R0 < |x| < L`` (an exterior domain truncated at
    ``L``), Dirichlet at ``L`` and at ``R0`` when ``R0 > 0``.
``sphere_angular``
    functions on ``S^N`` invariant under ``O(m) x O(n)`` (``m + n = N + 1``);
    ``t`` is the angle in ``[0, pi/2]`` and
    ``w = |S^{m-1}| |S^{n-1}| sin^{m-1} t cos^{n-1} t``.

Functions are continuous piecewise linear in ``t`` and stored as nodal
vectors.  Stiffness and mass are the exact Galerkin forms of
``int |u'|^2 w`` and ``int u^2 w``; nonlinear integrands are evaluated on
the piecewise-linear interpolant with Gauss-Legendre points in every cell,
so every discrete functional is the continuous one restricted to the
subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import eigsh
from scipy.special import gamma

__all__ = [
    "DomainSpec",
    "Space",
    "CoercivityViolation",
    "sphere_area",
    "build_space",
    "integrate",
    "integrate_power",
    "inner_product_i",
    "norm_i",
    "load_vector",
    "riesz",
    "lowest_eigenpair",
    "bubble",
    "smoothstep",
    "aubin_talenti_constant",
]

KINDS = ("ball", "exterior_radial", "sphere_angular")


class CoercivityViolation(ValueError):
    """``-Delta + kappa`` is not coercive on the space."""


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere ``S^k`` in ``R^{k+1}``."""
    return float(2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0))


def aubin_talenti_constant(N: int) -> float:
    """Best constant ``S`` of ``|w|_{2*}^2 <= S^{-1} int |grad w|^2`` on ``R^N``."""
    return N * (N - 2) / 4.0 * sphere_area(N) ** (2.0 / N)


@dataclass(frozen=True)
class DomainSpec:
    """Radial or angular reduction of the domain.

    ``grading`` (ball and exterior only) is the approximate ratio between
    the last and the first cell; values above 1 refine towards the inner end.
    """

    kind: str
    N: int
    radius: float = 1.0
    R0: float = 0.0
    L: float = 0.0
    m: int = 0
    n: int = 0
    grading: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {KINDS}")
        if self.N < 3:
            raise ValueError("N must be at least 3")
        if self.kind == "ball" and not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if self.kind == "exterior_radial" and not (self.R0 >= 0 and self.L > self.R0):
            raise ValueError("exterior_radial needs L > R0 >= 0")
        if not self.grading > 0:
            raise ValueError("grading must be positive")
        if self.kind == "sphere_angular":
            if self.m < 2 or self.n < 2:
                raise ValueError("sphere_angular needs m, n >= 2")
            if self.m + self.n != self.N + 1:
                raise ValueError("sphere_angular needs m + n = N + 1")

    @classmethod
    def ball(cls, N: int, radius: float = 1.0, grading: float = 1.0) -> "DomainSpec":
        return cls("ball", N, radius=radius, grading=grading)

    @classmethod
    def exterior(cls, N: int, R0: float, L: float, grading: float = 1.0) -> "DomainSpec":
        return cls("exterior_radial", N, R0=R0, L=L, grading=grading)

    @classmethod
    def sphere(cls, m: int, n: int) -> "DomainSpec":
        return cls("sphere_angular", m + n - 1, m=m, n=n)

    def interval(self) -> tuple[float, float]:
        if self.kind == "ball":
            return 0.0, self.radius
        if self.kind == "exterior_radial":
            return self.R0, self.L
        return 0.0, np.pi / 2.0

    def density(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "sphere_angular":
            c = sphere_area(self.m - 1) * sphere_area(self.n - 1)
            return c * np.sin(t) ** (self.m - 1) * np.cos(t) ** (self.n - 1)
        return sphere_area(self.N - 1) * t ** (self.N - 1)

    def total_measure(self) -> float:
        if self.kind == "sphere_angular":
            return sphere_area(self.N)
        a, b = self.interval()
        return sphere_area(self.N - 1) * (b**self.N - a**self.N) / self.N


@dataclass(frozen=True, eq=False)
class Space:
    """Immutable discrete space; build with :func:`build_space`.

    ``stiffness`` and ``mass`` act on full nodal vectors; ``free`` marks the
    nodes not fixed by a Dirichlet condition (a contiguous range).
    """

    domain: DomainSpec
    nodes: np.ndarray
    free: np.ndarray
    k_diag: np.ndarray
    k_off: np.ndarray
    m_diag: np.ndarray
    m_off: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray
    interp: sps.csr_matrix
    lambda1: float = field(default=np.nan)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def N(self) -> int:
        return self.domain.N

    @property
    def free_range(self) -> slice:
        idx = np.flatnonzero(self.free)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    @property
    def stiffness(self) -> sps.csr_matrix:
        return sps.diags([self.k_off, self.k_diag, self.k_off], [-1, 0, 1], format="csr")

    @property
    def mass(self) -> sps.csr_matrix:
        return sps.diags([self.m_off, self.m_diag, self.m_off], [-1, 0, 1], format="csr")

    def zeros(self, M: int | None = None) -> np.ndarray:
        return np.zeros(self.size if M is None else (M, self.size))

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.size:
            raise ValueError(f"function has {u.shape[-1]} nodal values, space has {self.size}")
        if np.any(u[..., ~self.free] != 0.0):
            raise ValueError("Dirichlet nodes must carry zero values")
        return u

    def restrict(self, f) -> np.ndarray:
        """Nodal interpolant of a callable, zeroed on Dirichlet nodes."""
        u = np.asarray(f(self.nodes), dtype=float) * np.ones(self.size)
        u[~self.free] = 0.0
        return u

    def at_quad(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return (self.interp @ u.T).T


def _grid(dom: DomainSpec, n: int) -> np.ndarray:
    # r(x) = a + (b - a) (G^x - 1) / (G - 1) on uniform x: last/first cell ratio
    # is about G and the map does not depend on n (Richardson in h stays valid)
    a, b = dom.interval()
    x = np.linspace(0.0, 1.0, n)
    if dom.kind != "sphere_angular" and dom.grading != 1.0:
        g = np.log(dom.grading)
        return a + (b - a) * np.expm1(g * x) / np.expm1(g)
    return a + (b - a) * x


def build_space(dom: DomainSpec, n: int, gauss: int = 5) -> Space:
    """Assemble the P1 space with ``n`` nodes on the domain's interval."""
    if n < 16:
        raise ValueError("need at least 16 nodes")
    t = _grid(dom, n)
    h = np.diff(t)
    xg, wg = np.polynomial.legendre.leggauss(gauss)
    xi = 0.5 * (xg + 1.0)
    tq = t[:-1, None] + h[:, None] * xi[None, :]
    wq = 0.5 * h[:, None] * wg[None, :] * dom.density(tq)

    cell_measure = wq.sum(axis=1)
    k_cell = cell_measure / h**2
    k_diag = np.zeros(n)
    k_diag[:-1] += k_cell
    k_diag[1:] += k_cell
    k_off = -k_cell

    phi0, phi1 = 1.0 - xi, xi
    m_diag = np.zeros(n)
    m_diag[:-1] += wq @ phi0**2
    m_diag[1:] += wq @ phi1**2
    m_off = wq @ (phi0 * phi1)

    nq = tq.size
    rows = np.repeat(np.arange(nq), 2)
    cells = np.repeat(np.arange(n - 1), gauss)
    cols = np.stack([cells, cells + 1], axis=1).ravel()
    vals = np.stack([np.tile(phi0, n - 1), np.tile(phi1, n - 1)], axis=1).ravel()
    interp = sps.csr_matrix((vals, (rows, cols)), shape=(nq, n))

    free = np.ones(n, dtype=bool)
    if dom.kind == "ball":
        free[-1] = False
    elif dom.kind == "exterior_radial":
        free[-1] = False
        if dom.R0 > 0:
            free[0] = False

    sp = Space(dom, t, free, k_diag, k_off, m_diag, m_off, tq.ravel(), wq.ravel(), interp)
    lam, _ = lowest_eigenpair(sp)
    object.__setattr__(sp, "lambda1", lam)
    return sp


def integrate(sp: Space, values_at_quad) -> float | np.ndarray:
    """Integrate data given at the quadrature points against the measure."""
    return np.asarray(values_at_quad) @ sp.quad_weights


def integrate_power(sp: Space, factors) -> float:
    """``int prod_f |u_f|^{e_f}`` for ``factors = [(u_f, e_f), ...]``."""
    prod = np.ones(sp.quad_weights.size)
    for u, e in factors:
        if not e > 0:
            raise ValueError("exponents must be positive")
        u = np.asarray(u, dtype=float)
        if u.shape != (sp.size,):
            raise ValueError("factor does not live on this space")
        prod = prod * np.abs(sp.interp @ u) ** e
    return float(prod @ sp.quad_weights)


def load_vector(sp: Space, values_at_quad) -> np.ndarray:
    """Nodal vector ``int f phi_k`` for ``f`` sampled at quadrature points."""
    v = np.asarray(values_at_quad) * sp.quad_weights
    return (sp.interp.T @ v.T).T


def _check_kappa(sp: Space, kappa: float, margin: float | None = None):
    if margin is None:
        margin = 1e-9 * (1.0 + abs(sp.lambda1))
    if kappa <= -sp.lambda1 + margin:
        raise CoercivityViolation(
            f"kappa={kappa:.6g} is not above -lambda_1={-sp.lambda1:.6g}")


def _apply(sp: Space, kappa: float, u) -> np.ndarray:
    d = sp.k_diag + kappa * sp.m_diag
    o = sp.k_off + kappa * sp.m_off
    u = np.asarray(u, dtype=float)
    out = d * u
    out[..., :-1] += o * u[..., 1:]
    out[..., 1:] += o * u[..., :-1]
    return out


def _bilinear(sp: Space, kappa: float, u, v):
    # stiffness part in difference form: avoids the O(h^-2) cancellation of u.K u
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du, dv = np.diff(u, axis=-1), np.diff(v, axis=-1)
    stiff = np.sum(-sp.k_off * du * dv, axis=-1)
    mass = np.sum(sp.m_diag * u * v, axis=-1) + np.sum(
        sp.m_off * (u[..., :-1] * v[..., 1:] + u[..., 1:] * v[..., :-1]), axis=-1)
    return stiff + kappa * mass


def inner_product_i(sp: Space, kappa_i: float, u, v, check: bool = True) -> float:
    """``int (u' v' + kappa_i u v) w``."""
    if check:
        _check_kappa(sp, kappa_i)
    return float(_bilinear(sp, kappa_i, u, v))


def norm_i(sp: Space, kappa_i: float, u) -> float | np.ndarray:
    return np.sqrt(np.maximum(_bilinear(sp, kappa_i, u, u), 0.0))


def riesz(sp: Space, kappa: float, r) -> np.ndarray:
    """Solve ``(K + kappa M) g = r`` on the free nodes; ``r`` may be stacked."""
    fr = sp.free_range
    d = (sp.k_diag + kappa * sp.m_diag)[fr]
    o = (sp.k_off + kappa * sp.m_off)[fr.start:fr.stop - 1]
    ab = np.zeros((2, d.size))
    ab[0, 1:] = o
    ab[1] = d
    r = np.asarray(r, dtype=float)
    g = np.zeros_like(r)
    g[..., fr] = solveh_banded(ab, r[..., fr].T, check_finite=False).T
    return g


def lowest_eigenpair(sp: Space, kappa: float = 0.0) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of ``K + kappa M`` relative to ``M``.

    The eigenvector is mass-normalised and positive.
    """
    fr = sp.free_range
    K = sp.stiffness[fr, fr] + kappa * sp.mass[fr, fr]
    Mm = sp.mass[fr, fr]
    lam, vec = eigsh(K.tocsc(), k=1, M=Mm.tocsc(), sigma=kappa - 1.0, which="LM")
    u = np.zeros(sp.size)
    u[fr] = vec[:, 0]
    if u.sum() < 0:
        u = -u
    u /= np.sqrt(u @ (sp.mass @ u))
    return float(lam[0]), u


def smoothstep(x):
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 in between."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def bubble(sp: Space, eps: float, mu: float = 1.0, cutoff_radius: float | None = None) -> np.ndarray:
    """Cut-off Aubin-Talenti bubble centred at the origin.

    ``w(r) = chi(r) mu^{(2-N)/4} a_N (eps / (eps^2 + r^2))^{(N-2)/2}`` with
    ``a_N = (N(N-2))^{(N-2)/4}`` and ``chi`` equal to 1 on
    ``[0, cutoff_radius/2]`` and 0 beyond ``cutoff_radius``.
    """
    dom = sp.domain
    if dom.kind != "ball":
        raise ValueError("bubbles are defined on ball spaces")
    N = dom.N
    if N < 4:
        raise ValueError("bubble needs N >= 4")
    if cutoff_radius is None:
        cutoff_radius = dom.radius
    if not 0 < eps <= cutoff_radius <= dom.radius:
        raise ValueError("need 0 < eps <= cutoff_radius <= radius")
    if not mu > 0:
        raise ValueError("mu must be positive")
    r = sp.nodes
    a_N = (N * (N - 2)) ** ((N - 2) / 4.0)
    chi = smoothstep((cutoff_radius - r) / (0.5 * cutoff_radius))
    w = chi * mu ** ((2.0 - N) / 4.0) * a_N * (eps / (eps**2 + r**2)) ** ((N - 2) / 2.0)
    w[~sp.free] = 0.0
    return w
