"""System energy, Nehari projection and the reduced functional on the torus.

A tuple ``u`` is an ``(M, n)`` array of nodal values on a shared
:class:`~nehari.discretization.Space`.  For the system

    -Delta u_i + kappa_i u_i = mu_i |u_i|^{p-2} u_i
                               + sum_{j != i} lambda_ij beta_ij |u_j|^alpha_ij |u_i|^{beta_ij-2} u_i

the energy is ``E(u) = 1/2 sum ||u_i||_i^2 - 1/p sum int mu_i |u_i|^p
- 1/2 sum_{i != j} int lambda_ij |u_j|^alpha_ij |u_i|^beta_ij``.  Scaling
each component, ``E(s u) = J_u(s)`` with the coefficients returned by
:func:`coeffs_of`, so projecting onto the Nehari set is the inner problem
of :mod:`nehari.inner_problem`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from .discretization import CoercivityViolation, DomainSpec, Space
from .inner_problem import CouplingData, eval_J, grad_J, maximize

__all__ = [
    "SpecError",
    "SignError",
    "ExponentError",
    "SymmetryError",
    "NotInU",
    "TrivialComponent",
    "SystemSpec",
    "System",
    "NehariPoint",
    "critical_exponent",
    "validate_spec",
    "coeffs_of",
    "energy",
    "energy_derivative",
    "energy_gradient",
    "nehari_residuals",
    "component_norms",
    "project_nehari",
    "normalize_to_torus",
    "psi",
    "psi_gradient",
    "tangent_project",
    "synchronization_threshold",
    "subsystem",
    "embed",
]


class SpecError(ValueError):
    """Invalid system data."""


class SignError(SpecError):
    pass


class ExponentError(SpecError):
    pass


class SymmetryError(SpecError):
    pass


class NotInU(RuntimeError):
    """The inner problem of the tuple has no interior critical point."""


class TrivialComponent(ValueError):
    pass


def critical_exponent(N: int) -> float:
    return 2.0 * N / (N - 2.0)


@dataclass(frozen=True)
class SystemSpec:
    """PDE data.  ``lam``, ``alpha`` and ``beta`` are ``(M, M)``; diagonals unused."""

    p: float
    kappa: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        m = kappa.size
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "mu", mu)
        for name in ("lam", "alpha", "beta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 0:
                arr = np.full((m, m), float(arr))
            arr = np.array(arr, dtype=float)
            if arr.shape != (m, m):
                raise SpecError(f"{name} must have shape ({m}, {m}), got {arr.shape}")
            np.fill_diagonal(arr, 0.0)
            object.__setattr__(self, name, arr)
        if mu.shape != (m,):
            raise SpecError(f"mu must have shape ({m},), got {mu.shape}")

    @property
    def M(self) -> int:
        return self.kappa.size

    @property
    def N(self) -> int:
        return self.domain.N

    @classmethod
    def symmetric(cls, p, kappa, mu, lam, domain):
        """Spec with ``alpha_ij = beta_ij = p/2`` and a common coupling ``lam``."""
        m = np.atleast_1d(kappa).size
        half = np.full((m, m), p / 2.0)
        return cls(p, kappa, mu, lam, half, half, domain)


def validate_spec(spec: SystemSpec, space: Space | None = None) -> dict:
    """Check every invariant of ``spec``; raise on the first violation.

    Coercivity is only checked when a ``space`` is supplied.  Returns a
    diagnostics dictionary.
    """
    m = spec.M
    off = ~np.eye(m, dtype=bool)
    pc = critical_exponent(spec.N)
    if not 2.0 < spec.p <= pc + 1e-12:
        raise ExponentError(f"p={spec.p} must lie in (2, 2*={pc:.6g}]")
    if np.any(~(spec.mu > 0)):
        raise SignError("mu must be positive")
    if not np.allclose(spec.lam, spec.lam.T, rtol=1e-12, atol=0):
        i, j = np.argwhere(~np.isclose(spec.lam, spec.lam.T, rtol=1e-12, atol=0))[0]
        raise SymmetryError(f"lambda[{i}][{j}] != lambda[{j}][{i}]")
    if np.any(spec.lam[off] >= 0):
        i, j = np.argwhere((spec.lam >= 0) & off)[0]
        raise SignError(f"lambda[{i}][{j}] = {spec.lam[i, j]} must be negative")
    if m > 1:
        if np.any(spec.alpha[off] <= 1) or np.any(spec.beta[off] <= 1):
            raise ExponentError("alpha_ij and beta_ij must exceed 1")
        if not np.allclose(spec.alpha, spec.beta.T, rtol=0, atol=1e-12):
            raise SymmetryError("alpha_ij must equal beta_ji")
        if not np.allclose(spec.alpha[off] + spec.beta[off], spec.p, rtol=0, atol=1e-12):
            raise ExponentError("alpha_ij + beta_ij must equal p")
    diag = {"M": m, "N": spec.N, "p": spec.p, "critical": bool(abs(spec.p - pc) < 1e-12)}
    if space is not None:
        if space.domain != spec.domain:
            raise SpecError("space was built for a different domain")
        for i, k in enumerate(spec.kappa):
            try:
                disc._check_kappa(space, float(k))
            except CoercivityViolation as exc:
                raise CoercivityViolation(f"kappa[{i}]: {exc}") from None
        diag["lambda1"] = space.lambda1
        diag["coercivity_margin"] = float(np.min(spec.kappa) + space.lambda1)
    return diag


@dataclass(frozen=True, eq=False)
class System:
    """A validated :class:`SystemSpec` together with its discrete space."""

    spec: SystemSpec
    space: Space

    def __post_init__(self):
        validate_spec(self.spec, self.space)

    @classmethod
    def build(cls, spec: SystemSpec, n: int) -> "System":
        return cls(spec, disc.build_space(spec.domain, n))

    @property
    def M(self) -> int:
        return self.spec.M

    @property
    def p(self) -> float:
        return self.spec.p


@dataclass(frozen=True)
class NehariPoint:
    s: np.ndarray
    tuple: np.ndarray
    energy: float
    residuals: np.ndarray
    coupling: CouplingData
    inner_iterations: int = 0


def _as_tuple(system: System, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.shape != (system.M, system.space.size):
        raise ValueError(f"tuple must have shape ({system.M}, {system.space.size}), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("tuple has non-finite entries")
    return u


def component_norms(system: System, u) -> np.ndarray:
    u = _as_tuple(system, u)
    return np.array([disc.norm_i(system.space, k, ui) for k, ui in zip(system.spec.kappa, u)])


def coeffs_of(system: System, u) -> CouplingData:
    """Coefficients ``a_{u,i}``, ``b_{u,i}``, ``d_{u,ij}`` of ``J_u``."""
    u = _as_tuple(system, u)
    sp, spec = system.space, system.spec
    a = 0.5 * component_norms(system, u) ** 2
    absq = np.abs(sp.at_quad(u))
    b = spec.mu / spec.p * disc.integrate(sp, absq**spec.p)
    m = spec.M
    d = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                d[i, j] = -0.5 * spec.lam[i, j] * disc.integrate(
                    sp, absq[j] ** spec.alpha[i, j] * absq[i] ** spec.beta[i, j])
    # tiny positive a/b keep CouplingData valid for trivial components; callers
    # that need nontriviality check it themselves
    tiny = np.finfo(float).tiny
    return CouplingData(spec.p, np.maximum(a, tiny), np.maximum(b, tiny), d,
                        spec.alpha, spec.beta)


def energy(system: System, u) -> float:
    u = _as_tuple(system, u)
    sp, spec = system.space, system.spec
    quad = 0.5 * np.sum(component_norms(system, u) ** 2)
    absq = np.abs(sp.at_quad(u))
    power = np.sum(spec.mu / spec.p * disc.integrate(sp, absq**spec.p))
    cross = 0.0
    for i in range(spec.M):
        for j in range(spec.M):
            if i != j:
                cross += spec.lam[i, j] * disc.integrate(
                    sp, absq[j] ** spec.alpha[i, j] * absq[i] ** spec.beta[i, j])
    return float(quad - power - 0.5 * cross)


def _signed_power(x, e):
    return np.sign(x) * np.abs(x) ** e


def energy_derivative(system: System, u) -> np.ndarray:
    """Nodal vectors ``r_i[k] = dE/du_i (phi_k)``; zero on Dirichlet nodes."""
    u = _as_tuple(system, u)
    sp, spec = system.space, system.spec
    uq = sp.at_quad(u)
    absq = np.abs(uq)
    source = spec.mu[:, None] * _signed_power(uq, spec.p - 1.0)
    for i in range(spec.M):
        for j in range(spec.M):
            if i != j:
                source[i] += (spec.lam[i, j] * spec.beta[i, j] * absq[j] ** spec.alpha[i, j]
                              * _signed_power(uq[i], spec.beta[i, j] - 1.0))
    r = np.stack([disc._apply(sp, k, ui) for k, ui in zip(spec.kappa, u)])
    r -= disc.load_vector(sp, source)
    r[:, ~sp.free] = 0.0
    return r


def energy_gradient(system: System, u) -> np.ndarray:
    """Riesz representatives ``g_i`` of the partial derivatives in ``<.,.>_i``."""
    r = energy_derivative(system, u)
    return np.stack([disc.riesz(system.space, k, ri) for k, ri in zip(system.spec.kappa, r)])


def nehari_residuals(system: System, u) -> np.ndarray:
    """``dE/du_i [u_i]`` for every component."""
    u = _as_tuple(system, u)
    return np.sum(energy_derivative(system, u) * u, axis=1)


def normalize_to_torus(system: System, u) -> np.ndarray:
    u = _as_tuple(system, u)
    norms = component_norms(system, u)
    if np.any(norms == 0):
        raise TrivialComponent(f"component {int(np.argmin(norms))} is zero")
    return u / norms[:, None]


def project_nehari(system: System, u, tol: float = 1e-10, max_iter: int = 200) -> NehariPoint:
    """Scale each component of ``u`` onto the Nehari set.

    Raises
    ------
    TrivialComponent
        If some component has zero norm.
    NotInU
        If ``J_u`` has no interior critical point.
    """
    u = _as_tuple(system, u)
    norms = component_norms(system, u)
    if np.any(norms == 0):
        raise TrivialComponent(f"component {int(np.argmin(norms))} is zero")
    c = coeffs_of(system, u)
    cp = maximize(c, tol=tol, max_iter=max_iter)
    if not cp.converged:
        if cp.status == "no_interior_critical_point":
            raise NotInU(f"J_u has no interior critical point (s -> {cp.s})")
        cp.raise_for_status()
    m = cp.s[:, None] * u
    res = cp.s * grad_J(c, cp.s)
    return NehariPoint(cp.s, m, float(eval_J(c, cp.s)), res, c, cp.iterations)


def psi(system: System, u, point: NehariPoint | None = None) -> float:
    """Reduced functional: the energy of the Nehari projection of ``u``."""
    if point is None:
        point = project_nehari(system, u)
    return point.energy


def tangent_project(system: System, u, v) -> np.ndarray:
    """Remove from each ``v_i`` its ``<.,.>_i`` component along ``u_i``."""
    u = _as_tuple(system, u)
    v = np.array(v, dtype=float)
    for i, k in enumerate(system.spec.kappa):
        uu = disc.inner_product_i(system.space, k, u[i], u[i], check=False)
        v[i] -= disc.inner_product_i(system.space, k, u[i], v[i], check=False) / uu * u[i]
    return v


def psi_gradient(system: System, u, point: NehariPoint | None = None) -> np.ndarray:
    """Tangential Riesz gradient of the reduced functional at ``u``."""
    if point is None:
        point = project_nehari(system, u)
    g = energy_gradient(system, point.tuple) * point.s[:, None]
    return tangent_project(system, u, g)


def synchronization_threshold(spec: SystemSpec) -> float:
    """``max_{i != j} max(mu_i / beta_ij, mu_j / beta_ji)``.

    When ``-lambda_ij`` reaches this value for a pair, tuples whose i-th and
    j-th components are proportional lie outside the projection domain.
    """
    m = spec.M
    best = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                best = max(best, spec.mu[i] / spec.beta[i, j], spec.mu[j] / spec.beta[j, i])
    return best


def subsystem(system: System, keep) -> System:
    """The system of the components listed in ``keep``."""
    keep = np.asarray(sorted(keep), dtype=int)
    s = system.spec
    idx = np.ix_(keep, keep)
    spec = SystemSpec(s.p, s.kappa[keep], s.mu[keep], s.lam[idx], s.alpha[idx], s.beta[idx],
                      s.domain)
    return System(spec, system.space)


def embed(system: System, keep, u_sub) -> np.ndarray:
    """Tuple of the full system with the ``keep`` components set to ``u_sub``."""
    out = system.space.zeros(system.M)
    out[np.asarray(sorted(keep), dtype=int)] = u_sub
    return out
