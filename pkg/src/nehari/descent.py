"""Minimisation of the reduced functional on the product of unit spheres.

Points are tuples with ``||u_i||_i = 1``.  The reduced functional is the
energy of the Nehari projection; it blows up at the boundary of its domain,
so steepest descent with a retraction stays inside as long as steps are
small enough.  :func:`genus_seeds` produces starting tuples out of bumps
with pairwise disjoint supports and :func:`multistart` collects the
distinct solutions reached from them.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .inner_problem import IterationLimit
from .energy import (
    NehariPoint,
    NotInU,
    System,
    TrivialComponent,
    component_norms,
    normalize_to_torus,
    project_nehari,
    psi_gradient,
)

__all__ = [
    "DescentConfig",
    "SolveReport",
    "InvalidStart",
    "ResolutionTooCoarse",
    "CONVERGED",
    "BOUNDARY_ESCAPE",
    "ITER_LIMIT",
    "STALLED",
    "retract",
    "tangent_norm",
    "minimize_psi",
    "genus_seeds",
    "multistart",
    "is_sign_definite",
    "align_signs",
]

log = logging.getLogger(__name__)

CONVERGED = "Converged"
BOUNDARY_ESCAPE = "BoundaryEscape"
ITER_LIMIT = "IterLimit"
STALLED = "Stalled"


class InvalidStart(ValueError):
    """The starting tuple cannot be projected onto the Nehari set."""


class ResolutionTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class DescentConfig:
    """Descent parameters.

    The run is converged once the tangential gradient norm drops below
    ``tol_grad * (1 + |Psi|)``.
    """

    tol_grad: float = 1e-7
    max_iter: int = 3000
    c1: float = 1e-4
    shrink: float = 0.5
    t0: float = 1.0
    t_max: float = 64.0
    s_cap: float = 1e3
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.tol_grad > 0 and self.max_iter > 0 and self.t0 > 0 and self.s_cap > 0):
            raise ValueError("tolerances, step sizes and caps must be positive")
        if not (0 < self.c1 < 1 and 0 < self.shrink < 1):
            raise ValueError("need 0 < c1 < 1 and 0 < shrink < 1")


@dataclass
class SolveReport:
    status: str
    solution: NehariPoint
    u: np.ndarray
    psi_value: float
    grad_norm: float
    iterations: int
    positive: bool
    component_norms: np.ndarray
    history: list = field(default_factory=list, repr=False)
    seed_index: int = -1

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def energy(self) -> float:
        return self.solution.energy


def tangent_norm(system: System, v) -> float:
    return float(np.sqrt(np.sum(component_norms(system, v) ** 2)))


def retract(system: System, u, v, t: float) -> np.ndarray:
    """Move from ``u`` along ``t v`` and renormalise each component."""
    w = np.asarray(u, dtype=float) + t * np.asarray(v, dtype=float)
    norms = component_norms(system, w)
    if np.any(norms == 0):
        raise TrivialComponent("retraction produced a zero component")
    return w / norms[:, None]


def is_sign_definite(u, rel_tol: float = 1e-8) -> bool:
    """True when no component takes both signs beyond ``rel_tol * max|u_i|``."""
    u = np.atleast_2d(u)
    for ui in u:
        scale = np.max(np.abs(ui))
        if scale == 0:
            return False
        if np.min(ui) < -rel_tol * scale and np.max(ui) > rel_tol * scale:
            return False
    return True


def align_signs(u, ref) -> np.ndarray:
    """Flip components of ``u`` to best match ``ref`` (the energy is even in each)."""
    u = np.array(u, dtype=float)
    for i in range(u.shape[0]):
        if np.sum(u[i] * ref[i]) < 0:
            u[i] = -u[i]
    return u


def _report(system, status, point, u, grad, it, history, seed_index=-1):
    return SolveReport(
        status=status,
        solution=point,
        u=u,
        psi_value=point.energy,
        grad_norm=tangent_norm(system, grad),
        iterations=it,
        positive=is_sign_definite(point.tuple),
        component_norms=component_norms(system, point.tuple),
        history=history,
        seed_index=seed_index,
    )


def minimize_psi(system: System, u0, cfg: DescentConfig | None = None,
                 seed_index: int = -1) -> SolveReport:
    """Armijo steepest descent of the reduced functional from ``u0``.

    ``u0`` is normalised onto the torus first.  Trial points that leave the
    projection domain are treated as failed Armijo trials.  The descent stops
    with ``BoundaryEscape`` when the Nehari scalings exceed ``cfg.s_cap`` or
    when every trial of a line search left the domain, and with ``Stalled``
    when the line search cannot find decrease for other reasons (roundoff).
    """
    cfg = cfg or DescentConfig()
    try:
        u = normalize_to_torus(system, u0)
        point = project_nehari(system, u)
    except (NotInU, TrivialComponent) as exc:
        raise InvalidStart(str(exc)) from exc
    grad = psi_gradient(system, u, point)
    gnorm = tangent_norm(system, grad)
    history = [point.energy]
    t_prev = cfg.t0
    for it in range(cfg.max_iter + 1):
        if gnorm <= cfg.tol_grad * (1.0 + abs(point.energy)):
            return _report(system, CONVERGED, point, u, grad, it, history, seed_index)
        if np.max(point.s) > cfg.s_cap:
            return _report(system, BOUNDARY_ESCAPE, point, u, grad, it, history, seed_index)
        if it == cfg.max_iter:
            break
        t = min(cfg.t_max, 2.0 * t_prev) if it else cfg.t0
        outside = tried = 0
        while True:
            tried += 1
            trial = retract(system, u, -grad, t)
            try:
                tp = project_nehari(system, trial)
            except (NotInU, IterationLimit):
                outside += 1
                tp = None
            if tp is not None and tp.energy < point.energy and \
                    tp.energy <= point.energy - cfg.c1 * t * gnorm**2:
                break
            t *= cfg.shrink
            if t < 1e-14:
                status = BOUNDARY_ESCAPE if outside == tried else STALLED
                log.debug("line search failed at iteration %d (%s)", it, status)
                return _report(system, status, point, u, grad, it, history, seed_index)
        u, point, t_prev = trial, tp, t
        grad = psi_gradient(system, u, point)
        gnorm = tangent_norm(system, grad)
        history.append(point.energy)
    return _report(system, ITER_LIMIT, point, u, grad, cfg.max_iter, history, seed_index)


def _bump(sp, lo, hi):
    t = sp.nodes
    x = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    u = np.sin(np.pi * x) ** 2
    u[(t <= lo) | (t >= hi)] = 0.0
    u[~sp.free] = 0.0
    return u


def genus_seeds(system: System, k: int, rng_seed: int = 0, mixtures: int = 0,
                min_nodes: int = 8) -> list[np.ndarray]:
    """Starting tuples built from ``k * M`` bumps with disjoint supports.

    The free part of the grid is cut into ``k * M`` consecutive windows
    separated by at least one zero node.  Seed ``j`` puts component ``i`` on
    window ``j * M + (i + j) % M``, so consecutive seeds rotate the radial
    ordering of the components.  Each bump is normalised in its own norm.

    ``mixtures`` extra seeds are normalised combinations
    ``sum_j r_j (+-u_{j,i})`` with random simplex weights and signs.
    """
    sp, m = system.space, system.M
    if k < 1:
        raise ValueError("k must be positive")
    idx = np.flatnonzero(sp.free)
    windows = k * m
    per = idx.size // windows
    if per < min_nodes:
        raise ResolutionTooCoarse(
            f"{windows} disjoint bumps need {windows * min_nodes} free nodes, have {idx.size}")
    t = sp.nodes
    edges = [t[idx[w * per]] for w in range(windows)] + [t[idx[-1]]]
    bumps = np.zeros((k, m, sp.size))
    for j in range(k):
        for i in range(m):
            w = j * m + (i + j) % m
            b = _bump(sp, edges[w], edges[w + 1])
            bumps[j, i] = b / disc.norm_i(sp, system.spec.kappa[i], b)
    seeds = [bumps[j].copy() for j in range(k)]
    rng = np.random.default_rng(rng_seed)
    for _ in range(mixtures):
        r = rng.dirichlet(np.ones(k))
        signs = rng.choice([-1.0, 1.0], size=k)
        seeds.append(normalize_to_torus(system, np.einsum("j,j,jin->in", r, signs, bumps)))
    return seeds


def _distinct(system, a: SolveReport, b: SolveReport, tol: float) -> bool:
    ea, eb = a.energy, b.energy
    if abs(ea - eb) >= tol * (1.0 + abs(ea)):
        return True
    ua = a.solution.tuple
    ub = align_signs(b.solution.tuple, ua)
    scale = np.sqrt(np.sum(component_norms(system, ua) ** 2))
    return tangent_norm(system, ua - ub) >= tol * max(1.0, scale)


def multistart(system: System, k: int, cfg: DescentConfig | None = None,
               seeds: list | None = None, dedup_tol: float = 1e-4, threads: int = 1,
               mixtures: int = 0, positive_refine: bool = True) -> list[SolveReport]:
    """Descend from every genus seed and return the distinct solutions.

    Reports are sorted by energy (ties by seed index).  Failed starts are
    dropped; non-converged runs are kept only if nothing converged.  The
    least-energy solution is re-solved from ``|u|`` to obtain a sign-definite
    representative.
    """
    cfg = cfg or DescentConfig()
    if seeds is None:
        seeds = genus_seeds(system, k, cfg.rng_seed, mixtures=mixtures)

    def run(job):
        j, u0 = job
        try:
            return minimize_psi(system, u0, cfg, seed_index=j)
        except InvalidStart as exc:
            log.warning("seed %d rejected: %s", j, exc)
            return None

    jobs = list(enumerate(seeds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    results = [r for r in results if r is not None]
    if not results:
        return []
    good = [r for r in results if r.converged] or results
    good.sort(key=lambda r: (r.energy, r.seed_index))

    distinct: list[SolveReport] = []
    for r in good:
        if all(_distinct(system, d, r, dedup_tol) for d in distinct):
            distinct.append(r)

    if positive_refine and not distinct[0].positive:
        least = distinct[0]
        try:
            pos = minimize_psi(system, np.abs(least.u), cfg, seed_index=least.seed_index)
        except InvalidStart:
            pos = None
        if pos is not None and pos.converged and pos.energy <= least.energy * (1 + dedup_tol) + dedup_tol:
            distinct[0] = pos
            distinct.sort(key=lambda r: (r.energy, r.seed_index))
    return distinct
