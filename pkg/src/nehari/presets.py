"""Ready-made systems and the reference quantities used to check them.

Three configurations are provided: subcritical systems outside a ball,
critical systems on a round sphere written in the angle between two
orthogonal subspaces, and critical systems with negative linear terms on a
ball.  The remaining functions compute discrete Sobolev quotients, ground
states of single equations, energies of well separated bumps, scans of
truncated Aubin-Talenti bubbles, and the energy comparison that decides
whether the least fully nontrivial level lies below every level reachable
by losing components to bubbles.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .descent import (
    CONVERGED,
    ITER_LIMIT,
    STALLED,
    DescentConfig,
    ResolutionTooCoarse,
    SolveReport,
    minimize_psi,
    multistart,
)
from .discretization import DomainSpec, Space
from .energy import SpecError, System, SystemSpec, critical_exponent, subsystem, validate_spec
from .inner_problem import CouplingData, eval_J, maximize

__all__ = [
    "DimensionRule",
    "GroundStateFailure",
    "ThresholdReport",
    "BubbleScan",
    "preset_exterior",
    "preset_yamabe",
    "preset_brezis_nirenberg",
    "rayleigh_quotient",
    "single_equation_ground_state",
    "sobolev_constant",
    "nehari_lower_bound",
    "separated_bump_energy",
    "separated_bump_limit",
    "bubble_scan",
    "bn_threshold_check",
]

log = logging.getLogger(__name__)


class DimensionRule(SpecError):
    """Coupling exponents not admitted in this dimension."""


class GroundStateFailure(RuntimeError):
    """A single-equation solve did not converge."""

    def __init__(self, message: str, report: SolveReport | None = None):
        super().__init__(message)
        self.report = report


def _square(x, m: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full((m, m), float(arr))
    if arr.shape != (m, m):
        raise SpecError(f"{name} must be a scalar or an ({m}, {m}) matrix")
    return arr


def _build(p, kappa, mu, lam, alpha, beta, dom, n) -> tuple[SystemSpec, Space]:
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    m = kappa.size
    alpha = _square(p / 2.0 if alpha is None else alpha, m, "alpha")
    beta = _square(p / 2.0 if beta is None else beta, m, "beta")
    spec = SystemSpec(p, kappa, mu, _square(lam, m, "lam"), alpha, beta, dom)
    space = disc.build_space(dom, n)
    validate_spec(spec, space)
    return spec, space


def preset_exterior(N: int, R0: float, L: float, n: int, *, p: float, kappa, mu, lam,
                    alpha=None, beta=None, grading: float = 1.0) -> tuple[SystemSpec, Space]:
    """Radial subcritical system on ``{R0 < |x| < L}`` with Dirichlet ends.

    ``L`` truncates the exterior of the ball of radius ``R0``.  Requires
    ``2 < p < 2*``, ``kappa_i > 0``, ``mu_i > 0`` and ``lambda_ij < 0``.
    Coupling exponents default to ``p/2``.
    """
    if not 2.0 < p < critical_exponent(N):
        raise SpecError(f"p={p} must lie strictly between 2 and 2*={critical_exponent(N):.6g}")
    if np.any(np.asarray(kappa, dtype=float) <= 0):
        raise SpecError("exterior systems need kappa_i > 0")
    dom = DomainSpec.exterior(N, R0, L, grading=grading)
    return _build(p, kappa, mu, lam, alpha, beta, dom, n)


def preset_yamabe(m: int, n_dim: int, n: int, *, mu, lam, alpha=None,
                  beta=None) -> tuple[SystemSpec, Space]:
    """Critical system on the unit sphere ``S^N``, ``N = m + n_dim - 1``.

    Functions depend on the angle between ``R^m`` and ``R^{n_dim}``; every
    ``kappa_i`` equals ``N(N-2)/4`` and ``p = 2N/(N-2)``.
    """
    if m < 2 or n_dim < 2:
        raise SpecError("both factor dimensions must be at least 2")
    N = m + n_dim - 1
    dom = DomainSpec.sphere(m, n_dim)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    kappa = np.full(mu.size, N * (N - 2) / 4.0)
    return _build(critical_exponent(N), kappa, mu, lam, alpha, beta, dom, n)


def preset_brezis_nirenberg(N: int, radius: float, n: int, *, kappa, mu, lam, alpha=None,
                            beta=None, grading: float = 1.0) -> tuple[SystemSpec, Space]:
    """Critical system on a ball with ``kappa_i`` in ``(-lambda_1, 0)``.

    Exponents default to ``2*/2``.  For ``N = 4`` they must all equal 2 and
    for ``N = 5`` they must be at least 4/3.
    """
    if N < 4:
        raise DimensionRule(f"N={N}: need N >= 4")
    p = critical_exponent(N)
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    m = kappa.size
    off = ~np.eye(m, dtype=bool)
    a = _square(p / 2.0 if alpha is None else alpha, m, "alpha")[off]
    b = _square(p / 2.0 if beta is None else beta, m, "beta")[off]
    if N == 4 and not (np.allclose(a, 2.0) and np.allclose(b, 2.0)):
        raise DimensionRule("N=4 requires alpha_ij = beta_ij = 2")
    if N == 5 and m > 1 and min(a.min(), b.min()) < 4.0 / 3.0:
        raise DimensionRule("N=5 requires min(alpha_ij, beta_ij) >= 4/3")
    if np.any(kappa >= 0):
        raise SpecError("kappa_i must be negative")
    dom = DomainSpec.ball(N, radius, grading=grading)
    return _build(p, kappa, mu, lam, alpha, beta, dom, n)


def rayleigh_quotient(space: Space, w, p: float, kappa: float = 0.0, mu: float = 1.0) -> float:
    """``||w||_kappa^2 / (int mu |w|^p)^{2/p}``."""
    num = disc.norm_i(space, kappa, w) ** 2
    den = (mu * disc.integrate_power(space, [(w, p)])) ** (2.0 / p)
    if den == 0:
        raise ValueError("w vanishes")
    return float(num / den)


def _scalar_system(space: Space, kappa: float, mu: float, p: float) -> System:
    spec = SystemSpec(p, [kappa], [mu], 0.0, p / 2.0, p / 2.0, space.domain)
    return System(spec, space)


def single_equation_ground_state(space: Space, kappa: float, mu: float, p: float,
                                 cfg: DescentConfig | None = None,
                                 u0=None) -> tuple[np.ndarray, float]:
    """Positive least-energy solution of ``-Delta u + kappa u = mu |u|^{p-2} u``.

    Descends the reduced functional of the one-component system from ``u0``
    (the first eigenfunction by default).

    Returns
    -------
    u : ndarray
        Nodal values of the solution, nonnegative.
    energy : float
        Its energy, equal to ``(p-2)/(2p) ||u||_kappa^2``.

    Raises
    ------
    GroundStateFailure
        When the descent does not converge.
    """
    system = _scalar_system(space, kappa, mu, p)
    if u0 is None:
        u0 = disc.lowest_eigenpair(space)[1]
    rep = minimize_psi(system, np.abs(np.asarray(u0, dtype=float))[None, :], cfg)
    if rep.status != CONVERGED:
        raise GroundStateFailure(f"single-equation descent ended with {rep.status}", rep)
    return np.abs(rep.solution.tuple[0]), rep.energy


def _candidates(space: Space, p: float):
    yield disc.lowest_eigenpair(space)[1]
    dom = space.domain
    if dom.kind == "ball" and dom.N >= 4:
        # concentrated profiles help when the infimum sits at grid scale
        r = space.nodes
        eps = dom.radius / 4.0
        while np.count_nonzero(r < eps) >= 2:
            yield disc.bubble(space, eps)
            eps /= 2.0


def sobolev_constant(space: Space, p: float, kappa: float = 0.0, mu: float = 1.0,
                     cfg: DescentConfig | None = None) -> float:
    """Minimum of the discrete quotient ``||w||_kappa^2 / |w|_{p,mu}^2``.

    The descent starts from the best of the first eigenfunction and, on
    balls, truncated bubbles down to grid scale.  Since the one-component
    reduced functional equals ``(p-2)/(2p) Q^{p/(p-2)}``, its minimum gives
    the quotient directly.
    """
    system = _scalar_system(space, kappa, mu, p)
    cands = list(_candidates(space, p))
    q = [rayleigh_quotient(space, w, p, kappa, mu) for w in cands]
    start = cands[int(np.argmin(q))]
    cfg = cfg or DescentConfig(max_iter=20000)
    rep = minimize_psi(system, start[None, :], cfg)
    if rep.status not in (CONVERGED, STALLED):
        raise GroundStateFailure(f"quotient descent ended with {rep.status}", rep)
    return float((2.0 * p / (p - 2.0) * rep.psi_value) ** ((p - 2.0) / p))


def nehari_lower_bound(system: System, cfg: DescentConfig | None = None) -> float:
    """Discrete lower bound for component norms on the Nehari set.

    ``min_i (S_i / mu_i^{2/p})^{p/(2(p-2))}`` with ``S_i`` the discrete
    quotient for ``kappa_i`` and unit ``mu``.
    """
    spec = system.spec
    p = spec.p
    vals = []
    for k, m in zip(spec.kappa, spec.mu):
        s = sobolev_constant(system.space, p, float(k), 1.0, cfg)
        vals.append((s / m ** (2.0 / p)) ** (p / (2.0 * (p - 2.0))))
    return float(min(vals))


def _ball_of(spec: SystemSpec, R: float, h: float) -> Space:
    n = int(round(R / h)) + 1
    if n < 16:
        raise ResolutionTooCoarse(f"radius {R} with spacing {h} gives only {n} nodes")
    return disc.build_space(DomainSpec.ball(spec.N, R), n)


def separated_bump_energy(spec: SystemSpec, R: float, h: float = 0.05,
                          cfg: DescentConfig | None = None) -> float:
    """Energy of ``M`` translated ball ground states with disjoint supports.

    Component ``i`` is the ground state of its own equation on a ball of
    radius ``R`` (grid spacing ``h``), moved so that the balls do not meet.
    Translation leaves every integral unchanged and the coupling integrals
    vanish, so the projection onto the Nehari set only needs the
    per-component norms.
    """
    sp = _ball_of(spec, R, h)
    a, b = [], []
    for k, m in zip(spec.kappa, spec.mu):
        w, _ = single_equation_ground_state(sp, float(k), float(m), spec.p, cfg)
        a.append(0.5 * disc.norm_i(sp, float(k), w) ** 2)
        b.append(m / spec.p * disc.integrate_power(sp, [(w, spec.p)]))
    M = spec.M
    c = CouplingData(spec.p, np.array(a), np.array(b), np.zeros((M, M)), spec.alpha, spec.beta)
    cp = maximize(c)
    cp.raise_for_status()
    return float(eval_J(c, cp.s))


def separated_bump_limit(spec: SystemSpec, h: float = 0.05, R_ref: float = 48.0,
                         cfg: DescentConfig | None = None) -> float:
    """``(p-2)/(2p) sum_i S_i^{p/(p-2)}`` with whole-space quotients.

    ``S_i`` is the discrete quotient on a ball of radius ``R_ref`` with the
    same spacing ``h``, so balls with ``R / h`` integral are nested in it.
    """
    sp = _ball_of(spec, R_ref, h)
    p = spec.p
    total = 0.0
    for k, m in zip(spec.kappa, spec.mu):
        s = sobolev_constant(sp, p, float(k), float(m), cfg)
        total += s ** (p / (p - 2.0))
    return (p - 2.0) / (2.0 * p) * total


@dataclass
class BubbleScan:
    """Norms of truncated bubbles ``w_eps`` and their power-law fits.

    ``norms`` maps ``grad_sq`` (``||w||^2``), ``crit`` (``|w|_{2*}^{2*}``),
    ``l2`` (``|w|_2^2``) and ``beta_<b>`` (``|w|_b^b``) to arrays over
    ``eps_list``.  ``fitted_slopes`` holds log-log slopes: ``grad_sq_defect``
    for ``||w||^2`` minus ``limit``, ``l2``, ``beta_<b>``, and for ``N = 4``
    ``l2_log`` (after division by ``|ln eps|``).  Slopes of ``beta_<b>`` with
    ``b = 2*/2`` are taken after division by ``1 + |ln eps|``.
    """

    N: int
    mu: float
    eps_list: np.ndarray
    norms: dict
    fitted_slopes: dict
    limit: float
    extrapolated_limit: float
    log_fit_residuals: dict = field(default_factory=dict)


def _slope(eps, y) -> float:
    return float(np.polyfit(np.log(eps), np.log(np.abs(y)), 1)[0])


def _bubble_norms(sp: Space, eps, mu, cutoff, betas):
    N = sp.N
    pc = critical_exponent(N)
    rows = []
    for e in eps:
        w = disc.bubble(sp, e, mu, cutoff)
        row = [disc.norm_i(sp, 0.0, w) ** 2, disc.integrate_power(sp, [(w, pc)]),
               disc.integrate_power(sp, [(w, 2.0)])]
        row += [disc.integrate_power(sp, [(w, b)]) for b in betas]
        rows.append(row)
    return np.array(rows)


def bubble_scan(space: Space, eps_list, mu: float = 1.0, cutoff_radius: float | None = None,
                betas=(), richardson: bool = True) -> BubbleScan:
    """Norms of ``w_eps`` over ``eps_list`` with log-log slope fits.

    With ``richardson`` the norms are extrapolated from ``space`` and the
    grid made of every other node, removing the leading ``h^2`` error.
    The reference limit of ``||w||^2`` is ``mu^{(2-N)/2} S^{N/2}`` with the
    closed-form Aubin-Talenti constant.

    Raises
    ------
    ResolutionTooCoarse
        When fewer than 16 nodes (of the coarser grid) lie inside ``r < eps``.
    """
    dom = space.domain
    if dom.kind != "ball" or dom.N < 4:
        raise ValueError("bubble scans need a ball with N >= 4")
    N = dom.N
    eps = np.asarray(eps_list, dtype=float)
    cutoff = dom.radius if cutoff_radius is None else float(cutoff_radius)
    if eps.ndim != 1 or eps.size < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be decreasing positive values (at least two)")
    if eps[0] > cutoff / 4.0:
        raise ValueError("largest eps must not exceed cutoff_radius / 4")
    betas = tuple(float(b) for b in betas)
    coarse = disc.build_space(dom, (space.size + 1) // 2) if richardson else space
    core = np.count_nonzero(coarse.nodes < eps[-1])
    if core < 16:
        raise ResolutionTooCoarse(f"bubble core at eps={eps[-1]:g} spans {core} nodes")

    vals = _bubble_norms(space, eps, mu, cutoff, betas)
    if richardson:
        vals = (4.0 * vals - _bubble_norms(coarse, eps, mu, cutoff, betas)) / 3.0
    names = ["grad_sq", "crit", "l2"] + [f"beta_{b:g}" for b in betas]
    norms = {k: vals[:, j] for j, k in enumerate(names)}

    S = disc.aubin_talenti_constant(N)
    limit = mu ** ((2.0 - N) / 2.0) * S ** (N / 2.0)
    slopes = {"grad_sq_defect": _slope(eps, norms["grad_sq"] - limit), "l2": _slope(eps, norms["l2"])}
    logeps = np.abs(np.log(eps))
    for b in betas:
        y = norms[f"beta_{b:g}"]
        if abs(b - pc_half(N)) < 1e-12:
            y = y / (1.0 + logeps)
        slopes[f"beta_{b:g}"] = _slope(eps, y)

    # ||w||^2 = limit + C eps^{N-2}: the intercept in eps^{N-2} extrapolates
    extrap = float(np.polyfit(eps ** (N - 2.0), norms["grad_sq"], 1)[1])
    resid = {}
    if N == 4:
        slopes["l2_log"] = _slope(eps, norms["l2"] / logeps)
        resid["eps2_log"] = float(np.std(np.log(norms["l2"] / (eps**2 * logeps))))
        resid["eps2"] = float(np.std(np.log(norms["l2"] / eps**2)))
    return BubbleScan(N, float(mu), eps, norms, slopes, float(limit), extrap, resid)


def pc_half(N: int) -> float:
    """Half the critical exponent, ``N/(N-2)``."""
    return critical_exponent(N) / 2.0


@dataclass
class ThresholdReport:
    """Outcome of the energy comparison on a critical ball system.

    ``cI`` maps each nonempty set of dropped components (a sorted tuple) to
    the least energy of the system that remains (zero when nothing
    remains).  ``rhs`` is the minimum over those sets of
    ``c_I + (1/N) sum_{i in I} mu_i^{-(N-2)/2} S^{N/2}``.
    """

    c0: float
    cI: dict
    S: float
    rhs: float
    margin: float
    satisfied: bool
    inconclusive: bool = False
    statuses: dict = field(default_factory=dict)


def _least_level(system: System, k: int, cfg: DescentConfig) -> SolveReport | None:
    reps = multistart(system, k, cfg)
    return reps[0] if reps else None


def bn_threshold_check(spec: SystemSpec, space: Space, cfg: DescentConfig | None = None,
                       k: int = 2, threads: int = 1) -> ThresholdReport:
    """Compare the least fully nontrivial level with the bubble thresholds.

    Every proper subsystem is solved by multistart with ``k`` seeds, ``S``
    is the discrete critical quotient of ``space`` and the full system is
    solved last.  ``satisfied`` requires ``c0 < rhs - 1e-4 (1 + |rhs|)``;
    the report is ``inconclusive`` if a least-energy solve did not converge.
    """
    system = System(spec, space)
    M, N = spec.M, spec.N
    if M > 3:
        raise ValueError("threshold checks are limited to M <= 3")
    if space.domain.kind != "ball" or abs(spec.p - critical_exponent(N)) > 1e-12:
        raise SpecError("threshold checks need a critical system on a ball")
    cfg = cfg or DescentConfig(max_iter=20000)

    drops = [I for r in range(1, M + 1) for I in itertools.combinations(range(M), r)]
    solve_sets = [I for I in drops if len(I) < M] + [()]

    def solve(I):
        keep = [i for i in range(M) if i not in I]
        return _least_level(subsystem(system, keep), k, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(solve, solve_sets))
    else:
        reps = [solve(I) for I in solve_sets]
    results = dict(zip(solve_sets, reps))
    S = sobolev_constant(space, spec.p, 0.0, 1.0, cfg)

    cI, statuses, inconclusive = {}, {}, False
    for I, rep in results.items():
        if rep is None:
            raise GroundStateFailure(f"every start failed for dropped set {I}")
        statuses[I] = rep.status
        if rep.status == ITER_LIMIT or not rep.converged:
            inconclusive = True
        if I:
            cI[I] = rep.energy
    for I in drops:
        if len(I) == M:
            cI[I] = 0.0
    bubble = spec.mu ** (-(N - 2.0) / 2.0) * S ** (N / 2.0) / N
    rhs = min(cI[I] + float(np.sum(bubble[list(I)])) for I in drops)
    c0 = results[()].energy
    margin = 1e-4 * (1.0 + abs(rhs))
    return ThresholdReport(float(c0), cI, float(S), float(rhs), margin,
                           bool(c0 < rhs - margin), inconclusive, statuses)
