"""Quick self-checks of the solver stack.

Each check returns a :class:`Check`; :func:`run_suite` collects them and
:func:`format_table` renders the pass/fail table printed by the command
line tool.  The checks are small versions of the properties exercised by
the test suite and run in a few seconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from . import inner_problem as ip
from .descent import DescentConfig, genus_seeds, minimize_psi, retract
from .energy import (
    System,
    SystemSpec,
    component_norms,
    energy,
    project_nehari,
    psi,
    psi_gradient,
    tangent_project,
)

__all__ = ["Check", "run_suite", "format_table", "random_coupling"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def random_coupling(rng, M: int, p: float | None = None) -> ip.CouplingData:
    """A random instance satisfying ``p b_i > 2 sum_j d_ij beta_ij``."""
    p = float(rng.uniform(2.5, 6.0)) if p is None else p
    a = rng.uniform(0.2, 2.0, M)
    b = rng.uniform(0.2, 2.0, M)
    beta = np.full((M, M), p / 2.0)
    if M > 1:
        beta = rng.uniform(1.1, p - 1.1, (M, M))
        iu = np.triu_indices(M, 1)
        beta.T[iu] = p - beta[iu]
    np.fill_diagonal(beta, 0.0)
    alpha = np.where(np.eye(M, dtype=bool), 0.0, p - beta)
    d = rng.uniform(0.0, 1.0, (M, M))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    load = 2.0 * np.sum(d * beta, axis=1)
    if M > 1:
        # keep every row strictly feasible
        scale = np.min(np.where(load > 0, 0.9 * p * b / np.maximum(load, 1e-300), np.inf))
        d = d * min(1.0, scale)
    return ip.CouplingData(p, a, b, d, alpha, beta)


def _check(name, fn) -> Check:
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, not an abort
        return Check(name, False, f"{type(exc).__name__}: {exc}")
    return Check(name, bool(ok), detail)


def _inner_checks(rng):
    def closed_form():
        err = 0.0
        for _ in range(20):
            M = int(rng.integers(1, 4))
            c = random_coupling(rng, M)
            c = ip.CouplingData(c.p, c.a, c.b, np.zeros((M, M)), c.alpha, c.beta)
            s = ip.maximize(c).s
            exact = (2 * c.a / (c.p * c.b)) ** (1 / (c.p - 2))
            err = max(err, float(np.max(np.abs(s / exact - 1))))
        return err < 1e-10, f"max rel err {err:.2e}"

    def brute():
        worst = 0.0
        for _ in range(5):
            c = random_coupling(rng, 2)
            br = ip.bracket(c)
            lo, hi = br.r / 2, 2 * br.R
            s_bf = ip.brute_force_max(c, lo, hi, 41, refine=2)
            step = ip.refined_log_step(lo, hi, 41, refine=2)
            s = ip.maximize(c).s
            worst = max(worst, float(np.max(np.abs(np.log(s / s_bf)))) / step)
        return worst <= 1.0, f"max offset {worst:.2f} cells"

    def grad_fd():
        err = 0.0
        for _ in range(10):
            c = random_coupling(rng, 3)
            s = rng.uniform(0.5, 2.0, 3)
            g = ip.grad_J(c, s)
            fd = np.array([(ip.eval_J(c, s + 1e-6 * e) - ip.eval_J(c, s - 1e-6 * e)) / 2e-6
                           for e in np.eye(3)])
            err = max(err, float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12)))
        return err < 1e-6, f"max rel err {err:.2e}"

    return [("inner: decoupled closed form", closed_form),
            ("inner: agrees with brute force", brute),
            ("inner: gradient vs finite differences", grad_fd)]


def _space_checks():
    def eigen():
        sp = disc.build_space(disc.DomainSpec.ball(3), 801)
        err = abs(sp.lambda1 / np.pi**2 - 1)
        return err < 1e-4, f"lambda_1 / pi^2 - 1 = {err:.2e}"

    def volume():
        dom = disc.DomainSpec.sphere(2, 3)
        sp = disc.build_space(dom, 401)
        err = abs(disc.integrate(sp, np.ones(sp.quad_weights.size)) / dom.total_measure() - 1)
        return err < 1e-10, f"rel err {err:.2e}"

    return [("discretization: ball eigenvalue", eigen),
            ("discretization: sphere measure", volume)]


def _system_checks(system: System, rng):
    seed = genus_seeds(system, 1)[0]

    def identity():
        pt = project_nehari(system, seed)
        e = energy(system, pt.tuple)
        p = system.p
        alt = (p - 2) / (2 * p) * float(np.sum(component_norms(system, pt.tuple) ** 2))
        err = max(abs(pt.energy - e), abs(alt - e)) / (1 + abs(e))
        return err < 1e-8, f"rel err {err:.2e}"

    def even():
        a, b = psi(system, seed), psi(system, -seed)
        return abs(a - b) <= 1e-12 * (1 + abs(a)), f"|diff| {abs(a - b):.2e}"

    def tangency():
        g = psi_gradient(system, seed)
        sp = system.space
        dots = [abs(disc.inner_product_i(sp, k, seed[i], g[i]))
                for i, k in enumerate(system.spec.kappa)]
        return max(dots) < 1e-10 * max(1.0, float(np.max(component_norms(system, g)))), \
            f"max |<g_i, u_i>_i| {max(dots):.2e}"

    def directional():
        pt = project_nehari(system, seed)
        g = psi_gradient(system, seed, pt)
        # a smooth unit tangent direction not parallel to the gradient
        v = tangent_project(system, seed, g + seed**2)
        v = v / np.sqrt(np.sum(component_norms(system, v) ** 2))
        sp = system.space
        exact = sum(disc.inner_product_i(sp, k, g[i], v[i]) for i, k in enumerate(system.spec.kappa))
        t = 1e-5
        fd = (psi(system, retract(system, seed, v, t)) - psi(system, retract(system, seed, v, -t))) / (2 * t)
        err = abs(fd - exact) / max(abs(exact), 1e-12)
        return err < 1e-4, f"rel err {err:.2e}"

    def monotone():
        rep = minimize_psi(system, seed, DescentConfig(max_iter=60))
        steps = np.diff(rep.history)
        return bool(np.all(steps < 0)), f"{steps.size} steps, max change {steps.max(initial=-np.inf):.2e}"

    return [("energy: projection identities", identity),
            ("energy: reduced functional is even", even),
            ("energy: gradient is tangent", tangency),
            ("energy: gradient vs finite differences", directional),
            ("descent: strict decrease", monotone)]


def default_system() -> System:
    dom = disc.DomainSpec.ball(3)
    spec = SystemSpec.symmetric(4.0, [1.0, 2.0], [1.0, 1.5], -1.0, dom)
    return System.build(spec, 401)


def run_suite(system: System | None = None, seed: int = 0) -> list[Check]:
    """Run every check; ``system`` defaults to a small two-component ball system."""
    rng = np.random.default_rng(seed)
    system = system or default_system()
    named = _inner_checks(rng) + _space_checks() + _system_checks(system, rng)
    return [_check(name, fn) for name, fn in named]


def format_table(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  result  detail"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.detail}")
    passed = sum(c.passed for c in checks)
    lines.append(f"{passed}/{len(checks)} checks passed")
    return "\n".join(lines)
