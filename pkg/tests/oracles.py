"""Independent reference computations used by the tests.

Nothing here calls the Galerkin machinery: radial ground states come from
shooting on the ODE, Sobolev constants from their closed forms.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import gamma


def sphere_area(k):
    return 2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


def shooting_ground_state(N, p, kappa, mu, radius=1.0, r0=1e-6):
    """Positive radial solution of u'' + (N-1)/r u' = kappa u - mu u^{p-1}, u(radius) = 0.

    Returns ``(u0, energy)`` with energy ``(p-2)/(2p) mu int u^p``.
    """
    area = sphere_area(N - 1)

    def rhs(r, y):
        u, v, _ = y
        f = kappa * u - mu * abs(u) ** (p - 2) * u
        return [v, -(N - 1) / r * v + f, area * r ** (N - 1) * mu * abs(u) ** p]

    def shoot(g):
        f0 = kappa * g - mu * g ** (p - 1)
        y0 = [g + f0 * r0**2 / (2 * N), f0 * r0 / N, 0.0]
        return solve_ivp(rhs, [r0, radius], y0, rtol=1e-12, atol=1e-13)

    # the ground state is the first sign change of u(radius) in the amplitude
    grid = np.linspace(1.0, 100.0, 400)
    end = [shoot(g).y[0, -1] for g in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], end[:-1], end[1:]):
        if fa * fb < 0:
            break
    else:
        raise RuntimeError("no bracket for the shooting amplitude")
    g = brentq(lambda x: shoot(x).y[0, -1], a, b, xtol=1e-14)
    sol = shoot(g)
    return g, (p - 2) / (2 * p) * sol.y[2, -1]


def aubin_talenti(N):
    """Closed-form best Sobolev constant ``N(N-2)/4 |S^N|^{2/N}``."""
    return N * (N - 2) / 4.0 * sphere_area(N) ** (2.0 / N)


def log_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(np.abs(y)), 1)[0])
