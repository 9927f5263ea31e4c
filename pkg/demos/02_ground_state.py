"""Ground state of -u'' - (2/r) u' + u = u^2 on the unit ball, two ways.

The Galerkin descent and an independent shooting computation agree to
many digits.  Run with ``python3 demos/02_ground_state.py``.
"""
# %% Galerkin descent of the reduced functional
import sys
from pathlib import Path

from nehari import discretization as disc
from nehari import presets as ps
from nehari.discretization import DomainSpec

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
from tests.oracles import shooting_ground_state  # noqa: E402

for n in (250, 1000, 4000):
    sp = disc.build_space(DomainSpec.ball(3), n)
    u, e = ps.single_equation_ground_state(sp, kappa=1.0, mu=1.0, p=3.0)
    print(f"n={n:5d}  energy {e:.8f}  u(0) {u[0]:.6f}")

# %% Shooting on the radial ODE
u0, e_ref = shooting_ground_state(3, 3.0, 1.0, 1.0)
print(f"shooting    energy {e_ref:.8f}  u(0) {u0:.6f}")
