"""Several solutions of a repulsive pair outside a ball.

Seeds built from bumps with disjoint supports lead the descent to different
critical points.  Run with ``python3 demos/03_multistart.py``.
"""
# %%
import numpy as np

from nehari import presets as ps
from nehari.descent import DescentConfig, multistart
from nehari.energy import System

spec, sp = ps.preset_exterior(3, 1.0, 16.0, 601, p=4.0, kappa=[1, 2], mu=[1, 1], lam=-2.0)
system = System(spec, sp)
reports = multistart(system, 3, DescentConfig(max_iter=5000))
d0 = ps.nehari_lower_bound(system)

# %% Levels, scalings and where each component concentrates
for r in reports:
    peaks = sp.nodes[np.argmax(np.abs(r.solution.tuple), axis=1)]
    print(f"{r.status:9s} energy {r.energy:9.4f}  norms {np.round(r.component_norms, 3)}"
          f"  peaks at r = {np.round(peaks, 2)}  positive={r.positive}")
print(f"norm lower bound d0 = {d0:.3f}")
