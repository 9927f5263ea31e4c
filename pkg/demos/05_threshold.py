"""Energy comparison for a critical pair with negative linear terms on a ball.

Compares the least fully nontrivial level c0 with the cheapest way of
losing components to bubbles.  In the radial setting the bubble has to sit
at the centre, where the partner component is largest, so the computed c0
stays above the threshold.  Run with ``python3 demos/05_threshold.py``.
"""
# %%
from nehari import presets as ps

for n in (501, 1001):
    spec, sp = ps.preset_brezis_nirenberg(4, 1.0, n, kappa=[-1, -1], mu=[1, 1], lam=-0.5,
                                          alpha=2.0, beta=2.0)
    rep = ps.bn_threshold_check(spec, sp)
    print(f"n={n}: c0 {rep.c0:.4f}, rhs {rep.rhs:.4f}, S_h {rep.S:.4f}, "
          f"subsystems {rep.cI}, satisfied={rep.satisfied}")
