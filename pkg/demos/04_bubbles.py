"""Norms of truncated Aubin-Talenti bubbles as the concentration shrinks.

Run with ``python3 demos/04_bubbles.py``.
"""
# %%
from nehari import discretization as disc
from nehari import presets as ps
from nehari.discretization import DomainSpec

for N in (4, 5, 6):
    sp = disc.build_space(DomainSpec.ball(N, grading=1000.0), 4001)
    coarse = ps.bubble_scan(sp, [0.04, 0.02, 0.01, 0.005])
    fine = ps.bubble_scan(sp, [1e-3, 5e-4, 2.5e-4, 1.25e-4], betas=[1.1, ps.pc_half(N)])
    print(f"N={N}: gradient defect slope {coarse.fitted_slopes['grad_sq_defect']:.3f} (N-2 = {N - 2})")
    print(f"      limit {coarse.limit:.4f}, extrapolated {coarse.extrapolated_limit:.4f}")
    print("      small-eps slopes", {k: round(v, 3) for k, v in fine.fitted_slopes.items()
                                     if k != "grad_sq_defect"})
    if N == 4:
        print("      residuals", fine.log_fit_residuals)
