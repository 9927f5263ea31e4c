"""Maximising J(s) = sum a s^2 - sum b s^p + sum d s_j^alpha s_i^beta.

Run with ``python3 demos/01_inner_problem.py``.
"""
# %% A feasible random instance and its unique interior maximum
import numpy as np

from nehari import inner_problem as ip
from nehari.verify import random_coupling

rng = np.random.default_rng(42)
c = random_coupling(rng, 3)
cp = ip.maximize(c)
print("s0 =", cp.s, " J(s0) =", cp.value, " |grad| =", cp.grad_norm)

# %% Cross-check with the brute-force lattice search
br = ip.bracket(c)
s_bf = ip.brute_force_max(c, br.r / 2, 2 * br.R, 21, refine=2)
print("brute force:", s_bf)
print("offset in final grid cells:",
      np.max(np.abs(np.log(cp.s / s_bf))) / ip.refined_log_step(br.r / 2, 2 * br.R, 21, refine=2))

# %% Strong coupling removes the maximum: J grows along the diagonal
strong = ip.CouplingData.symmetric(4.0, [1, 1], [1, 1], 1.5)
print("feasible:", strong.is_feasible(), " status:", ip.maximize(strong).status)
