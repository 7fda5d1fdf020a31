"""Fine-grained steering inequality: maximal violation and the LHS bound.

Scans Alice's second observable for a few family members and compares the
best value with the local-hidden-state bound 1 + 1/sqrt(2).
"""

import math

import numpy as np

from steercert import S_LHS, StateFamily, build_state, fgsi_scan
from steercert.measurements import theta_max
from steercert.states import densify
from steercert.steering import fibonacci_sphere, lhs_bound_bruteforce, lhs_value

print(f"LHS bound 1 + 1/sqrt(2) = {S_LHS:.6f}")
print(f"Fibonacci grid (10^4 Bob states) maximum: {lhs_bound_bruteforce(10_000):.6f}")
best = max(fibonacci_sphere(10_000), key=lhs_value)
print(f"maximizing Bloch vector ~ {np.round(best, 3)} (x = z = 1/sqrt(2) expected)")

for fam in ("PhiPlus", "PsiMinus"):
    for a in (0.3, 1 / math.sqrt(2), 0.9):
        sf = StateFamily(fam, a)
        res = fgsi_scan(densify(build_state(sf)), sf)
        print(f"{fam:8s} a={a:.3f}: S_best={res.s_best:.9f} at theta={res.theta_best:+.6f} "
              f"(theta_max={theta_max(a):.6f})")
