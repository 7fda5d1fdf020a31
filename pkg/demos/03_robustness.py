"""Robustness: the extractability bound Q(S) and its ingredients.

Prints Q over a range of violations, the operator checks along the
extraction-channel path, and the extractability of the noisy mixture
family compared with the linear bound 1/2 + q/2.
"""

import math

import numpy as np

from steercert import robustness as rb
from steercert.steering import S_LHS

lam = 1 / math.sqrt(2)
for s in np.linspace(S_LHS, 2, 5):
    print(f"S={s:.4f}  Q={rb.q_bound(s, lam):.4f}")

check = rb.verify_operator_inequality(200)
print(f"\nmin eigenvalue of T over [0, pi/4]: {check.worst_margin:.4f} at {check.worst_vartheta:.4f}")
psi = rb.target_state_rotated()
gap = max(
    abs(np.trace(rb.k_operator(v) @ psi).real - rb.S_COEFF * np.trace(rb.w_operator(v) @ psi).real - rb.MU_COEFF)
    for v in np.linspace(0, math.pi / 4, 50)
)
print(f"expectation on the target state is tight: max |gap| = {gap:.2e}")

phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
print("\nq     S(q)    1/2+q/2  extractability (general)  (dephasing)")
for q in (0.0, 0.25, 0.5, 0.75, 1.0):
    rho = rb.mixture_family(q)
    gen = rb.extractability_estimate(rho, phi, restarts=3)
    dep = rb.extractability_estimate(rho, phi, family="dephasing", restarts=1)
    print(f"{q:.2f}  {rb.mixture_fgsi(q):.4f}  {0.5 + q / 2:.4f}   {gen:.4f}                    {dep:.4f}")
