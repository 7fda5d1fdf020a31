"""Relative phase: phase-adapted observables and their waveplate realization.

For a|00> + b e^{i delta}|11> the best FGSI value stays 2 once Alice's
observables are conjugated by diag(1, e^{-i delta}); the same unitary is
built from a half-wave plate between two quarter-wave plates.
"""

import math

import numpy as np

from steercert import StateFamily, build_state, fgsi_scan
from steercert.measurements import (
    measurement_side_sequence, preparation_side_sequence, u_delta, waveplate_sequence,
)
from steercert.qlinalg import equal_up_to_phase
from steercert.states import densify

a = 0.8
for delta in np.linspace(0, 2 * math.pi, 5):
    sf = StateFamily("PhiDelta", a, delta)
    res = fgsi_scan(densify(build_state(sf)), sf)
    meas = waveplate_sequence(measurement_side_sequence(delta))
    prep = waveplate_sequence(preparation_side_sequence(delta))
    print(f"delta={delta:.3f}  S_best={res.s_best:.10f}  theta_best={res.theta_best:.8f}  "
          f"meas==U(delta): {equal_up_to_phase(meas, u_delta(delta))}  prep==U(-delta): {equal_up_to_phase(prep, u_delta(-delta))}")
