"""One-sided device-independent self-testing of two-qubit states via a fine-grained steering inequality."""

from .labsim import NoiseModel, run_experiment
from .robustness import q_bound
from .states import Family, StateFamily, build_state
from .steering import (
    S_LHS,
    CertificationReport,
    NotSteerable,
    SteeringStatistics,
    certified_state,
    certify,
    fgsi_scan,
    fgsi_value,
)

__version__ = "0.1.0"

__all__ = [
    "S_LHS",
    "CertificationReport",
    "Family",
    "NoiseModel",
    "NotSteerable",
    "StateFamily",
    "SteeringStatistics",
    "build_state",
    "certified_state",
    "certify",
    "fgsi_scan",
    "fgsi_value",
    "q_bound",
    "run_experiment",
]
