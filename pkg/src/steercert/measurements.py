"""Dichotomic observables, outcome probabilities, assemblages and waveplates.

Outcome 0 always labels the +1 eigenspace of an observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qlinalg import I2, SX, SY, SZ, as_square, partial_trace_a
from .states import StateFamily, check_a


@dataclass(frozen=True)
class DichotomicObservable:
    """A +/-1 valued qubit observable ``n . sigma`` given by its Bloch vector."""

    bloch: tuple[float, float, float]
    label: str = ""

    def __post_init__(self):
        n = tuple(float(c) for c in self.bloch)
        if len(n) != 3 or abs(math.sqrt(sum(c * c for c in n)) - 1.0) > 1e-10:
            raise ValueError(f"Bloch vector {self.bloch!r} is not a unit vector")
        object.__setattr__(self, "bloch", n)

    @property
    def matrix(self) -> np.ndarray:
        nx, ny, nz = self.bloch
        return nx * SX + ny * SY + nz * SZ

    def __neg__(self) -> "DichotomicObservable":
        label = self.label[1:] if self.label.startswith("-") else "-" + self.label
        return DichotomicObservable(tuple(-c for c in self.bloch), label)


SIGMA_X = DichotomicObservable((1.0, 0.0, 0.0), "sx")
SIGMA_Y = DichotomicObservable((0.0, 1.0, 0.0), "sy")
SIGMA_Z = DichotomicObservable((0.0, 0.0, 1.0), "sz")


def projector(obs: DichotomicObservable, outcome: int) -> np.ndarray:
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    return 0.5 * (I2 + (-1) ** outcome * obs.matrix)


def observable_from_angle(theta: float, label: str = "") -> DichotomicObservable:
    """``cos(2 theta) sz + sin(2 theta) sx``."""
    return DichotomicObservable((math.sin(2 * theta), 0.0, math.cos(2 * theta)), label or f"A(theta={theta:.6g})")


def theta_max(a: float) -> float:
    """Angle of Alice's second observable that saturates the FGSI for coefficient ``a``."""
    a = check_a(a)
    return 0.5 * math.acos(1.0 - 2.0 * a * a)


def canonical_observables(family: StateFamily):
    """Return ``(A0, A1, B0, B1)`` for the given family member.

    PhiDelta uses its delta = 0 observables; the phase is handled by
    :func:`phase_adapted_observables`.
    """
    a = family.a
    tag = family.tag
    sign = tag.sign
    a1 = DichotomicObservable(
        (sign * 2 * a * math.sqrt(1 - a * a), 0.0, 1 - 2 * a * a), "A1"
    )
    a0 = DichotomicObservable((0.0, 0.0, -1.0 if tag.is_psi else 1.0), "A0")
    return a0, a1, DichotomicObservable(SIGMA_Z.bloch, "B0"), DichotomicObservable(SIGMA_X.bloch, "B1")


def phase_adapted_observables(theta: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Alice's observables for the phased state, as operators ``U_d^dag A U_d``.

    ``U_d = diag(1, exp(-i delta))`` maps the phased state to its delta = 0
    form, so the +1 projectors of the returned operators are the delta = 0
    projectors pulled back through ``U_d``.
    """
    u = u_delta(delta)
    a0 = u.conj().T @ SZ @ u
    a1 = u.conj().T @ observable_from_angle(theta).matrix @ u
    return a0, a1


def _proj(obs, outcome: int) -> np.ndarray:
    if isinstance(obs, DichotomicObservable):
        return projector(obs, outcome)
    m = as_square(obs, (2,))
    return 0.5 * (I2 + (-1) ** outcome * m)


def joint_probability(rho, a_obs, alpha: int, b_obs, beta: int) -> float:
    """``Tr[(P_alpha|A (x) P_beta|B) rho]``.

    Observables may be :class:`DichotomicObservable` or 2x2 operator arrays.
    """
    op = np.kron(_proj(a_obs, alpha), _proj(b_obs, beta))
    return float(np.trace(op @ as_square(rho, (4,))).real)


def joint_table(rho, a_obs, b_obs) -> np.ndarray:
    """All four joint probabilities as a 2x2 array indexed ``[alpha, beta]``."""
    return np.array([[joint_probability(rho, a_obs, x, b_obs, y) for y in (0, 1)] for x in (0, 1)])


def alice_marginal(rho, a_obs, alpha: int) -> float:
    op = np.kron(_proj(a_obs, alpha), I2)
    return float(np.trace(op @ as_square(rho, (4,))).real)


def conditional_probability(rho, b_obs, beta: int, a_obs, alpha: int) -> float:
    """``p(beta | B, alpha, A)``; raises when Alice's outcome has zero probability."""
    pa = alice_marginal(rho, a_obs, alpha)
    if pa <= 1e-12:
        raise ZeroDivisionError(f"Alice outcome {alpha} has probability {pa:.3e}")
    return joint_probability(rho, a_obs, alpha, b_obs, beta) / pa


def assemblage(rho, a_obs) -> dict[int, np.ndarray]:
    """Bob's subnormalized conditional states ``{alpha: sigma_alpha|A}``."""
    rho = as_square(rho, (4,))
    return {
        alpha: partial_trace_a(np.kron(_proj(a_obs, alpha), I2) @ rho)
        for alpha in (0, 1)
    }


def hwp(chi: float) -> np.ndarray:
    c, s = math.cos(2 * chi), math.sin(2 * chi)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(chi: float) -> np.ndarray:
    c, s = math.cos(chi), math.sin(chi)
    off = (1 - 1j) * s * c
    return np.array([[c * c + 1j * s * s, off], [off, s * s + 1j * c * c]], dtype=complex)


def u_delta(delta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(-1j * delta)])


def waveplate_sequence(elements: Sequence[tuple[str, float]]) -> np.ndarray:
    """Unitary of a train of waveplates listed in optical order.

    ``elements`` holds ``("H", angle)`` or ``("Q", angle)`` pairs; the first
    element is the first one the photon meets.
    """
    u = np.eye(2, dtype=complex)
    for kind, angle in elements:
        if kind.upper() == "H":
            u = hwp(angle) @ u
        elif kind.upper() == "Q":
            u = qwp(angle) @ u
        else:
            raise ValueError(f"unknown waveplate kind {kind!r}")
    return u


def measurement_side_sequence(delta: float) -> list[tuple[str, float]]:
    """HWP at 0, QWP at -45 deg, HWP at delta/4, QWP at -45 deg."""
    q = -math.pi / 4
    return [("H", 0.0), ("Q", q), ("H", delta / 4), ("Q", q)]


def preparation_side_sequence(delta: float) -> list[tuple[str, float]]:
    """HWP at 0, QWP at +45 deg, HWP at delta/4, QWP at +45 deg."""
    q = math.pi / 4
    return [("H", 0.0), ("Q", q), ("H", delta / 4), ("Q", q)]
