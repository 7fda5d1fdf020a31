"""Pure two-qubit state families and entanglement quantities.

Basis order is ``|00>, |01>, |10>, |11>`` with Alice's qubit first, and
``|0>`` stands for horizontal polarization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .qlinalg import I4, SY, as_square, check_state, eigh, matrix_sqrt_psd

A_MARGIN = 1e-9
_SYSY = np.kron(SY, SY)


class Family(str, enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"
    PHI_DELTA = "PhiDelta"

    @property
    def is_psi(self) -> bool:
        return self in (Family.PSI_PLUS, Family.PSI_MINUS)

    @property
    def sign(self) -> int:
        return -1 if self in (Family.PHI_MINUS, Family.PSI_MINUS) else 1


CANONICAL_FAMILIES = (Family.PHI_PLUS, Family.PHI_MINUS, Family.PSI_PLUS, Family.PSI_MINUS)


def check_a(a: float) -> float:
    a = float(a)
    if not (A_MARGIN < a < 1.0 - A_MARGIN):
        raise ValueError(f"state coefficient a={a!r} must lie in (0, 1)")
    return a


@dataclass(frozen=True)
class StateFamily:
    """One member of the canonical families, identified by tag, ``a`` and (for PhiDelta) ``delta``."""

    tag: Family
    a: float
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tag", Family(self.tag))
        object.__setattr__(self, "a", check_a(self.a))
        object.__setattr__(self, "delta", float(self.delta) % (2 * math.pi))


def build_state(family: StateFamily) -> np.ndarray:
    """Amplitude vector of the family member."""
    a = family.a
    b = math.sqrt(1.0 - a * a)
    psi = np.zeros(4, dtype=complex)
    tag = family.tag
    if tag is Family.PHI_DELTA:
        psi[0], psi[3] = a, b * np.exp(1j * family.delta)
    elif tag.is_psi:
        psi[1], psi[2] = a, tag.sign * b
    else:
        psi[0], psi[3] = a, tag.sign * b
    return psi


def _normalized(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.shape != (4,):
        raise ValueError("two-qubit pure state needs 4 amplitudes")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise ValueError("state vector is not normalized")
    return psi


def densify(psi) -> np.ndarray:
    psi = _normalized(psi)
    return np.outer(psi, psi.conj())


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = check_state(as_square(rho, (4,)))
    flipped = _SYSY @ rho.conj() @ _SYSY
    sr = matrix_sqrt_psd(rho)
    # same spectrum as rho * flipped, but Hermitian
    m = sr @ flipped @ sr
    lam = np.clip(eigh(0.5 * (m + m.conj().T))[0], 0.0, None)
    s = np.sqrt(lam)
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def schmidt_coefficients(psi) -> tuple[float, float]:
    sv = np.linalg.svd(_normalized(psi).reshape(2, 2), compute_uv=False)
    return float(sv[0]), float(sv[1])


def purity(rho) -> float:
    rho = as_square(rho)
    return float(np.trace(rho @ rho).real)


def werner_mix(psi, v: float) -> np.ndarray:
    """``v |psi><psi| + (1 - v) I/4``."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility v={v!r} must be in [0, 1]")
    return v * densify(psi) + (1.0 - v) * I4 / 4


def _check_unitary(u, tol: float = 1e-9) -> np.ndarray:
    u = as_square(u, (2,))
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > tol:
        raise ValueError("operator is not unitary")
    return u


def local_unitary(rho, u_a, u_b) -> np.ndarray:
    u = np.kron(_check_unitary(u_a), _check_unitary(u_b))
    return u @ as_square(rho, (4,)) @ u.conj().T
