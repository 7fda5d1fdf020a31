"""Small complex Hermitian linear algebra for qubit and two-qubit operators.

Every operator in the package is a plain ``numpy`` complex array of shape
``(2, 2)`` or ``(4, 4)``. The helpers here validate shapes and finiteness,
and provide the spectral routines (eigendecomposition, PSD square root,
fidelity) the other modules build on.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


class DimensionError(ValueError):
    """Operand shapes are not compatible or not in {2, 4}."""


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class NotAStateError(ValueError):
    """Input is not a unit-trace PSD Hermitian matrix."""


def as_square(a, dims=(2, 4)) -> np.ndarray:
    """Return ``a`` as a finite complex square array with dimension in ``dims``."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in dims:
        raise DimensionError(f"expected square matrix of dim in {dims}, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf")
    return m


def _same_dim(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_square(a), as_square(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def add(a, b) -> np.ndarray:
    a, b = _same_dim(a, b)
    return a + b


def scale(c: complex, a) -> np.ndarray:
    if not np.isfinite(c):
        raise ValueError("scalar must be finite")
    return complex(c) * as_square(a)


def matmul(a, b) -> np.ndarray:
    a, b = _same_dim(a, b)
    return a @ b


def adjoint(a) -> np.ndarray:
    return as_square(a).conj().T


def trace(a) -> complex:
    return complex(np.trace(as_square(a)))


def kron(a, b) -> np.ndarray:
    """Kronecker product of two qubit operators; block ``(i, j)`` is ``a[i, j] * b``."""
    a, b = as_square(a, (2,)), as_square(b, (2,))
    return np.kron(a, b)


def hermitian_deviation(h) -> float:
    h = as_square(h)
    return float(np.max(np.abs(h - h.conj().T)))


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    return hermitian_deviation(h) <= tol


def check_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = as_square(h)
    dev = hermitian_deviation(h)
    if dev > tol:
        raise NotHermitianError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return h


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues in descending order.
    eigenvectors : ndarray
        Orthonormal eigenvectors as columns, matching ``eigenvalues``.
    """
    h = check_hermitian(h)
    # symmetrize so LAPACK sees an exactly Hermitian input
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return w[::-1].copy(), v[:, ::-1].copy()


def min_eigenvalue(h) -> float:
    return float(eigh(h)[0][-1])


def is_psd(h, tol: float = PSD_TOL) -> bool:
    return min_eigenvalue(h) >= -tol


def trace_norm(a) -> float:
    return float(np.sum(np.linalg.svd(as_square(a), compute_uv=False)))


def matrix_sqrt_psd(h, clip_tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues in ``[-clip_tol, 0)`` are treated as zero; anything more
    negative raises :class:`NotPSDError`.
    """
    w, v = eigh(h)
    if w[-1] < -clip_tol:
        raise NotPSDError(f"eigenvalue {w[-1]:.3e} below -{clip_tol:g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def check_state(rho, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix and return it as a complex array."""
    try:
        rho = check_hermitian(rho)
    except NotHermitianError as exc:
        raise NotAStateError(str(exc)) from exc
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotAStateError(f"trace {tr!r} differs from 1")
    if min_eigenvalue(rho) < -tol:
        raise NotAStateError("matrix is not positive semi-definite")
    return rho


def fidelity_root(rho, sigma) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``, in [0, 1]."""
    rho, sigma = _same_dim(check_state(rho), check_state(sigma))
    sr = matrix_sqrt_psd(rho)
    inner = sr @ sigma @ sr
    inner = 0.5 * (inner + inner.conj().T)
    f = np.trace(matrix_sqrt_psd(inner)).real
    return float(min(max(f, 0.0), 1.0))


def fidelity_sq(rho, sigma) -> float:
    """Squared fidelity ``||sqrt(rho) sqrt(sigma)||_1 ** 2``."""
    rho, sigma = _same_dim(check_state(rho), check_state(sigma))
    f = trace_norm(matrix_sqrt_psd(rho) @ matrix_sqrt_psd(sigma))
    return float(min(max(f * f, 0.0), 1.0))


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of Pauli matrices, e.g. ``pauli_string("XZ")``."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def partial_trace_a(rho4) -> np.ndarray:
    """Trace out the first (Alice's) qubit of a two-qubit operator."""
    r = as_square(rho4, (4,)).reshape(2, 2, 2, 2)
    return np.einsum("ijik->jk", r)


def partial_trace_b(rho4) -> np.ndarray:
    r = as_square(rho4, (4,)).reshape(2, 2, 2, 2)
    return np.einsum("ijkj->ik", r)


def equal_up_to_phase(u, v, tol: float = 1e-9) -> bool:
    """Compare two matrices up to a global phase, aligned on the first nonzero entry of ``u``."""
    u, v = _same_dim(u, v)
    flat_u, flat_v = u.ravel(), v.ravel()
    idx = int(np.argmax(np.abs(flat_u) > 1e-12))
    if abs(flat_u[idx]) <= 1e-12 or abs(flat_v[idx]) <= 1e-12:
        return bool(np.max(np.abs(u - v)) <= tol)
    phase = (flat_u[idx] / abs(flat_u[idx])) / (flat_v[idx] / abs(flat_v[idx]))
    return bool(np.max(np.abs(u - phase * v)) <= tol)
