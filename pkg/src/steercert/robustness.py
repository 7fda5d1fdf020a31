"""Robustness bound, operator-inequality machinery and extractability search.

The operators live on two qubits with Alice first. ``K(v)`` is the target
state after Alice's dephasing channel, ``W(v)`` the linearized steering
operator with Alice's observables rotated by ``v``, and
``T(v) = K(v) - s W(v) - mu I``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .qlinalg import I2, I4, SX, SZ, as_square, eigh, pauli_string
from .states import densify
from .steering import S_LHS, S_MAX, SCHEMA_VERSION

SQRT2 = math.sqrt(2.0)
S_COEFF = SQRT2 / (2 * (SQRT2 - 1))
MU_COEFF = -1 / (SQRT2 - 1)

_II, _YY = pauli_string("II"), pauli_string("YY")
_XX, _XZ, _ZX, _ZZ = (pauli_string(p) for p in ("XX", "XZ", "ZX", "ZZ"))
_XI, _IX, _IZ = pauli_string("XI"), pauli_string("IX"), pauli_string("IZ")


class SelfCheckError(AssertionError):
    """Two independent evaluations of the same operator disagree."""


def q_bound(s: float, lambda_max: float) -> float:
    """Guaranteed extractability for an observed FGSI value ``s``.

    ``lambda_max`` is the largest Schmidt coefficient of the target. Values
    of ``s`` at or below the LHS bound give the trivial ``lambda_max**2``.
    """
    if not (1 / SQRT2 - 1e-12 <= lambda_max < 1.0):
        raise ValueError(f"lambda_max={lambda_max!r} must lie in [1/sqrt(2), 1)")
    if s > S_MAX + 1e-9:
        raise ValueError(f"S={s!r} exceeds the algebraic maximum 2")
    lam2 = lambda_max * lambda_max
    if s <= S_LHS:
        return lam2
    return lam2 + (1 - lam2) * (min(s, S_MAX) - S_LHS) / (S_MAX - S_LHS)


def target_state_rotated() -> np.ndarray:
    """Maximally entangled target aligned with Bob's ``B0 = sx, B1 = sz``."""
    return 0.25 * (_II + _YY + (_XX + _XZ + _ZX - _ZZ) / SQRT2)


def g_weight(vartheta: float) -> float:
    return (1 + SQRT2) * (math.sin(vartheta) + math.cos(vartheta) - 1)


@dataclass(frozen=True)
class ExtractionChannel:
    """Alice-side dephasing ``(1+g)/2 (.) + (1-g)/2 G (.) G``.

    ``G`` is ``sx`` for ``vartheta`` in ``[0, pi/4]`` and ``sz`` above.
    """

    vartheta: float

    def __post_init__(self):
        if not (-1e-12 <= self.vartheta <= math.pi / 2 + 1e-12):
            raise ValueError("vartheta must lie in [0, pi/2]")

    @property
    def g(self) -> float:
        return g_weight(self.vartheta)

    @property
    def gamma(self) -> np.ndarray:
        return SX if self.vartheta <= math.pi / 4 else SZ

    @property
    def weights(self) -> tuple[float, float]:
        return (1 + self.g) / 2, (1 - self.g) / 2

    def kraus(self) -> list[np.ndarray]:
        w0, w1 = self.weights
        return [math.sqrt(max(w0, 0.0)) * I2, math.sqrt(max(w1, 0.0)) * self.gamma]

    def apply(self, rho) -> np.ndarray:
        return channel_apply(self, rho)


def apply_alice_kraus(kraus, rho) -> np.ndarray:
    """Apply a channel given by Kraus operators to Alice's qubit (or to a lone qubit)."""
    rho = as_square(rho)
    ops = kraus if rho.shape[0] == 2 else [np.kron(k, I2) for k in kraus]
    return sum(k @ rho @ k.conj().T for k in ops)


def channel_apply(ch: ExtractionChannel, rho) -> np.ndarray:
    w0, w1 = ch.weights
    rho = as_square(rho)
    gam = ch.gamma if rho.shape[0] == 2 else np.kron(ch.gamma, I2)
    return w0 * rho + w1 * gam @ rho @ gam


def k_operator_closed_form(vartheta: float) -> np.ndarray:
    g = g_weight(vartheta)
    return 0.25 * (_II + g * _YY + (_XX + _XZ + g * _ZX - g * _ZZ) / SQRT2)


def k_operator(vartheta: float, check: bool = True, tol: float = 1e-10) -> np.ndarray:
    """Dephased target ``(Lambda(v) x id)(Psi)``; ``check`` compares against the channel route."""
    k = k_operator_closed_form(vartheta)
    if check:
        via_channel = channel_apply(ExtractionChannel(vartheta), target_state_rotated())
        dev = float(np.max(np.abs(k - via_channel)))
        if dev > tol:
            raise SelfCheckError(f"K closed form deviates from channel route by {dev:.3e}")
    return k


def w_operator(vartheta: float) -> np.ndarray:
    c, s = math.cos(vartheta), math.sin(vartheta)
    return _II + c * _XI + 0.5 * (_IX + _IZ + c * _XX + s * _ZX + c * _XZ - s * _ZZ)


def t_operator(vartheta: float, s: float = S_COEFF, mu: float = MU_COEFF) -> np.ndarray:
    return k_operator(vartheta, check=False) - s * w_operator(vartheta) - mu * I4


@dataclass
class InequalityCheck:
    ok: bool
    worst_margin: float
    worst_vartheta: float
    grid: np.ndarray
    margins: np.ndarray


def verify_operator_inequality(
    grid_points: int = 1000, tol: float = 1e-9, s: float = S_COEFF, mu: float = MU_COEFF
) -> InequalityCheck:
    """Sweep the minimum eigenvalue of ``T(v)`` over ``v`` in ``[0, pi/4]``.

    A negative margin is a finding about the constants, not an error.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    grid = np.linspace(0.0, math.pi / 4, grid_points)
    margins = np.array([eigh(t_operator(v, s, mu))[0][-1] for v in grid])
    k = int(np.argmin(margins))
    return InequalityCheck(bool(margins[k] >= -tol), float(margins[k]), float(grid[k]), grid, margins)


def yy_commutator_norm(vartheta: float, s: float = S_COEFF, mu: float = MU_COEFF) -> float:
    t = t_operator(vartheta, s, mu)
    return float(np.max(np.abs(t @ _YY - _YY @ t)))


def block_projector(x: int) -> np.ndarray:
    return 0.5 * (_II + (-1) ** x * _YY)


def block_basis(x: int) -> np.ndarray:
    """4x2 isometry onto the range of ``P_x``."""
    w, v = np.linalg.eigh(block_projector(x))
    return v[:, w > 0.5]


def block_matrix(vartheta: float, x: int, s: float = S_COEFF, mu: float = MU_COEFF) -> np.ndarray:
    """Compression ``M_x`` of ``T(v)`` onto the range of ``P_x``."""
    b = block_basis(x)
    return b.conj().T @ t_operator(vartheta, s, mu) @ b


def lambda_x(vartheta: float, x: int, s: float = S_COEFF, mu: float = MU_COEFF) -> float:
    """``(tr M_x)^2 - tr M_x^2`` of the block compression (twice its determinant)."""
    m = block_matrix(vartheta, x, s, mu)
    return float((np.trace(m) ** 2 - np.trace(m @ m)).real)


def trace_mx_closed_form(vartheta: float, x: int, s: float = S_COEFF, mu: float = MU_COEFF) -> float:
    return 2 * (0.25 - s - mu + (-1) ** x * g_weight(vartheta) / 4)


def trace_mx2_closed_form(vartheta: float, x: int, s: float = S_COEFF, mu: float = MU_COEFF) -> float:
    """Printed closed form for ``tr M_x^2``; kept for comparison with the block route."""
    g = g_weight(vartheta)
    c, sn = math.cos(vartheta), math.sin(vartheta)
    a0 = 0.25 - s - mu
    u = 0.25 - s * c / SQRT2
    w = g / 4 - s * sn / SQRT2
    even = 2 * (a0**2 + s**2 * (c**2 + 0.5) + g**2 / 16 + u**2 + w**2)
    odd = 2 * (g / 4 * a0 + u * w)
    return even + (-1) ** x * odd


def mixture_family(q: float) -> np.ndarray:
    """``q |Phi><Phi| + (1 - q) I/2 (x) |e+><e+|`` with ``e+`` the +1 state of ``(sz + sx)/sqrt(2)``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    phi = np.array([1, 0, 0, 1], dtype=complex) / SQRT2
    e = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)], dtype=complex)
    return q * densify(phi) + (1 - q) * np.kron(I2 / 2, np.outer(e, e.conj()))


def mixture_fgsi(q: float) -> float:
    """FGSI of :func:`mixture_family` under ``A = B = (sz, sx)``; affine in ``q``."""
    return q * S_MAX + (1 - q) * S_LHS


def _su2(a: float, b: float, c: float) -> np.ndarray:
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    ry = np.array([[math.cos(b / 2), -math.sin(b / 2)], [math.sin(b / 2), math.cos(b / 2)]], dtype=complex)
    return rz(a) @ ry @ rz(c)


def _dephasing_kraus(params: np.ndarray, gamma: np.ndarray) -> list[np.ndarray]:
    pre, post = _su2(*params[:3]), _su2(*params[4:7])
    w = math.sin(params[3]) ** 2
    return [post @ (math.sqrt(1 - w) * I2) @ pre, post @ (math.sqrt(w) * gamma) @ pre]


def _general_kraus(params: np.ndarray) -> list[np.ndarray]:
    # Stinespring isometry from an unconstrained 8x2 complex matrix
    m = (params[:16] + 1j * params[16:]).reshape(8, 2)
    u, _, vh = np.linalg.svd(m, full_matrices=False)
    v = u @ vh
    return [v[2 * k : 2 * k + 2, :] for k in range(4)]


def _fidelity_form(rho: np.ndarray, tt: np.ndarray) -> np.ndarray:
    """Matrix ``B`` with ``<t|(K x I) rho (K x I)^dag|t> = vec(K)^T B conj(vec(K))``."""
    basis = [np.eye(4)[m].reshape(2, 2) for m in range(4)]
    lifted = [np.kron(e, I2) for e in basis]
    return np.array([[np.trace(tt @ em @ rho @ en.conj().T) for en in lifted] for em in lifted])


@dataclass
class ExtractabilityResult:
    value: float
    kraus: list[np.ndarray]
    family: str


def extractability_search(
    rho, target, family: str = "general", restarts: int = 8, seed: int = 0
) -> ExtractabilityResult:
    """Maximize ``<t| (Lambda x id)(rho) |t>`` over Alice-side channels ``Lambda``.

    ``family="dephasing"`` searches unitary -> dephasing (weight ``w``,
    axis ``sx`` or ``sz``) -> unitary; ``family="general"`` searches all
    qubit channels through a four-Kraus Stinespring parameterization. Every
    result is a lower bound on the extractability. Restarts use seeds
    derived from ``seed`` and the best one wins, so the result does not
    depend on evaluation order.
    """
    rho = as_square(rho, (4,))
    t = np.asarray(target, dtype=complex).ravel()
    t = t / np.linalg.norm(t)
    tt = np.outer(t, t.conj())
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    form = _fidelity_form(rho, tt)

    def fid(kraus):
        return float(sum(np.real(k.ravel() @ form @ k.ravel().conj()) for k in kraus))

    candidates: list[tuple[float, list[np.ndarray], str]] = []
    if family == "dephasing":
        for name, gamma in (("sx", SX), ("sz", SZ)):
            starts = [np.zeros(7)] + [rng.uniform(-math.pi, math.pi, 7) for _ in range(restarts)]
            for x0 in starts:
                res = optimize.minimize(
                    lambda p: -fid(_dephasing_kraus(p, gamma)), x0, method="Nelder-Mead",
                    options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000},
                )
                kraus = _dephasing_kraus(res.x, gamma)
                candidates.append((fid(kraus), kraus, f"dephasing-{name}"))
    elif family == "general":
        ident = np.zeros(32)
        ident[0], ident[3] = 1.0, 1.0
        starts = [ident] + [rng.normal(size=32) for _ in range(restarts)]
        for x0 in starts:
            res = optimize.minimize(lambda p: -fid(_general_kraus(p)), x0, method="BFGS", options={"gtol": 1e-10})
            kraus = _general_kraus(res.x)
            candidates.append((fid(kraus), kraus, "general"))
    else:
        raise ValueError(f"unknown channel family {family!r}")
    best = max(candidates, key=lambda c: c[0])
    return ExtractabilityResult(min(best[0], 1.0), best[1], best[2])


def extractability_estimate(rho, target, family: str = "general", restarts: int = 8, seed: int = 0) -> float:
    return extractability_search(rho, target, family, restarts, seed).value


@dataclass
class RobustnessReport:
    s_observed: float
    lambda_max: float
    q: float
    extractability_lb: float | None
    psd_margin_grid: list[tuple[float, float]]
    lambda_x_grid: list[tuple[float, float, float]]
    fidelity_root: float | None = None
    fidelity_sq: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        worst = min(self.psd_margin_grid, key=lambda r: r[1]) if self.psd_margin_grid else None
        return {
            "schema_version": SCHEMA_VERSION,
            "S_observed": self.s_observed,
            "lambda_max": self.lambda_max,
            "Q": self.q,
            "extractability_lb": self.extractability_lb,
            "fidelity_root": self.fidelity_root,
            "fidelity_sq": self.fidelity_sq,
            "operator_inequality": {
                "grid_points": len(self.psd_margin_grid),
                "worst_vartheta": worst[0] if worst else None,
                "worst_min_eig_T": worst[1] if worst else None,
            },
            **self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def margins_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vartheta", "min_eig_T", "lambda0", "lambda1"])
        for (v, m), (_, l0, l1) in zip(self.psd_margin_grid, self.lambda_x_grid):
            w.writerow([repr(v), repr(m), repr(l0), repr(l1)])
        return buf.getvalue()


def operator_grids(grid_points: int = 1000):
    check = verify_operator_inequality(grid_points)
    margins = [(float(v), float(m)) for v, m in zip(check.grid, check.margins)]
    lams = [(float(v), lambda_x(v, 0), lambda_x(v, 1)) for v in check.grid]
    return margins, lams


def robustness_report(
    s_observed: float,
    lambda_max: float = 1 / SQRT2,
    rho=None,
    target=None,
    grid_points: int = 1000,
    seed: int = 0,
) -> RobustnessReport:
    """Bound ``Q`` plus the operator-inequality sweep, and optionally an extractability estimate."""
    margins, lams = operator_grids(grid_points)
    ext = None
    if rho is not None:
        if target is None:
            target = np.array([1, 0, 0, 1], dtype=complex) / SQRT2
        ext = extractability_estimate(rho, target, seed=seed)
    return RobustnessReport(s_observed, lambda_max, q_bound(s_observed, lambda_max), ext, margins, lams)
