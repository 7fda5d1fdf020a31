"""Fine-grained steering inequality (FGSI) and statistics-only certification.

Statistics are joint outcome tables ``p[alpha, beta]`` for setting pairs
``(i, j)``: Alice measures ``A_i``, Bob measures ``B_j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import optimize

from .measurements import (
    SIGMA_X,
    SIGMA_Z,
    DichotomicObservable,
    canonical_observables,
    joint_table,
    observable_from_angle,
    phase_adapted_observables,
    theta_max,
)
from .qlinalg import fidelity_root, fidelity_sq
from .states import A_MARGIN, CANONICAL_FAMILIES, Family, StateFamily, build_state, densify

S_LHS = 1.0 + 1.0 / math.sqrt(2.0)
S_MAX = 2.0
SCHEMA_VERSION = 1

DEFAULT_PAIRS = ((0, 0), (1, 1), (0, 1), (1, 0))


class NotSteerable(ValueError):
    """The FGSI value does not exceed the local-hidden-state bound."""


class InconsistentStatistics(ValueError):
    pass


@dataclass
class SteeringStatistics:
    """Joint probabilities per populated setting pair.

    ``pairs[(i, j)]`` is a 2x2 array indexed ``[alpha, beta]``. ``n`` optionally
    records the number of trials behind each pair (absent for exact data).
    """

    pairs: dict[tuple[int, int], np.ndarray]
    n: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, table in self.pairs.items():
            t = np.asarray(table, dtype=float).reshape(2, 2)
            if np.any(t < -1e-12) or np.any(t > 1 + 1e-12):
                raise ValueError(f"probabilities for pair {key} outside [0, 1]")
            if abs(t.sum() - 1.0) > 1e-6:
                raise ValueError(f"probabilities for pair {key} sum to {t.sum():.9f}")
            clean[(int(key[0]), int(key[1]))] = t
        self.pairs = clean
        self.n = {(int(k[0]), int(k[1])): int(v) for k, v in self.n.items()}

    @property
    def populated(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.pairs))

    def table(self, i: int, j: int) -> np.ndarray:
        try:
            return self.pairs[(i, j)]
        except KeyError:
            raise KeyError(f"setting pair ({i}, {j}) is not populated") from None

    def alice_marginal(self, i: int, alpha: int, j: int | None = None) -> float:
        """``p(alpha | A_i)``; from pair ``(i, j)`` if given, else averaged over pairs with setting ``i``."""
        if j is not None:
            return float(self.table(i, j)[alpha].sum())
        vals = [t[alpha].sum() for (ii, _), t in self.pairs.items() if ii == i]
        if not vals:
            raise KeyError(f"no populated pair with Alice setting {i}")
        return float(np.mean(vals))

    @property
    def alice_marginals(self) -> dict[int, tuple[float, float]]:
        settings = sorted({i for i, _ in self.pairs})
        return {i: (self.alice_marginal(i, 0), self.alice_marginal(i, 1)) for i in settings}

    def conditional(self, i: int, j: int, alpha: int, beta: int) -> float:
        """``p(beta_{B_j} | alpha_{A_i})`` computed within pair ``(i, j)``."""
        t = self.table(i, j)
        pa = t[alpha].sum()
        if pa <= 1e-9:
            raise ZeroDivisionError(f"Alice marginal p({alpha}|A_{i}) = {pa:.3e} vanishes")
        return float(t[alpha, beta] / pa)

    def to_dict(self) -> dict:
        pairs = {
            f"{i},{j}": {f"p{a}{b}": float(t[a, b]) for a in (0, 1) for b in (0, 1)}
            for (i, j), t in sorted(self.pairs.items())
        }
        marg = {str(i): {"p0": m[0], "p1": m[1]} for i, m in self.alice_marginals.items()}
        out = {"schema_version": SCHEMA_VERSION, "pairs": pairs, "alice_marginals": marg}
        if self.n:
            out["n"] = {f"{i},{j}": n for (i, j), n in sorted(self.n.items())}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SteeringStatistics":
        pairs = {}
        for key, cell in doc["pairs"].items():
            i, j = (int(x) for x in key.split(","))
            pairs[(i, j)] = np.array([[cell["p00"], cell["p01"]], [cell["p10"], cell["p11"]]], dtype=float)
        n = {}
        for key, val in doc.get("n", {}).items():
            i, j = (int(x) for x in key.split(","))
            n[(i, j)] = int(val)
        return cls(pairs, n)

    @classmethod
    def from_json(cls, text: str) -> "SteeringStatistics":
        return cls.from_dict(json.loads(text))


def exact_statistics(rho, alice: Iterable, bob: Iterable, pairs=DEFAULT_PAIRS) -> SteeringStatistics:
    """Noiseless statistics of ``rho`` for the given observables (objects or 2x2 operators)."""
    alice, bob = list(alice), list(bob)
    return SteeringStatistics({(i, j): joint_table(rho, alice[i], bob[j]) for i, j in pairs})


def family_statistics(family: StateFamily, pairs=DEFAULT_PAIRS) -> SteeringStatistics:
    """Exact statistics of a family member under its canonical observables."""
    rho = densify(build_state(family))
    a0, a1, b0, b1 = canonical_observables(family)
    if family.tag is Family.PHI_DELTA:
        a0, a1 = phase_adapted_observables(theta_max(family.a), family.delta)
    return exact_statistics(rho, (a0, a1), (b0, b1), pairs)


def fgsi_value(stats: SteeringStatistics, alpha: int = 0, beta: int = 0) -> float:
    """``p(beta_{B0} | alpha_{A0}) + p(beta_{B1} | alpha_{A1})``."""
    return stats.conditional(0, 0, alpha, beta) + stats.conditional(1, 1, alpha, beta)


@dataclass
class ScanResult:
    theta_best: float
    s_best: float
    curve: list[tuple[float, float]]


def _fgsi_at(rho, family: StateFamily | None, theta: float) -> float:
    if family is not None and family.tag is Family.PHI_DELTA:
        a0, a1 = phase_adapted_observables(theta, family.delta)
    else:
        a0 = canonical_observables(family)[0] if family is not None else SIGMA_Z
        a1 = observable_from_angle(theta)
    stats = exact_statistics(rho, (a0, a1), (SIGMA_Z, SIGMA_X), pairs=((0, 0), (1, 1)))
    return fgsi_value(stats)


def fgsi_scan(rho, family: StateFamily | None = None, resolution: int = 721) -> ScanResult:
    """Scan Alice's second observable angle and refine the best point.

    ``A_0`` is the family's canonical first observable (``sz`` when ``family``
    is None) and ``A_1 = observable_from_angle(theta)`` for ``theta`` in
    ``[-pi/2, pi/2]``. Grid points where an Alice outcome has zero
    probability are recorded as NaN.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    grid = np.linspace(-math.pi / 2, math.pi / 2, resolution)

    def value(t):
        try:
            return _fgsi_at(rho, family, float(t))
        except ZeroDivisionError:
            return float("nan")

    vals = np.array([value(t) for t in grid])
    if np.all(np.isnan(vals)):
        raise ValueError("FGSI undefined on the whole grid")
    k = int(np.nanargmax(vals))
    step = grid[1] - grid[0]
    lo, hi = grid[k] - step, grid[k] + step

    def neg(t):
        v = value(t)
        return 1e3 if math.isnan(v) else -v

    res = optimize.minimize_scalar(neg, bracket=(lo, grid[k], hi), method="golden", tol=1e-9)
    theta_best, s_best = float(res.x), -float(res.fun)
    if s_best < vals[k]:
        theta_best, s_best = float(grid[k]), float(vals[k])
    curve = [(float(t), float(v)) for t, v in zip(grid, vals)]
    return ScanResult(theta_best, s_best, curve)


def lhs_value(bloch) -> float:
    """``<0|rho_B|0> + <+|rho_B|+>`` for Bob's Bloch vector."""
    x, _, z = bloch
    return 1.0 + 0.5 * (x + z)


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    r = np.sqrt(1 - z * z)
    phi = math.pi * (3 - math.sqrt(5)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def lhs_bound_bruteforce(grid_resolution: int = 10_000, points: np.ndarray | None = None) -> float:
    """Largest FGSI value of a local-hidden-state model.

    With deterministic Alice responses absorbed, this is the maximum of
    :func:`lhs_value` over Bob's states; ``points`` restricts the search to
    given Bloch vectors, otherwise a Fibonacci grid on the sphere is used.
    """
    pts = fibonacci_sphere(grid_resolution) if points is None else np.atleast_2d(points)
    return float(np.max(1.0 + 0.5 * (pts[:, 0] + pts[:, 2])))


def linearized_fgsi(stats: SteeringStatistics, a: float) -> float:
    """``p(00|00)/a^2 + 2 p(00|11) / (1 - (1 - 2a^2)^2)``."""
    a = float(a)
    if not (A_MARGIN < a < 1 - A_MARGIN):
        raise ValueError(f"a={a!r} must be in (0, 1)")
    d0 = a * a
    d1 = 1.0 - (1.0 - 2 * a * a) ** 2
    if d0 <= 1e-12 or d1 <= 1e-12:
        raise ZeroDivisionError("vanishing denominator in linearized FGSI")
    return float(stats.table(0, 0)[0, 0] / d0 + 2 * stats.table(1, 1)[0, 0] / d1)


def mutual_predictability(stats: SteeringStatistics, i: int, j: int) -> float:
    t = stats.table(i, j)
    return float(t[0, 0] + t[1, 1])


@dataclass
class CertificationReport:
    s_fgsi: float
    e: float
    two_e_minus_1: float
    concurrence_est: float
    a_est: float
    a_branch: float
    branch_used: str
    family_id: Family
    alice_observables: tuple[DichotomicObservable, DichotomicObservable]
    theta_max_est: float
    equivalent_forms: list[tuple[Family, float]]
    perfect_pair: tuple[int, int] | None
    confident: bool
    family_given: bool
    pairs_consumed: dict[str, list[str]]

    @property
    def family(self) -> StateFamily:
        return StateFamily(self.family_id, self.a_est)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "S_fgsi": self.s_fgsi,
            "E": self.e,
            "two_E_minus_1": self.two_e_minus_1,
            "concurrence_est": self.concurrence_est,
            "a_est": self.a_est,
            "a_branch": self.a_branch,
            "branch_used": self.branch_used,
            "family_id": self.family_id.value,
            "family_given": self.family_given,
            "alice_observables": [list(o.bloch) for o in self.alice_observables],
            "theta_max_est": self.theta_max_est,
            "equivalent_forms": [[f.value, a] for f, a in self.equivalent_forms],
            "perfect_pair": list(self.perfect_pair) if self.perfect_pair else None,
            "confident": self.confident,
            "pairs_consumed": self.pairs_consumed,
        }


def _stat_sigma(c: float, n: int | None) -> float:
    if not n:
        return 0.0
    return math.sqrt(max(c * (1 - c), 0.0) / n) + 1.0 / n


def certify(stats: SteeringStatistics, family: Family | str | None = None) -> CertificationReport:
    """Certify steering and recover the Schmidt coefficient from statistics.

    The statistics fix the state only up to an isometry on Alice's side: the
    four canonical families with coefficients ``a`` (PhiPlus, PhiMinus) and
    ``sqrt(1 - a^2)`` (PsiPlus, PsiMinus) produce identical tables. Without
    ``family`` the report uses the PhiPlus form and lists the equivalent
    forms; passing the prepared family type expresses ``a`` in that form.

    Raises
    ------
    NotSteerable
        ``S_FGSI`` at ``alpha = beta = 0`` does not exceed ``1 + 1/sqrt(2)``.
    InconsistentStatistics
        ``2E - 1`` is negative.
    """
    s = fgsi_value(stats, 0, 0)
    if s <= S_LHS:
        raise NotSteerable(f"S_FGSI = {s:.6f} does not exceed the LHS bound {S_LHS:.6f}")

    c00 = mutual_predictability(stats, 0, 0)
    c11 = mutual_predictability(stats, 1, 1)
    e = min(c00, c11)
    two_e = 2 * e - 1
    if two_e < 0:
        raise InconsistentStatistics(f"2E - 1 = {two_e:.6f} is negative")
    conc = math.sqrt(min(two_e, 1.0))

    # normalization route: the perfectly correlated pair fixes a^2 directly
    norm_pair = (0, 0) if c00 >= c11 else (1, 1)
    c_norm = max(c00, c11)
    sigma = _stat_sigma(c_norm, stats.n.get(norm_pair))
    confident = c_norm >= 1 - max(3 * sigma, 1e-9)
    t = stats.table(*norm_pair)
    a2_phi = min(max(t[0, 0] / c_norm, A_MARGIN), 1 - A_MARGIN)

    root = math.sqrt(max(1.0 - conc * conc, 0.0))
    branches = {"plus": (1 + root) / 2, "minus": (1 - root) / 2}
    branch_used = min(branches, key=lambda b: abs(branches[b] - a2_phi))
    a2_branch = min(max(branches[branch_used], A_MARGIN), 1 - A_MARGIN)

    given = family is not None
    fam = Family(family) if given else Family.PHI_PLUS
    if fam.is_psi:
        a_est, a_branch = math.sqrt(1 - a2_phi), math.sqrt(1 - a2_branch)
    else:
        a_est, a_branch = math.sqrt(a2_phi), math.sqrt(a2_branch)

    equivalent = [
        (f, math.sqrt(1 - a2_phi) if f.is_psi else math.sqrt(a2_phi)) for f in CANONICAL_FAMILIES
    ]
    sf = StateFamily(fam, a_est)
    a0, a1, _, _ = canonical_observables(sf)
    consumed = {
        "S_fgsi": ["0,0", "1,1"],
        "E": ["0,0", "1,1"],
        "a_est": [f"{norm_pair[0]},{norm_pair[1]}"],
        "branch_used": ["0,0", "1,1", f"{norm_pair[0]},{norm_pair[1]}"],
    }
    return CertificationReport(
        s_fgsi=s,
        e=e,
        two_e_minus_1=two_e,
        concurrence_est=conc,
        a_est=a_est,
        a_branch=a_branch,
        branch_used=branch_used,
        family_id=fam,
        alice_observables=(a0, a1),
        theta_max_est=theta_max(a_est),
        equivalent_forms=equivalent,
        perfect_pair=norm_pair if confident else None,
        confident=confident,
        family_given=given,
        pairs_consumed=consumed,
    )


def certified_state(report: CertificationReport) -> np.ndarray:
    """Density matrix of the certified pure state."""
    return densify(build_state(report.family))


def self_test_fidelity(report: CertificationReport, rho_other, convention: str = "root") -> float:
    rho_test = certified_state(report)
    if convention == "root":
        return fidelity_root(rho_test, rho_other)
    if convention == "squared":
        return fidelity_sq(rho_test, rho_other)
    raise ValueError(f"unknown fidelity convention {convention!r}")
