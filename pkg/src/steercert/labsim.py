"""Simulated coincidence-count experiment.

Counts are drawn per setting pair from a multinomial over the four joint
outcomes. Seeds for pairs and Monte Carlo repetitions are derived from the
run seed with :class:`numpy.random.SeedSequence`, so results do not depend
on evaluation order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping

import numpy as np

from .measurements import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DichotomicObservable,
    canonical_observables,
    joint_table,
    phase_adapted_observables,
    theta_max,
)
from .qlinalg import I2, I4, PAULI, as_square, eigh, fidelity_root, fidelity_sq
from .robustness import q_bound
from .states import Family, StateFamily, build_state, densify, purity, schmidt_coefficients
from .steering import (
    SCHEMA_VERSION,
    CertificationReport,
    NotSteerable,
    SteeringStatistics,
    certify,
    certified_state,
    fgsi_value,
)

DEFAULT_N = 15_000
NOSIGNAL_THRESHOLD = 6.0
CSV_HEADER = ["pair_a", "pair_b", "n00", "n01", "n10", "n11", "N", "seed"]
TOMO_BASES = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 63-bit child seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _key_index(key) -> int:
    return zlib.crc32(repr(tuple(key)).encode())


@dataclass
class CountsTable:
    """Integer coincidence counts per setting pair, indexed ``[alpha, beta]``."""

    counts: dict[tuple[Hashable, Hashable], np.ndarray]
    seed: int | None = None

    def __post_init__(self):
        clean = {}
        for key, table in self.counts.items():
            t = np.asarray(table).reshape(2, 2)
            if np.any(t < 0):
                raise ValueError(f"negative counts for pair {key}")
            if t.sum() <= 0:
                raise ValueError(f"pair {key} has no counts")
            clean[tuple(key)] = t
        self.counts = clean

    def total(self, key) -> int:
        return int(self.counts[tuple(key)].sum())

    @property
    def keys(self) -> list:
        return sorted(self.counts, key=lambda k: tuple(str(x) for x in k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for key in self.keys:
            t = self.counts[key]
            w.writerow([key[0], key[1], *(int(x) for x in t.ravel()), int(t.sum()),
                        "" if self.seed is None else self.seed])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountsTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or list(rows[0].keys()) != CSV_HEADER:
            raise ValueError(f"counts CSV must have header {','.join(CSV_HEADER)}")
        counts, seed = {}, None
        for line, row in enumerate(rows, start=2):
            key = tuple(int(v) if v.lstrip("-").isdigit() else v for v in (row["pair_a"], row["pair_b"]))
            t = np.array([int(row[c]) for c in ("n00", "n01", "n10", "n11")]).reshape(2, 2)
            if t.sum() != int(row["N"]):
                raise ValueError(f"line {line}: counts do not sum to N")
            counts[key] = t
            if row["seed"]:
                seed = int(row["seed"])
        return cls(counts, seed)


def sample_counts(
    rho,
    pairs: Mapping,
    n: int = DEFAULT_N,
    seed: int = 0,
    mode: str = "multinomial",
) -> CountsTable:
    """Draw coincidence counts for each ``key -> (A, B)`` in ``pairs``.

    ``mode="poisson"`` draws each cell independently with mean ``n * p``.
    """
    if n < 1:
        raise ValueError("N must be at least 1")
    rho = as_square(rho, (4,))
    counts = {}
    for key, (a_obs, b_obs) in pairs.items():
        p = np.clip(joint_table(rho, a_obs, b_obs).ravel(), 0.0, None)
        p = p / p.sum()
        rng = np.random.default_rng(derive_seed(seed, _key_index(key)))
        if mode == "multinomial":
            c = rng.multinomial(n, p)
        elif mode == "poisson":
            c = rng.poisson(n * p)
            if c.sum() == 0:
                c[int(np.argmax(p))] = 1
        else:
            raise ValueError(f"unknown sampling mode {mode!r}")
        counts[key] = c.reshape(2, 2)
    return CountsTable(counts, seed)


@dataclass(frozen=True)
class NoiseModel:
    visibility: float = 1.0
    angle_jitter_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if self.angle_jitter_sigma < 0:
            raise ValueError("angle jitter must be non-negative")


def _rotate_xz(obs, dphi: float):
    """Rotate an observable about the y axis of the Bloch sphere by ``dphi``."""
    c, s = math.cos(dphi), math.sin(dphi)
    if isinstance(obs, DichotomicObservable):
        x, y, z = obs.bloch
        return DichotomicObservable((c * x + s * z, y, -s * x + c * z), obs.label)
    r = np.array([[math.cos(dphi / 2), -math.sin(dphi / 2)], [math.sin(dphi / 2), math.cos(dphi / 2)]])
    m = as_square(obs, (2,))
    return r @ m @ r.T


def apply_noise(model: NoiseModel, rho, observables, seed: int = 0):
    """White-noise mixing ``v rho + (1 - v) I/4`` plus Gaussian jitter of each observable angle.

    The jitter acts on the waveplate-style angle ``theta`` of
    ``cos(2 theta) sz + sin(2 theta) sx``, so the Bloch vector turns by
    twice the drawn value.
    """
    rho = as_square(rho, (4,))
    v = model.visibility
    noisy = v * rho + (1 - v) * I4 / 4
    if model.angle_jitter_sigma == 0:
        return noisy, list(observables)
    rng = np.random.default_rng(derive_seed(seed, 0x717))
    jittered = [_rotate_xz(o, 2 * rng.normal(0.0, model.angle_jitter_sigma)) for o in observables]
    return noisy, jittered


def estimate_statistics(counts: CountsTable) -> SteeringStatistics:
    """Frequencies ``n / N`` for every integer-keyed pair."""
    pairs, ns = {}, {}
    for key, t in counts.counts.items():
        if not all(isinstance(k, (int, np.integer)) for k in key):
            continue
        total = t.sum()
        pairs[key] = t / total
        ns[key] = int(total)
    return SteeringStatistics(pairs, ns)


@dataclass(frozen=True)
class TomographySetting:
    basis_a: str
    outcome_a: int
    basis_b: str
    outcome_b: int

    @property
    def label(self) -> str:
        sign = lambda o: "+" if o == 0 else "-"
        return f"{sign(self.outcome_a)}{self.basis_a.lower()},{sign(self.outcome_b)}{self.basis_b.lower()}"


def tomography_settings() -> list[TomographySetting]:
    """The 36 product projectors: eigenstates of sx, sy, sz on each side."""
    return [
        TomographySetting(ba, oa, bb, ob)
        for ba in TOMO_BASES for bb in TOMO_BASES for oa in (0, 1) for ob in (0, 1)
    ]


def tomography_pairs() -> dict[tuple[str, str], tuple[DichotomicObservable, DichotomicObservable]]:
    """The nine basis pairs that realize the 36 projectors."""
    return {(ba, bb): (TOMO_BASES[ba], TOMO_BASES[bb]) for ba in TOMO_BASES for bb in TOMO_BASES}


def project_to_density(h) -> np.ndarray:
    """Nearest unit-trace PSD matrix in Frobenius norm (eigenvalue simplex projection)."""
    w, v = eigh(h)
    # w is descending; Euclidean projection onto the probability simplex
    css = np.cumsum(w)
    k = np.arange(1, len(w) + 1)
    rho_idx = np.nonzero(w - (css - 1) / k > 0)[0][-1]
    shift = (css[rho_idx] - 1) / (rho_idx + 1)
    lam = np.clip(w - shift, 0.0, None)
    return (v * lam) @ v.conj().T


@dataclass
class TomographyResult:
    rho_hat: np.ndarray
    fidelity_to_target: float | None
    purity: float
    settings_used: int
    rho_linear: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "rho_hat_real": self.rho_hat.real.tolist(),
            "rho_hat_imag": self.rho_hat.imag.tolist(),
            "fidelity_to_target": self.fidelity_to_target,
            "purity": self.purity,
            "settings_used": self.settings_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def tomography_from_frequencies(freqs: Mapping[tuple[str, str], np.ndarray], target=None) -> TomographyResult:
    """Linear inversion from per-basis-pair outcome frequencies, then PSD projection."""
    missing = [k for k in tomography_pairs() if k not in freqs]
    if missing:
        raise ValueError(f"missing tomography settings: {missing}")
    signs = np.array([[1, -1], [-1, 1]])
    corr, ea, eb = {}, {b: [] for b in TOMO_BASES}, {b: [] for b in TOMO_BASES}
    for (ba, bb) in tomography_pairs():
        f = np.asarray(freqs[(ba, bb)], dtype=float).reshape(2, 2)
        f = f / f.sum()
        corr[(ba, bb)] = float((signs * f).sum())
        ea[ba].append(float(f[0].sum() - f[1].sum()))
        eb[bb].append(float(f[:, 0].sum() - f[:, 1].sum()))
    rho = np.kron(I2, I2).astype(complex)
    for ba in TOMO_BASES:
        rho += np.mean(ea[ba]) * np.kron(PAULI[ba], I2)
        rho += np.mean(eb[ba]) * np.kron(I2, PAULI[ba])
        for bb in TOMO_BASES:
            rho += corr[(ba, bb)] * np.kron(PAULI[ba], PAULI[bb])
    rho_lin = rho / 4
    rho_hat = project_to_density(0.5 * (rho_lin + rho_lin.conj().T))
    fid = None if target is None else fidelity_root(rho_hat, _as_density(target))
    return TomographyResult(rho_hat, fid, purity(rho_hat), 4 * len(freqs), rho_lin)


def _as_density(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return densify(x) if x.ndim == 1 else x


def tomography(counts: CountsTable, target=None) -> TomographyResult:
    freqs = {k: v for k, v in counts.counts.items() if k in tomography_pairs()}
    return tomography_from_frequencies(freqs, target)


@dataclass
class NoSignalingReport:
    z: dict[tuple[int, int], float]
    marginals: dict[tuple[int, int, int], float]
    max_z: float
    passed: bool
    threshold: float
    n: dict[tuple[int, int], int]
    seed: int | None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "test": "two-proportion z-score per (B_j, beta) between Alice settings 0 and 1",
            "z": {f"B{j},beta={b}": v for (j, b), v in sorted(self.z.items())},
            "bob_marginals": {f"A{i}B{j},beta={b}": v for (i, j, b), v in sorted(self.marginals.items())},
            "max_z": self.max_z,
            "pass": self.passed,
            "threshold": self.threshold,
            "N": {f"{i},{j}": v for (i, j), v in sorted(self.n.items())},
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def marginals_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["B", "beta", "p_A0", "p_A1", "z"])
        for (j, b), z in sorted(self.z.items()):
            w.writerow([j, b, repr(self.marginals[(0, j, b)]), repr(self.marginals[(1, j, b)]), repr(z)])
        return buf.getvalue()


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> float:
    """``|p1 - p2| / sqrt(p1 q1 / n1 + p2 q2 / n2)`` with a ``1/(2N)`` continuity floor."""
    p1, p2 = k1 / n1, k2 / n2
    if p1 == p2:
        return 0.0
    c1 = min(max(p1, 1 / (2 * n1)), 1 - 1 / (2 * n1))
    c2 = min(max(p2, 1 / (2 * n2)), 1 - 1 / (2 * n2))
    se = math.sqrt(c1 * (1 - c1) / n1 + c2 * (1 - c2) / n2)
    return abs(p1 - p2) / se


def no_signaling_test(counts: CountsTable, threshold: float = NOSIGNAL_THRESHOLD, bob_settings=(0, 1)) -> NoSignalingReport:
    """Compare Bob's marginals between Alice's two settings for each ``(B_j, beta)``."""
    z, marg, ns = {}, {}, {}
    for j in bob_settings:
        for i in (0, 1):
            if (i, j) not in counts.counts:
                raise KeyError(f"setting pair ({i}, {j}) missing")
            ns[(i, j)] = counts.total((i, j))
        for beta in (0, 1):
            k = [int(counts.counts[(i, j)][:, beta].sum()) for i in (0, 1)]
            for i in (0, 1):
                marg[(i, j, beta)] = k[i] / ns[(i, j)]
            z[(j, beta)] = two_proportion_z(k[0], ns[(0, j)], k[1], ns[(1, j)])
    max_z = max(z.values())
    return NoSignalingReport(z, marg, max_z, bool(max_z <= threshold), threshold, ns, counts.seed)


def monte_carlo_error(
    pipeline: Callable[[CountsTable], float],
    rho,
    pairs: Mapping,
    n: int = DEFAULT_N,
    reps: int = 100,
    seed: int = 0,
    workers: int | None = None,
) -> tuple[float, float]:
    """Mean and sample standard deviation of ``pipeline`` over re-simulated count tables."""
    if reps < 2:
        raise ValueError("reps must be at least 2")

    def one(r: int) -> float:
        return float(pipeline(sample_counts(rho, pairs, n, derive_seed(seed, r))))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, range(reps)))
    else:
        vals = [one(r) for r in range(reps)]
    arr = np.array(vals)
    return float(arr.mean()), float(arr.std(ddof=1))


def steering_pairs(family: StateFamily, alice=None) -> dict:
    """Setting pairs ``(i, j) -> (A_i, B_j)`` with the family's canonical observables."""
    a0, a1, b0, b1 = canonical_observables(family)
    if family.tag is Family.PHI_DELTA:
        a0, a1 = phase_adapted_observables(theta_max(family.a), family.delta)
    if alice is not None:
        a0, a1 = alice
    return {(i, j): ((a0, a1)[i], (b0, b1)[j]) for i in (0, 1) for j in (0, 1)}


@dataclass
class ExperimentRun:
    family: StateFamily
    noise: NoiseModel
    n: int
    seed: int
    steering_counts: CountsTable
    tomography_counts: CountsTable
    stats: SteeringStatistics
    s_observed: float
    report: CertificationReport | None
    tomo: TomographyResult
    fidelity_root: float | None
    fidelity_sq: float | None
    q: float
    rho_true: np.ndarray = field(repr=False, default=None)

    @property
    def steerable(self) -> bool:
        return self.report is not None


def run_experiment(
    family: StateFamily,
    noise: NoiseModel = NoiseModel(),
    n: int = DEFAULT_N,
    seed: int = 0,
    known_family: bool = True,
) -> ExperimentRun:
    """Prepare, measure, certify and tomograph one simulated state.

    The certified state uses the prepared family type when ``known_family``
    is set, as when comparing a self-tested state against tomography.
    """
    rho = densify(build_state(family))
    a0, a1, b0, b1 = (steering_pairs(family)[k][m] for k, m in (((0, 0), 0), ((1, 1), 0), ((0, 0), 1), ((1, 1), 1)))
    rho_noisy, (a0, a1, b0, b1) = apply_noise(noise, rho, [a0, a1, b0, b1], seed)
    noisy_pairs = {(i, j): ((a0, a1)[i], (b0, b1)[j]) for i in (0, 1) for j in (0, 1)}
    steer = sample_counts(rho_noisy, noisy_pairs, n, derive_seed(seed, 1))
    tomo_counts = sample_counts(rho_noisy, tomography_pairs(), n, derive_seed(seed, 2))
    stats = estimate_statistics(steer)
    s_obs = fgsi_value(stats)
    try:
        report = certify(stats, family.tag if known_family else None)
    except NotSteerable:
        report = None
    tomo = tomography(tomo_counts, target=rho)
    f_root = f_sq = None
    if report is not None:
        rho_test = certified_state(report)
        f_root = fidelity_root(rho_test, tomo.rho_hat)
        f_sq = fidelity_sq(rho_test, tomo.rho_hat)
    q = q_bound(min(s_obs, 2.0), 1 / math.sqrt(2))
    return ExperimentRun(family, noise, n, seed, steer, tomo_counts, stats, s_obs, report, tomo, f_root, f_sq, q, rho_noisy)


def target_lambda_max(family: StateFamily) -> float:
    return schmidt_coefficients(build_state(family))[0]
