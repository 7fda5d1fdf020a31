"""Command-line front end emitting CSV/JSON data for external plotting.

Exit codes: 0 success, 2 configuration or I/O error, 3 refusal to certify
(statistics not steerable), 4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import labsim, robustness, steering
from .measurements import observable_from_angle, phase_adapted_observables, theta_max
from .states import CANONICAL_FAMILIES, Family, StateFamily, build_state, concurrence, densify

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_INVARIANT = 0, 2, 3, 4
SCHEMA_VERSION = steering.SCHEMA_VERSION


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    families: list[str] = field(default_factory=lambda: [f.value for f in CANONICAL_FAMILIES])
    a_values: list[float] = field(default_factory=lambda: [1 / math.sqrt(2), 0.8])
    deltas: list[float] = field(default_factory=lambda: [k * math.pi / 4 for k in range(8)])
    thetas: list[float] = field(default_factory=list)
    visibilities: list[float] = field(default_factory=lambda: [1.0, 0.99, 0.97, 0.95])
    angle_jitter_sigma: float = 0.0
    n: int = labsim.DEFAULT_N
    seed: int = 0
    reps: int = 20
    theta_resolution: int = 721
    grid_points: int = 1000
    extractability_restarts: int = 2
    nosignal_threshold: float = labsim.NOSIGNAL_THRESHOLD
    fidelity: str = "root"
    family_known: bool = True
    stats_file: str | None = None
    counts_file: str | None = None
    out: str = "out"


def _line_of(text: str, key: str) -> int | None:
    for no, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return no
    return None


def _fail(source: str, text: str, key: str, msg: str):
    line = _line_of(text, key)
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: field '{key}' {msg}")


def validate_config(cfg: RunConfig, source: str = "<config>", text: str = "") -> RunConfig:
    for name in cfg.families:
        try:
            Family(name)
        except ValueError:
            _fail(source, text, "families", f"has unknown family {name!r}")
    for a in cfg.a_values:
        if not (isinstance(a, (int, float)) and 0 < a < 1):
            _fail(source, text, "a_values", f"entry {a!r} is not in (0, 1)")
    for v in cfg.visibilities:
        if not (isinstance(v, (int, float)) and 0 <= v <= 1):
            _fail(source, text, "visibilities", f"entry {v!r} is not in [0, 1]")
    for key in ("n", "reps", "theta_resolution", "grid_points", "extractability_restarts"):
        val = getattr(cfg, key)
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            _fail(source, text, key, f"must be a positive integer, got {val!r}")
    if cfg.reps < 2:
        _fail(source, text, "reps", "must be at least 2")
    if cfg.theta_resolution < 2:
        _fail(source, text, "theta_resolution", "must be at least 2")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        _fail(source, text, "seed", f"must be a non-negative integer, got {cfg.seed!r}")
    if cfg.angle_jitter_sigma < 0:
        _fail(source, text, "angle_jitter_sigma", "must be non-negative")
    if cfg.fidelity not in ("root", "squared"):
        _fail(source, text, "fidelity", "must be 'root' or 'squared'")
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return validate_config(RunConfig())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in doc:
        if key not in known and key != "schema_version":
            _fail(path, text, key, "is not a recognized setting")
    doc.pop("schema_version", None)
    return validate_config(RunConfig(**doc), path, text)


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    for flag in ("seed", "n", "reps", "fidelity", "out"):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, flag, val)
    for flag in ("stats", "counts"):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, f"{flag}_file", val)
    return validate_config(cfg, "<flags>")


def _threads() -> int | None:
    raw = os.environ.get("STEERCERT_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"STEERCERT_THREADS={raw!r} is not an integer") from None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return x


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _families(cfg: RunConfig) -> list[Family]:
    return [Family(f) for f in cfg.families]


def _canonical_theta(fam: Family, a: float) -> float:
    return fam.sign * theta_max(a)


def cmd_scan_fgsi(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    workers = _threads()
    rows = []

    def pipeline(counts):
        try:
            return steering.fgsi_value(labsim.estimate_statistics(counts))
        except ZeroDivisionError:
            return float("nan")

    def add_row(sf: StateFamily, theta: float, alice):
        rho = densify(build_state(sf))
        full = labsim.steering_pairs(sf, alice)
        pairs = {k: full[k] for k in ((0, 0), (1, 1))}
        b = (full[(0, 0)][1], full[(1, 1)][1])
        try:
            s_exact = steering.fgsi_value(steering.exact_statistics(rho, alice, b, tuple(pairs)))
        except ZeroDivisionError:
            rows.append([sf.tag.value, sf.a, sf.delta, theta, None, None, None])
            return
        mean, std = labsim.monte_carlo_error(pipeline, rho, pairs, cfg.n, cfg.reps, cfg.seed, workers)
        rows.append([sf.tag.value, sf.a, sf.delta, theta, s_exact, mean, std])

    for fam in _families(cfg):
        for a in cfg.a_values:
            if fam is Family.PHI_DELTA:
                th = theta_max(a)
                for delta in cfg.deltas:
                    sf = StateFamily(fam, a, delta)
                    add_row(sf, th, phase_adapted_observables(th, sf.delta))
                continue
            sf = StateFamily(fam, a)
            a0 = labsim.steering_pairs(sf)[(0, 0)][0]
            for th in [_canonical_theta(fam, a)] + list(cfg.thetas):
                add_row(sf, th, (a0, observable_from_angle(th)))
    _write_csv(out / "scan_fgsi.csv", ["family", "a", "delta", "theta", "S_exact", "S_sampled_mean", "S_sampled_std"], rows)
    return EXIT_OK


def _p00(report_stats: steering.SteeringStatistics) -> float:
    return float(report_stats.table(0, 0)[0, 0])


def _runs(cfg: RunConfig):
    """Yield one simulated experiment per (family, a, visibility) with its own seed."""
    for fi, fam in enumerate(_families(cfg)):
        for ai, a in enumerate(cfg.a_values):
            for vi, v in enumerate(cfg.visibilities):
                yield fam, a, v, labsim.run_experiment(
                    StateFamily(fam, a), labsim.NoiseModel(v, cfg.angle_jitter_sigma), cfg.n,
                    labsim.derive_seed(cfg.seed, fi, ai, vi), cfg.family_known,
                )


def cmd_certify(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    if cfg.stats_file:
        try:
            stats = steering.SteeringStatistics.from_json(Path(cfg.stats_file).read_text())
        except OSError as exc:
            raise ConfigError(f"{cfg.stats_file}: cannot read statistics ({exc.strerror})") from exc
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{cfg.stats_file}: malformed statistics ({exc})") from exc
        fam = cfg.families[0] if cfg.family_known and len(cfg.families) == 1 else None
        try:
            report = steering.certify(stats, fam)
        except steering.NotSteerable as exc:
            _write_json(out / "certify.json", {"schema_version": SCHEMA_VERSION, "refused": str(exc)})
            print(f"refused: {exc}", file=sys.stderr)
            return EXIT_REFUSED
        _write_json(out / "certify.json", report.to_dict())
        return EXIT_OK

    rows, reports = [], []
    for fam, a, v, run in _runs(cfg):
        rep = run.report
        fid = None
        if rep is not None:
            fid = run.fidelity_root if cfg.fidelity == "root" else run.fidelity_sq
        rows.append([
            fam.value, a, v, rep.a_est if rep else None, rep.concurrence_est if rep else None,
            rep.e if rep else None, _p00(run.stats), fid,
            concurrence(run.tomo.rho_hat),
        ])
        entry = {"family": fam.value, "a_true": a, "visibility": v, "seed": run.seed, "N": cfg.n}
        entry["report"] = rep.to_dict() if rep else None
        reports.append(entry)
    _write_csv(
        out / "certify.csv",
        ["family", "a_true", "v", "a_est", "C_est", "E", "p00", "fidelity_test_vs_tomo", "C_tomo"],
        rows,
    )
    _write_json(out / "certify.json", {"schema_version": SCHEMA_VERSION, "fidelity": cfg.fidelity, "runs": reports})
    return EXIT_OK


def cmd_robustness(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    rows, runs = [], []
    for fam, a, v, run in _runs(cfg):
        ext = None
        if run.report is not None:
            target = build_state(run.report.family)
            ext = robustness.extractability_estimate(
                run.tomo.rho_hat, target, restarts=cfg.extractability_restarts, seed=run.seed
            )
        lam = labsim.target_lambda_max(run.family)
        rows.append([fam.value, a, v, run.s_observed, run.q, run.fidelity_root, run.fidelity_sq, ext,
                     lam, robustness.q_bound(min(run.s_observed, 2.0), lam)])
        runs.append({"family": fam.value, "a": a, "visibility": v, "seed": run.seed, "N": cfg.n,
                     "steerable": run.steerable})
    header = ["family", "a", "v", "S_observed", "Q", "fidelity_root", "fidelity_sq", "extractability_lb",
              "lambda_max", "Q_target"]
    _write_csv(out / "robustness.csv", header, rows)
    margins, lams = robustness.operator_grids(cfg.grid_points)
    s_best = max((r[3] for r in rows), default=steering.S_LHS)
    report = robustness.RobustnessReport(min(s_best, 2.0), 1 / math.sqrt(2), robustness.q_bound(min(s_best, 2.0), 1 / math.sqrt(2)),
                                         None, margins, lams)
    (out / "operator_margins.csv").write_text(report.margins_csv())
    doc = report.to_dict()
    doc["runs"] = runs
    doc["fidelity"] = cfg.fidelity
    _write_json(out / "robustness.json", doc)
    return EXIT_OK


def cmd_nosignal(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    rows, reports = [], []
    for fam in _families(cfg):
        for a in cfg.a_values:
            sf = StateFamily(fam, a)
            rho = densify(build_state(sf))
            seed = labsim.derive_seed(cfg.seed, len(reports))
            counts = labsim.sample_counts(rho, labsim.steering_pairs(sf), cfg.n, seed)
            rep = labsim.no_signaling_test(counts, cfg.nosignal_threshold)
            for (j, b), z in sorted(rep.z.items()):
                rows.append([fam.value, a, j, b, rep.marginals[(0, j, b)], rep.marginals[(1, j, b)], z])
            reports.append({"family": fam.value, "a": a, **rep.to_dict()})
    _write_csv(out / "nosignal.csv", ["family", "a", "B", "beta", "p_A0", "p_A1", "z"], rows)
    passed = all(r["pass"] for r in reports)
    _write_json(out / "nosignal.json", {"schema_version": SCHEMA_VERSION, "all_pass": passed, "runs": reports})
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    for fam, a, v, run in _runs(cfg):
        stem = f"counts_{fam.value}_a{a:.6f}_v{v:.4f}"
        (out / f"{stem}_steering.csv").write_text(run.steering_counts.to_csv())
        (out / f"{stem}_tomography.csv").write_text(run.tomography_counts.to_csv())
        (out / f"{stem}_stats.json").write_text(run.stats.to_json() + "\n")
    return EXIT_OK


def cmd_tomography(cfg: RunConfig) -> int:
    if not cfg.counts_file:
        raise ConfigError("tomography needs a counts file (--counts or 'counts_file')")
    try:
        counts = labsim.CountsTable.from_csv(Path(cfg.counts_file).read_text())
    except OSError as exc:
        raise ConfigError(f"{cfg.counts_file}: cannot read counts ({exc.strerror})") from exc
    except ValueError as exc:
        raise ConfigError(f"{cfg.counts_file}: {exc}") from exc
    out = _outdir(cfg)
    try:
        result = labsim.tomography(counts)
    except ValueError as exc:
        raise ConfigError(f"{cfg.counts_file}: {exc}") from exc
    (out / "tomography.json").write_text(result.to_json() + "\n")
    return EXIT_OK


# self-check ---------------------------------------------------------------

def selfcheck_results(s: float = robustness.S_COEFF, mu: float = robustness.MU_COEFF,
                      outcome_flip: bool = False) -> list[tuple[str, bool, str]]:
    """Fast invariant suite; each entry is ``(name, ok, detail)``.

    ``s``, ``mu`` and ``outcome_flip`` exist to demonstrate that the checks
    notice perturbed constants or a flipped outcome convention.
    """
    results = []

    def check(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    sl = steering.lhs_bound_bruteforce(points=np.array([[1 / math.sqrt(2), 0, 1 / math.sqrt(2)]]))
    check("lhs bound attained by e+", abs(sl - steering.S_LHS) < 1e-12, f"{sl!r}")
    psi = robustness.target_state_rotated()
    check("target state is pure", np.max(np.abs(psi @ psi - psi)) < 1e-10)

    worst_k = max(
        float(np.max(np.abs(robustness.k_operator_closed_form(v) - robustness.channel_apply(robustness.ExtractionChannel(v), psi))))
        for v in np.linspace(0, math.pi / 4, 100)
    )
    check("K closed form equals channel route", worst_k < 1e-10, f"max dev {worst_k:.2e}")
    gaps = [
        float(np.trace(robustness.k_operator(v, check=False) @ psi).real
              - s * np.trace(robustness.w_operator(v) @ psi).real - mu)
        for v in np.linspace(0, math.pi / 4, 100)
    ]
    check("operator inequality tight on target (100 pts)", max(map(abs, gaps)) < 1e-9, f"max |gap| {max(map(abs, gaps)):.3e}")
    ineq = robustness.verify_operator_inequality(100, s=s, mu=mu)
    results.append(("[finding] T(v) PSD over grid (100 pts)", ineq.ok, f"worst min eig {ineq.worst_margin:.4f} at v={ineq.worst_vartheta:.4f}"))

    bad = []
    for fam in CANONICAL_FAMILIES:
        for a in np.linspace(0.1, 0.9, 9):
            sf = StateFamily(fam, a)
            st = steering.family_statistics(sf)
            if outcome_flip:
                st = steering.SteeringStatistics({k: t[::-1, :] for k, t in st.pairs.items()})
            try:
                rep = steering.certify(st, fam)
            except (steering.NotSteerable, steering.InconsistentStatistics):
                bad.append((fam.value, a))
                continue
            if abs(rep.a_est - a) > 1e-8 or abs(rep.two_e_minus_1 - (2 * a * math.sqrt(1 - a * a)) ** 2) > 1e-9:
                bad.append((fam.value, a))
    check("round-trip certification with known family", not bad, f"failures {bad[:3]}")
    return results


def cmd_selfcheck(cfg: RunConfig | None = None) -> int:
    start = time.perf_counter()
    results = selfcheck_results()
    failed = False
    for name, ok, detail in results:
        informational = name.startswith("[finding]")
        status = "PASS" if ok else ("NOTE" if informational else "FAIL")
        failed |= not ok and not informational
        print(f"{status}  {name}  {detail}".rstrip())
    print(f"elapsed {time.perf_counter() - start:.2f}s")
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {
    "scan-fgsi": cmd_scan_fgsi,
    "certify": cmd_certify,
    "robustness": cmd_robustness,
    "nosignal": cmd_nosignal,
    "simulate": cmd_simulate,
    "tomography": cmd_tomography,
    "selfcheck": cmd_selfcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steercert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--fidelity", choices=("root", "squared"))
        p.add_argument("--n", type=int, help="coincidence counts per setting")
        p.add_argument("--reps", type=int, help="Monte Carlo repetitions")
        if name == "certify":
            p.add_argument("--stats", help="SteeringStatistics JSON to replay")
        if name == "tomography":
            p.add_argument("--counts", help="counts CSV covering the nine tomography bases")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except robustness.SelfCheckError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
