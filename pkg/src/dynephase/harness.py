"""Ensemble orchestration, sweeps, reproduction presets and output files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from ._accel import default_backend
from .config import ConfigError, SimConfig, SweepSpec
from .policies import ConstantEpsilon, Corrected, Heterodyne, MarkI, MarkII, TimeEpsilon, describe
from .sde import EnsembleRun, format_trace, outcomes_from_run, simulate_ensemble
from .squeezed import (
    efficiency_crossover,
    efficiency_floor,
    heterodyne_introduced,
    intrinsic_phase_variance,
    markII_introduced,
    optimal_n0,
    optimal_zeta,
    state_intrinsic_variance,
    theoretical_limit,
)
from .stats import (
    EnsembleStats,
    FitResult,
    ZetaScatter,
    ensemble_stats,
    excess_from_modulus,
    excess_from_phase,
    excess_from_phase_ratio,
    power_law_fit,
    zeta_scatter,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "DYNEPHASE_WORKERS"
FAILURE_THRESHOLD = 0.01

SUMMARY_COLUMNS = ("nbar", "policy", "params", "n_traj", "dv_feedback", "substeps", "holevo_var",
                   "holevo_stderr", "wrapped_var", "mean_error", "failed_count", "ratio_to_limit")
PROVENANCE_COLUMNS = ("config_hash", "seed", "version")
TRAJECTORY_COLUMNS = ("index", "true_phase", "theta_hat", "error", "status", "abs_A", "abs_B",
                      "nbar_est", "zeta_re", "zeta_im")
_STATUS_NAMES = {_kernels.OK: "ok", _kernels.BLOWUP: "blowup", _kernels.UNDEFINED_ESTIMATE: "undefined"}


class TrajectoryFailureError(RuntimeError):
    """More than FAILURE_THRESHOLD of the trajectories blew up or had no estimate."""


def version_string() -> str:
    try:
        from importlib.metadata import version

        v = version("artifact")
    except Exception:  # not installed (running from a source tree)
        v = "0.0.0"
    return f"dynephase-{v}"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# --- ensembles --------------------------------------------------------------------


def _chunks(n: int, workers: int) -> list[range]:
    lanes = _kernels.LANES
    size = max(lanes, math.ceil(n / (4 * workers) / lanes) * lanes)
    return [range(s, min(n, s + size)) for s in range(0, n, size)]


def _run_chunk(args):
    state, policy, grid, indices, seed, random_phase, checkpoints, trace, backend = args
    return simulate_ensemble(state, policy, grid, indices, seed, random_phase=random_phase,
                             checkpoints=checkpoints, trace=trace, backend=backend)


def run_ensemble(cfg: SimConfig, workers: int | None = None, *, indices=None,
                 checkpoints=(), backend: str | None = None) -> EnsembleRun:
    """Integrate the configured ensemble, split over ``workers`` processes.

    Each trajectory's noise and initial phase depend only on (seed, index), so
    the result is the same for any worker count or chunking.
    """
    workers = workers or default_workers()
    backend = backend or default_backend()
    if indices is None:
        indices = range(cfg.n_trajectories)
    indices = np.asarray(indices, dtype=np.int64)
    state, grid = cfg.state(), cfg.grid()
    random_phase = cfg.true_phase_mode == "uniform"
    spans = _chunks(len(indices), workers)
    jobs = [(state, cfg.policy, grid, indices[s.start:s.stop], cfg.seed, random_phase,
             tuple(checkpoints), cfg.trace and s.start == 0, backend) for s in spans]
    if workers == 1 or len(jobs) == 1:
        runs = [_run_chunk(j) for j in jobs]
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            runs = list(pool.map(_run_chunk, jobs))
    return EnsembleRun.concatenate(runs)


def run_stats(run: EnsembleRun) -> EnsembleStats:
    ok = run.ok
    return ensemble_stats(run.errors[ok], int((~ok).sum()))


def ratio_to_limit(cfg: SimConfig, variance: float) -> float:
    """Variance relative to twice the intrinsic variance of the input state."""
    return variance / (2.0 * state_intrinsic_variance(cfg.state()))


@dataclass
class SimulateResult:
    config: SimConfig
    stats: EnsembleStats
    run: EnsembleRun
    row: dict
    paths: dict = field(default_factory=dict)


def summary_row(cfg: SimConfig, stats: EnsembleStats, **extra) -> dict:
    grid = cfg.grid()
    row = {
        "nbar": cfg.state_nbar,
        "policy": cfg.policy.name,
        "params": describe(cfg.policy).partition(":")[2],
        "n_traj": cfg.n_trajectories,
        "dv_feedback": grid.v_end / grid.n_intervals,
        "substeps": cfg.substeps,
        "holevo_var": stats.holevo_variance,
        "holevo_stderr": stats.stderr_holevo,
        "wrapped_var": stats.wrapped_variance,
        "mean_error": stats.mean_error,
        "failed_count": stats.failed_count,
        "ratio_to_limit": ratio_to_limit(cfg, stats.holevo_variance),
    }
    row.update(extra)
    row.update({"config_hash": cfg.physics_hash(), "seed": cfg.seed, "version": version_string()})
    return row


def write_rows(path: Path, rows: list[dict], columns) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    _write_text(path, buf.getvalue())


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def trajectory_rows(run: EnsembleRun, cfg: SimConfig) -> list[dict]:
    outcomes = {o.seed_path[1]: o for o in outcomes_from_run(run, cfg.policy, cfg.seed)}
    errors = run.errors
    rows = []
    for n, idx in enumerate(run.indices):
        o = outcomes.get(int(idx))
        z = o.zeta_diag if o is not None else None
        rows.append({
            "index": int(idx),
            "true_phase": float(run.true_phase[n]),
            "theta_hat": float(run.theta_hat[n]),
            "error": float(errors[n]),
            "status": _STATUS_NAMES[int(run.status[n])],
            "abs_A": float(abs(run.A[n])),
            "abs_B": float(abs(run.B[n])),
            "nbar_est": z.nbar_est if z else math.nan,
            "zeta_re": z.zeta.real if z else math.nan,
            "zeta_im": z.zeta.imag if z else math.nan,
        })
    return rows


def run_simulate(cfg: SimConfig, workers: int | None = None) -> SimulateResult:
    """Run one ensemble; write summary JSON/CSV and per-trajectory CSV if ``out_dir`` is set.

    Raises :class:`TrajectoryFailureError` (after writing outputs) when more
    than 1% of trajectories fail.
    """
    t0 = time.perf_counter()
    run = run_ensemble(cfg, workers)
    stats = run_stats(run)
    row = summary_row(cfg, stats)
    result = SimulateResult(cfg, stats, run, row)
    log.info("%s nbar=%g N=%d: holevo %.6g +- %.2g (%.1f s)", cfg.label, cfg.state_nbar,
             cfg.n_trajectories, stats.holevo_variance, stats.stderr_holevo, time.perf_counter() - t0)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        columns = SUMMARY_COLUMNS + PROVENANCE_COLUMNS
        write_rows(out / "summary.csv", [row], columns)
        _write_json(out / "summary.json", {
            "stats": stats.to_dict(), "row": row, "config": cfg.to_dict(),
            "metadata": {"written": time.strftime("%Y-%m-%dT%H:%M:%S"),
                         "elapsed_s": round(time.perf_counter() - t0, 3)},
        })
        result.paths = {"summary_csv": out / "summary.csv", "summary_json": out / "summary.json"}
        if cfg.write_trajectories:
            write_rows(out / "trajectories.csv", trajectory_rows(run, cfg), TRAJECTORY_COLUMNS)
            result.paths["trajectories_csv"] = out / "trajectories.csv"
        if cfg.trace and run.trace is not None:
            _write_text(out / "trace.txt", format_trace(run.trace))
            result.paths["trace"] = out / "trace.txt"
    if stats.failed_count > FAILURE_THRESHOLD * cfg.n_trajectories:
        raise TrajectoryFailureError(
            f"{stats.failed_count} of {cfg.n_trajectories} trajectories failed (limit 1%)")
    return result


# --- sweeps ----------------------------------------------------------------------------


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Minimise a unimodal ``f`` on [lo, hi] to bracket width ``tol``; returns (x, f(x), evaluations)."""
    cache = {}

    def g(x):
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    while b - a > tol:
        if g(c) <= g(d):
            b, d = d, c
            c = b - _INVPHI * (b - a)
        else:
            a, c = c, d
            d = a + _INVPHI * (b - a)
    x = min(cache, key=lambda k: (cache[k], k))
    return x, cache[x], cache


def optimize_epsilon(cfg: SimConfig, spec: SweepSpec, workers: int | None = None):
    """Golden-section search over constant epsilon with common random numbers.

    Candidates share seed and trajectory indices and use ``search_fraction`` of
    the trajectories; non-finite variances count as +inf.
    """
    n_search = max(1, int(round(cfg.n_trajectories * spec.search_fraction)))
    search_cfg = cfg.with_overrides(n_trajectories=n_search, out_dir=None, trace=False)

    def variance(eps):
        c = search_cfg.with_overrides(policy=ConstantEpsilon(float(eps)))
        v = run_stats(run_ensemble(c, workers)).holevo_variance
        return v if math.isfinite(v) else math.inf

    lo, hi = spec.eps_bounds
    eps, _, evaluated = golden_section(variance, lo, hi, spec.eps_tol)
    return eps, evaluated


SWEEP_EXTRA = ("epsilon_opt", "error")


def run_sweep(spec: SweepSpec, workers: int | None = None, out_dir=None) -> list[dict]:
    """One summary row per grid point; failures are recorded in the row, not raised."""
    if spec.optimize_epsilon and not isinstance(spec.base.policy, ConstantEpsilon):
        raise ConfigError("epsilon optimisation needs a const-eps base policy")
    rows = []
    for nbar in spec.nbar_grid:
        cfg = spec.point(nbar).with_overrides(out_dir=None)
        extra = {"epsilon_opt": ""}
        try:
            if spec.optimize_epsilon:
                eps, _ = optimize_epsilon(cfg, spec, workers)
                cfg = cfg.with_overrides(policy=ConstantEpsilon(eps))
                extra["epsilon_opt"] = eps
            result = run_simulate(cfg, workers)
            rows.append(summary_row(cfg, result.stats, **extra))
        except (TrajectoryFailureError, ConfigError, ValueError) as exc:
            row = {c: "" for c in SUMMARY_COLUMNS}
            row.update(nbar=nbar, policy=cfg.policy.name, error=str(exc))
            rows.append(row)
    if out_dir is not None:
        write_rows(Path(out_dir) / "sweep.csv", rows, SUMMARY_COLUMNS + SWEEP_EXTRA + PROVENANCE_COLUMNS)
    return rows


def read_rows(path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def introduced_points(rows) -> list[tuple[float, float]]:
    """(nbar, holevo - intrinsic of the optimal state) for rows with a usable variance."""
    pts = []
    for r in rows:
        try:
            nbar, v = float(r["nbar"]), float(r["holevo_var"])
        except (KeyError, TypeError, ValueError):
            continue
        if math.isfinite(v):
            pts.append((nbar, v - intrinsic_phase_variance(nbar, optimal_n0(nbar))))
    return pts


def fit_introduced(rows) -> FitResult:
    return power_law_fit(introduced_points(rows))


# --- zeta analysis -----------------------------------------------------------------


@dataclass(frozen=True)
class ZetaReport:
    scatter: ZetaScatter
    nbar: float
    n0: float
    excess_modulus_ratio: float
    excess_phase: float
    excess_phase_ratio: float

    def to_dict(self) -> dict:
        s = self.scatter
        return {
            "nbar": self.nbar, "n0": self.n0, "points": int(len(s.points)), "skipped": s.skipped,
            "rms_dev_modulus": s.rms_dev_modulus, "rms_dev_phase": s.rms_dev_phase,
            "fraction_below_optimum": s.fraction_below_optimum,
            "excess_modulus_ratio": self.excess_modulus_ratio, "excess_phase": self.excess_phase,
            "excess_phase_ratio": self.excess_phase_ratio,
        }


def zeta_report(run: EnsembleRun, cfg: SimConfig) -> ZetaReport:
    scatter = zeta_scatter(outcomes_from_run(run, cfg.policy, cfg.seed))
    nbar = cfg.state_nbar
    n0 = optimal_n0(nbar)
    if not math.isfinite(scatter.rms_dev_modulus):
        return ZetaReport(scatter, nbar, n0, math.nan, math.nan, math.nan)
    return ZetaReport(scatter, nbar, n0, excess_from_modulus(scatter.rms_dev_modulus, n0),
                      excess_from_phase(scatter.rms_dev_phase, n0),
                      excess_from_phase_ratio(scatter.rms_dev_phase, n0, nbar))


def run_analyze_zeta(cfg: SimConfig, workers: int | None = None) -> ZetaReport:
    run = run_ensemble(cfg, workers)
    report = zeta_report(run, cfg)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        emit_plot_data(report.scatter, "zeta-scatter", out)
        if cfg.write_trajectories:
            write_rows(out / "trajectories.csv", trajectory_rows(run, cfg), TRAJECTORY_COLUMNS)
        _write_json(out / "zeta_summary.json", {**report.to_dict(), "config": cfg.to_dict()})
    return report


# --- plot data ----------------------------------------------------------------------

PLOT_KINDS = ("variance-vs-nbar", "ratio", "zeta-scatter", "contributions")


def _dat(path: Path, header, rows) -> None:
    lines = ["# " + " ".join(header)]
    lines += [" ".join(f"{float(x):.10e}" for x in r) for r in rows]
    _write_text(path, "\n".join(lines) + "\n")


def _reference(nbar: float) -> dict:
    intr = intrinsic_phase_variance(nbar, optimal_n0(nbar))
    return {
        "heterodyne": heterodyne_introduced(nbar) + 0.25 / nbar,
        "mark2": markII_introduced(nbar) + intr,
        "limit": theoretical_limit(nbar) + intr,
        "intrinsic": intr,
    }


def emit_plot_data(results, kind: str, out_dir, fit: FitResult | None = None) -> list[Path]:
    """Write ``<kind>.dat`` (whitespace columns, header comment) and ``<kind>.recipe.txt``.

    ``results`` is a list of sweep rows for the nbar-indexed kinds, a
    :class:`ZetaScatter` for ``zeta-scatter`` and a list of photon numbers for
    ``contributions``.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    out = Path(out_dir)
    dat, recipe = out / f"{kind}.dat", out / f"{kind}.recipe.txt"
    if kind == "zeta-scatter":
        if not isinstance(results, ZetaScatter) or len(results.points) == 0:
            raise ConfigError("zeta-scatter needs a non-empty ZetaScatter")
        pts = results.points
        _dat(dat, ("nbar_est", "zeta_re", "zeta_arg_dev"), pts)
        lo, hi = pts[:, 0].min(), pts[:, 0].max()
        grid = np.geomspace(lo, hi, 60) if hi > lo else np.array([lo])
        _dat(out / "zeta-optimum.dat", ("nbar", "zeta_opt"), [(n, optimal_zeta(n)) for n in grid])
        text = ("x: nbar_est (log scale); y: zeta_re (linear)\n"
                "points: zeta-scatter.dat columns 1:2\n"
                "line: zeta-optimum.dat columns 1:2, optimal-state zeta versus nbar\n")
        _write_text(recipe, text)
        return [dat, out / "zeta-optimum.dat", recipe]
    if kind == "contributions":
        nbars = [float(n) for n in results]
        if not nbars:
            raise ConfigError("contributions needs at least one photon number")
        rows = []
        for n in nbars:
            rows.append((n, intrinsic_phase_variance(n, optimal_n0(n)), theoretical_limit(n),
                         markII_introduced(n), heterodyne_introduced(n), efficiency_floor(0.98, n)))
        _dat(dat, ("nbar", "intrinsic", "limit_introduced", "mark2_introduced",
                   "heterodyne_introduced", "floor_eta0.98"), rows)
        _write_text(recipe, "x: nbar (log); y: variance (log); one line per column 2-6\n")
        return [dat, recipe]
    rows = [r for r in results if str(r.get("holevo_var", "")) not in ("", "nan")]
    if not rows:
        raise ConfigError(f"{kind} needs at least one sweep row with a variance")
    table = []
    for r in rows:
        n, v = float(r["nbar"]), float(r["holevo_var"])
        se = float(r.get("holevo_stderr") or "nan")
        ref = _reference(n)
        if kind == "ratio":
            table.append((n, float(r["ratio_to_limit"]), se / (2.0 * ref["intrinsic"])))
        else:
            f = fit.prefactor * n ** -fit.exponent + ref["intrinsic"] if fit else math.nan
            table.append((n, v, se, ref["heterodyne"], ref["mark2"], f, ref["limit"]))
    if kind == "ratio":
        _dat(dat, ("nbar", "ratio_to_limit", "stderr"), table)
        _write_text(recipe, "x: nbar (log); y: ratio to theoretical minimum (linear), error bars col 3; "
                            "reference line y = 1\n")
    else:
        _dat(dat, ("nbar", "variance", "stderr", "heterodyne", "mark2", "fit", "limit"), table)
        _write_text(recipe, "x: nbar (log); y: phase variance (log)\n"
                            "points with error bars: columns 1:2:3\n"
                            "lines top to bottom: heterodyne (4), mark II (5), fitted power law plus "
                            "intrinsic (6), theoretical limit (7)\n")
    return [dat, recipe]


# --- reproduction presets ----------------------------------------------------------


@dataclass
class Report:
    name: str
    measured: float
    target: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: measured {self.measured:.6g}, target {self.target}"

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "target": self.target,
                "passed": self.passed, "details": self.details}


def _variance_check(name, cfg, target, rel_tol, workers, out_dir):
    res = run_simulate(cfg.with_overrides(out_dir=str(out_dir) if out_dir else None), workers)
    v = res.stats.holevo_variance
    ok = abs(v - target) <= rel_tol * target
    return Report(name, v, f"{target:.4g} ± {rel_tol:.0%}", ok,
                  {"stderr": res.stats.stderr_holevo, "wrapped": res.stats.wrapped_variance,
                   "failed": res.stats.failed_count, "row": res.row})


def _mark2_check(nbar, workers, out_dir, n=50_000):
    cfg = SimConfig(nbar=nbar, policy=MarkII(), n_trajectories=n, seed=20000 + int(nbar),
                    write_trajectories=False, out_dir=str(out_dir) if out_dir else None)
    res = run_simulate(cfg, workers)
    target = markII_introduced(nbar) + intrinsic_phase_variance(nbar, optimal_n0(nbar))
    v, se = res.stats.holevo_variance, res.stats.stderr_holevo
    tol = max(3.0 * se, 0.10 * target)
    return Report(f"mark2-n{nbar:g}", v, f"{target:.4g} ± max(3 se, 10%)", abs(v - target) <= tol,
                  {"stderr": se, "relative_error": v / target - 1.0})


def _identity_check(policy, workers, n=10_000):
    cfg = SimConfig(nbar=100, policy=policy, dv_feedback=1e-4, n_trajectories=n, seed=33)
    vs = (0.25, 0.5, 1.0)
    run = run_ensemble(cfg, workers, checkpoints=vs)
    details, ok = {}, True
    for col, v in enumerate(vs):
        a2 = run.snaps[run.ok, col]
        mean, se = float(np.mean(a2)), float(np.std(a2, ddof=1) / math.sqrt(a2.size))
        passed = abs(mean - v) <= 3 * se
        details[f"v={v:g}"] = {"mean_abs_A2": mean, "stderr": se, "passed": passed}
        ok &= passed
    worst = max(abs(d["mean_abs_A2"] - v) / d["stderr"] for v, d in zip(vs, details.values()))
    return Report(f"identity-{policy.name}", worst, "|<|A_v|^2> - v| <= 3 se at v = 0.25, 0.5, 1", ok,
                  details)


EXPONENT_GRID = (1e2, 10**2.5, 1e3, 10**3.5, 1e4)


def _scaling_check(workers, out_dir, n=8000):
    base = SimConfig(policy=ConstantEpsilon(0.6), n_trajectories=n, seed=606, write_trajectories=False)
    rows = run_sweep(SweepSpec(base, EXPONENT_GRID, optimize_epsilon=True), workers, out_dir)
    fit = fit_introduced(rows)
    ok = 1.55 <= fit.exponent <= 1.80
    if out_dir:
        emit_plot_data(rows, "variance-vs-nbar", out_dir, fit)
    return Report("const-eps-scaling", fit.exponent, "exponent in [1.55, 1.80]", ok,
                  {"fit": fit.__dict__, "rows": rows})


def _ratio_check(workers, out_dir, n=2000):
    base = SimConfig(policy=TimeEpsilon(), n_trajectories=n, seed=707, write_trajectories=False)
    rows = run_sweep(SweepSpec(base, EXPONENT_GRID), workers, out_dir)
    ratios = [float(r["ratio_to_limit"]) if r.get("ratio_to_limit") != "" else math.inf for r in rows]
    if out_dir:
        emit_plot_data(rows, "ratio", out_dir)
    return Report("time-eps-ratio", max(ratios), "ratio_to_limit <= 1.15 at every grid point",
                  max(ratios) <= 1.15, {"ratios": dict(zip(EXPONENT_GRID, ratios))})


def _zeta_bias_check(workers, out_dir, n=2000):
    cfg = SimConfig(nbar=1e4, policy=TimeEpsilon(), n_trajectories=n, seed=808,
                    out_dir=str(out_dir) if out_dir else None)
    rep = run_analyze_zeta(cfg, workers)
    frac = rep.scatter.fraction_below_optimum
    return Report("zeta-bias-n1e4", frac, "fraction of zeta_R below optimum > 0.5", frac > 0.5,
                  rep.to_dict())


def _corrected_check(workers, out_dir, n=2000):
    cfg = SimConfig(nbar=1e4, policy=Corrected(lam=1e-3), n_trajectories=n, seed=909,
                    out_dir=str(out_dir) if out_dir else None)
    rep = run_analyze_zeta(cfg, workers)
    worst = max(rep.excess_modulus_ratio, rep.excess_phase_ratio)
    return Report("corrected-n1e4", worst, "both excess ratios < 0.05", worst < 0.05, rep.to_dict())


def _crossover_check(workers, out_dir):
    n = efficiency_crossover(0.98)
    return Report("crossover-eta98", n, "in [400, 1500]", 400 <= n <= 1500, {"eta": 0.98})


def n1577_config(refine: float = 1.0, n: int = 20_000) -> SimConfig:
    return SimConfig(nbar=1577, policy=TimeEpsilon(), dv_feedback="paper", refine=refine,
                     n_trajectories=n, seed=1577)


@dataclass(frozen=True)
class Preset:
    description: str
    run: Callable
    slow: bool = False


PRESETS: dict[str, Preset] = {
    "n1577": Preset("time-eps at nbar 1577, default step-rule interval, N 2e4 -> 1.54e-6 ± 10%",
                    lambda w, o: _variance_check("n1577", n1577_config(), 1.54e-6, 0.10, w, o)),
    "n1577-fine100": Preset("as n1577 with interval / 100, N 5e3 -> 1.93e-6 ± 12%",
                            lambda w, o: _variance_check("n1577-fine100", n1577_config(100, 5000),
                                                         1.93e-6, 0.12, w, o), slow=True),
    "n1577-fine1000": Preset("as n1577 with interval / 1000, N 2e3 -> 2.13e-6 ± 15%",
                             lambda w, o: _variance_check("n1577-fine1000", n1577_config(1000, 2000),
                                                          2.13e-6, 0.15, w, o), slow=True),
    "mark2-n100": Preset("mark II at nbar 100 vs closed form", lambda w, o: _mark2_check(100, w, o)),
    "mark2-n400": Preset("mark II at nbar 400 vs closed form", lambda w, o: _mark2_check(400, w, o)),
    "mark2-n1600": Preset("mark II at nbar 1600 vs closed form", lambda w, o: _mark2_check(1600, w, o)),
    "heterodyne-n100": Preset(
        "heterodyne on a coherent state, nbar 100 -> 1/200 ± 10%",
        lambda w, o: _variance_check(
            "heterodyne-n100", SimConfig(nbar=100, state_kind="coherent", policy=Heterodyne(),
                                         n_trajectories=50_000, seed=100, write_trajectories=False),
            0.005, 0.10, w, o)),
    "identity-mark1": Preset("<|A_v|^2> = v for mark I", lambda w, o: _identity_check(MarkI(), w)),
    "identity-mark2": Preset("<|A_v|^2> = v for mark II", lambda w, o: _identity_check(MarkII(), w)),
    "const-eps-scaling": Preset("optimised constant-eps sweep, fitted exponent in [1.55, 1.80]",
                                _scaling_check, slow=True),
    "time-eps-ratio": Preset("time-eps ratio to limit <= 1.15 over nbar 1e2..1e4", _ratio_check),
    "zeta-bias-n1e4": Preset("time-eps zeta scatter mostly below the optimum line", _zeta_bias_check),
    "corrected-n1e4": Preset("corrected policy excess ratios < 0.05", _corrected_check),
    "crossover-eta98": Preset("mark II vs 98% efficiency floor crossover in [400, 1500]",
                              _crossover_check),
}


def run_reproduce(name: str, workers: int | None = None, out_dir=None) -> Report:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    sub = Path(out_dir) / name if out_dir is not None else None
    report = PRESETS[name].run(workers, sub)
    if sub is not None:
        _write_json(sub / "report.json", report.to_dict())
    return report
