"""Command-line interface: ``dynephase <subcommand> [options]``.

Exit codes: 0 success, 1 usage, 2 invalid configuration, 3 tolerance or
trajectory-failure check failed, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, SimConfig, SweepSpec, load_config
from .harness import (
    PLOT_KINDS,
    PRESETS,
    SUMMARY_COLUMNS,
    TrajectoryFailureError,
    emit_plot_data,
    fit_introduced,
    read_rows,
    run_analyze_zeta,
    run_reproduce,
    run_simulate,
    run_sweep,
)
from .policies import parse_policy
from .sde import step_rule_dv
from .squeezed import (
    DomainError,
    efficiency_crossover,
    efficiency_floor,
    heterodyne_introduced,
    intrinsic_phase_variance,
    markII_introduced,
    optimal_n0,
    optimal_zeta,
    theoretical_limit,
)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_TOLERANCE, EXIT_IO = range(5)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dv(text: str):
    if text == "paper":
        return "paper"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'paper', got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _run_options(p):
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--nbar", type=float)
    p.add_argument("--policy", help="NAME[:k=v,...], e.g. time-eps or const-eps:0.6")
    p.add_argument("--state", dest="state_kind", choices=("coherent", "optimal_squeezed"))
    p.add_argument("--trajectories", type=int, dest="n_trajectories")
    p.add_argument("--dv", type=_dv, dest="dv_feedback", help="feedback interval, or 'paper'")
    p.add_argument("--refine", type=float, help="divide the feedback interval by this factor")
    p.add_argument("--substeps", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--workers", type=int, help="worker processes (default $DYNEPHASE_WORKERS or 1)")
    p.add_argument("--trace", action="store_true", default=None,
                   help="write per-update records of trajectory 0")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynephase", description="Adaptive dyne phase-measurement simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("limits", help="closed-form variances at given photon numbers")
    p.add_argument("--nbar", type=float, nargs="+", required=True)
    p.add_argument("--eta", type=float, default=0.98, help="detector efficiency for the floor")

    p = sub.add_parser("simulate", help="run one ensemble")
    _run_options(p)

    p = sub.add_parser("sweep", help="run a configuration over a photon-number grid")
    _run_options(p)
    p.add_argument("--grid", type=float, nargs="+", required=True)
    p.add_argument("--optimize-epsilon", action="store_true")

    p = sub.add_parser("fit", help="power-law fit of introduced variance from a sweep CSV")
    p.add_argument("csv", type=Path)

    p = sub.add_parser("analyze-zeta", help="zeta scatter and excess-variance estimates")
    _run_options(p)

    p = sub.add_parser("reproduce", help="run a canned check against a pinned value")
    p.add_argument("preset", nargs="?", help="preset name (omit to list)")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("emit-plots", help="write plot data and recipes")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--input", type=Path, help="sweep CSV (or trajectories CSV for zeta-scatter)")
    p.add_argument("--nbar", type=float, nargs="+", help="photon numbers for 'contributions'")
    p.add_argument("--out", dest="out_dir", required=True)
    return parser


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    fields = ("seed", "nbar", "policy", "state_kind", "n_trajectories", "dv_feedback", "refine",
              "substeps", "out_dir", "trace")
    return cfg.with_overrides(**{f: getattr(args, f) for f in fields})


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def _limits(args) -> int:
    out = []
    for n in args.nbar:
        n0 = optimal_n0(n)
        out.append({
            "nbar": n, "optimal_n0": n0, "optimal_zeta": optimal_zeta(n),
            "intrinsic": intrinsic_phase_variance(n, n0), "theoretical_limit": theoretical_limit(n),
            "mark2_introduced": markII_introduced(n), "heterodyne_introduced": heterodyne_introduced(n),
            "efficiency_floor": efficiency_floor(args.eta, n), "step_rule_dv": step_rule_dv(n),
        })
    try:
        cross = efficiency_crossover(args.eta)
    except DomainError:
        cross = None
    _print_json({"eta": args.eta, "mark2_crossover_nbar": cross, "points": out})
    return EXIT_OK


def _simulate(args) -> int:
    cfg = _config(args)
    res = run_simulate(cfg, args.workers)
    _print_json({"stats": res.stats.to_dict(), "ratio_to_limit": res.row["ratio_to_limit"],
                 "files": {k: str(v) for k, v in res.paths.items()}})
    return EXIT_OK


def _sweep(args) -> int:
    cfg = _config(args).with_overrides(out_dir=None)
    spec = SweepSpec(cfg, tuple(args.grid), optimize_epsilon=args.optimize_epsilon)
    rows = run_sweep(spec, args.workers, args.out_dir)
    for r in rows:
        print(",".join(str(r.get(c, "")) for c in SUMMARY_COLUMNS))
    return EXIT_OK


def _fit(args) -> int:
    fit = fit_introduced(read_rows(args.csv))
    _print_json(fit.__dict__)
    return EXIT_OK


def _zeta(args) -> int:
    rep = run_analyze_zeta(_config(args), args.workers)
    _print_json(rep.to_dict())
    return EXIT_OK


def _reproduce(args) -> int:
    if not args.preset:
        for name, p in PRESETS.items():
            print(f"{name:18s} {'[slow] ' if p.slow else ''}{p.description}")
        return EXIT_OK
    report = run_reproduce(args.preset, args.workers, args.out_dir)
    print(report.line())
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def _emit(args) -> int:
    if args.kind == "contributions":
        if not args.nbar:
            raise ConfigError("contributions needs --nbar")
        files = emit_plot_data(args.nbar, args.kind, args.out_dir)
    elif args.kind == "zeta-scatter":
        if args.input is None:
            raise ConfigError("zeta-scatter needs --input trajectories.csv")
        import numpy as np

        from .squeezed import optimal_n0 as _n0
        from .stats import ZetaScatter

        pts = []
        for r in read_rows(args.input):
            n, zr, zi = (float(r.get(k) or "nan") for k in ("nbar_est", "zeta_re", "zeta_im"))
            if math.isfinite(n) and n > 0 and _n0(n) > 0:
                pts.append((n, zr, math.atan2(-zi, -zr)))
        arr = np.array(pts, dtype=float).reshape(-1, 3)
        files = emit_plot_data(ZetaScatter(arr, math.nan, math.nan), args.kind, args.out_dir)
    else:
        if args.input is None:
            raise ConfigError(f"{args.kind} needs --input sweep.csv")
        rows = read_rows(args.input)
        fit = None
        if args.kind == "variance-vs-nbar":
            try:
                fit = fit_introduced(rows)
            except (ValueError, DomainError):
                fit = None
        files = emit_plot_data(rows, args.kind, args.out_dir, fit)
    for f in files:
        print(f)
    return EXIT_OK


_COMMANDS = {"limits": _limits, "simulate": _simulate, "sweep": _sweep, "fit": _fit,
             "analyze-zeta": _zeta, "reproduce": _reproduce, "emit-plots": _emit}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return _COMMANDS[args.command](args)
    except TrajectoryFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
