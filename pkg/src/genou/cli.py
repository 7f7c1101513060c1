"""Command-line interface.

Subcommands: ``simulate``, ``constants``, ``verify``, ``estimate`` and
``experiment <config>``.  Exit codes: 0 all comparisons pass, 1 a comparison
failed, 2 usage or configuration error.  The output directory can be forced
with GENOU_OUT (overridden in turn by --out).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import stats as st
from .config import ExperimentConfig, parse_config, serialize_config
from .errors import GenouError, ParseError, ValidationError
from .experiment import run_experiment
from .plots import emit_plots
from .simulate import fmt_float, read_series_csv, simulate_skeleton, write_series_csv
from ._rng import derive_rng

ENV_OUT = "GENOU_OUT"


def _out_dir(args, default: str) -> str:
    if args.out:
        return args.out
    return os.environ.get(ENV_OUT, default)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", default=None, help="output directory (overrides GENOU_OUT)")


def _read_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genou", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a stationary series to CSV")
    p.add_argument("config", help="experiment config (model + h + sizes are used)")
    _add_common(p)

    p = sub.add_parser("constants", help="Monte Carlo limit constants to CSV")
    p.add_argument("config")
    _add_common(p)

    p = sub.add_parser("verify", help="run the closed-identity checks")
    p.add_argument("config")
    _add_common(p)

    p = sub.add_parser("estimate", help="run estimators on a series CSV")
    p.add_argument("series", help="single-column CSV or a (k,V,H,I) series file")
    p.add_argument("--column", default="V", choices=["V", "H", "I"],
                   help="column to analyse for (k,V,H,I) files")
    _add_common(p)

    p = sub.add_parser("experiment", help="run a full config-driven experiment")
    p.add_argument("config")
    p.add_argument("--plots", action="store_true", help="also render SVG figures")
    p.add_argument("--echo-config", action="store_true",
                   help="print the parsed config (defaults filled) and exit")
    _add_common(p)
    return ap


def _cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    cfg.seed = args.seed if args.seed != 0 else cfg.seed
    out = _out_dir(args, cfg.output_dir)
    series = simulate_skeleton(
        cfg.model, cfg.h, max(cfg.sizes), cfg.subgrid, derive_rng(cfg.seed, "simulate")
    )
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "series.csv")
    write_series_csv(series, path)
    print(path)
    return 0


def _cmd_constants(args) -> int:
    from .constants import write_constants_csv
    from .experiment import _constants_for

    cfg = _read_config(args.config)
    cfg.seed = args.seed if args.seed != 0 else cfg.seed
    out = _out_dir(args, cfg.output_dir)
    _, consts = _constants_for(cfg, args.workers)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "constants.csv")
    write_constants_csv(consts, path)
    print(path)
    return 0


def _cmd_verify(args) -> int:
    cfg = _read_config(args.config)
    cfg.seed = args.seed if args.seed != 0 else cfg.seed
    cfg.tasks = ["verify_identities"]
    out = _out_dir(args, cfg.output_dir)
    report = run_experiment(cfg, workers=args.workers, output_dir=out)
    for row in report.rows:
        print(f"{'PASS' if row.passed else 'FAIL'} {row.target_name} "
              f"(lhs={row.empirical_value:.6g}, rhs={row.theory_value:.6g})")
    return 0 if report.all_passed else 1


def _cmd_estimate(args) -> int:
    out = _out_dir(args, "out")
    data = _load_series_column(args.series, args.column)
    est = st.hill_estimator(data[data > 0]) if (data > 0).all() else None
    rows = []
    if est is not None:
        rows.append(("hill", f"k={est.k_order}", est.alpha_hat, est.se))
    thr = float(np.quantile(data, 0.98))
    try:
        blocks = st.extremal_index_blocks(data, thr)
        rows.append(("extremal_index_blocks", f"u={thr:g},block={blocks.block_len}",
                     blocks.theta_hat, blocks.se))
        runs = st.extremal_index_runs(data, thr)
        rows.append(("extremal_index_runs", f"u={thr:g}", runs.theta_hat, runs.se))
    except GenouError:
        pass
    acv = st.sample_acv(data, max_lag=min(20, data.size // 2 - 1))
    for lag in acv.lags[1:6]:
        rows.append(("sample_acf", f"lag={lag}", float(acv.rho_hat[lag]), float("nan")))
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "estimates.csv")
    lines = ["estimator,params,value,se"]
    for name, params, value, se in rows:
        lines.append(f'{name},"{params}",{fmt_float(value)},{fmt_float(se)}')
    from .simulate import _atomic_write

    _atomic_write(path, "\n".join(lines) + "\n")
    print(path)
    return 0


def _load_series_column(path: str, column: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.readline()
    if head.startswith("#") or head.strip().startswith("k,"):
        series = read_series_csv(path)
        return {"V": series.V, "H": series.H, "I": series.I}[column]
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                vals.append(float(line.split(",")[0]))
    return np.asarray(vals)


def _cmd_experiment(args) -> int:
    cfg = _read_config(args.config)
    cfg.seed = args.seed if args.seed != 0 else cfg.seed
    if args.echo_config:
        print(serialize_config(cfg), end="")
        return 0
    out = _out_dir(args, cfg.output_dir)
    report = run_experiment(cfg, workers=args.workers, output_dir=out)
    if args.plots:
        emit_plots(report, out_dir=out)
    n_fail = sum(not r.passed for r in report.rows)
    for row in report.rows:
        print(f"{'PASS' if row.passed else 'FAIL'} [{row.task}] {row.target_name} ({row.anchor})")
    print(f"report: {os.path.join(out, 'report.csv')} ({n_fail} failing rows)")
    return 0 if report.all_passed else 1


_COMMANDS = {
    "simulate": _cmd_simulate,
    "constants": _cmd_constants,
    "verify": _cmd_verify,
    "estimate": _cmd_estimate,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return 2
    except GenouError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
