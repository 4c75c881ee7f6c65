"""Batch experiment runner.

Commands:
  run <config.toml> [--output-dir DIR]
  sweep <config.toml> --axis model.g --values 0.1,0.2 [--output-dir DIR]
  scan-depth <config.toml> --depths 3,4,5 [--output-dir DIR]
  fit-bath <modes.csv> --n-exp K [--output-dir DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
diagnostics file is left in the output directory).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import SCHEMAS, ConfigError, load, set_by_path, validate

WORKERS_ENV = "MANYHEOM_WORKERS"


def _default_out(resolved, fallback):
    return resolved.get("output_dir") or fallback


def _execute(resolved, out_dir):
    """Run one resolved config; numerical failures leave diagnostics.json."""
    from .experiments import RUNNERS

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return RUNNERS[resolved["experiment"]](resolved, out)
    except ConfigError:
        raise
    except Exception as exc:  # numerical failure: record and signal exit 3
        (out / "diagnostics.json").write_text(
            json.dumps(
                {
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "traceback": traceback.format_exc(),
                },
                indent=2,
            )
        )
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def cmd_run(args):
    resolved = load(args.config)
    out = args.output_dir or _default_out(resolved, "run_output")
    return _execute(resolved, out)


def _sweep_point(payload):
    resolved, out_dir = payload
    return _execute(resolved, out_dir)


def cmd_sweep(args):
    resolved = load(args.config)
    values = [v for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("empty sweep value list")
    base_out = Path(args.output_dir or _default_out(resolved, "sweep_output"))
    base_out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for k, raw_val in enumerate(values):
        point = copy.deepcopy(resolved)
        try:
            val = float(raw_val)
        except ValueError:
            val = raw_val
        set_by_path(point, args.axis, val)
        jobs.append((point, base_out / f"point_{k:03d}"))
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    codes = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            codes = list(ex.map(_sweep_point, jobs))
    else:
        codes = [_sweep_point(j) for j in jobs]
    rows = []
    for (point, out_dir), code in zip(jobs, codes):
        rows.append(
            {
                "value": point,
                "dir": str(out_dir),
                "exit_code": code,
            }
        )
    summary = {
        "axis": args.axis,
        "values": values,
        "points": [
            {"dir": r["dir"], "exit_code": r["exit_code"]} for r in rows
        ],
    }
    (base_out / "sweep_summary.json").write_text(json.dumps(summary, indent=2))
    return 0 if all(c == 0 for c in codes) else 3


def cmd_scan_depth(args):
    resolved = load(args.config)
    depths = sorted({int(d) for d in args.depths.split(",") if d != ""})
    if len(depths) < 2:
        raise ConfigError("scan-depth needs at least two depths")
    if "numerics" not in resolved or "depth" not in resolved["numerics"]:
        raise ConfigError("experiment has no numerics.depth to scan")
    base_out = Path(args.output_dir or _default_out(resolved, "depth_scan"))
    base_out.mkdir(parents=True, exist_ok=True)
    from .experiments import read_csv

    tables = {}
    failures = {}
    for d in depths:
        point = copy.deepcopy(resolved)
        point["numerics"]["depth"] = d
        out_dir = base_out / f"depth_{d}"
        code = _execute(point, out_dir)
        if code != 0:
            failures[d] = code
            continue
        csv_path = out_dir / "timeseries.csv"
        if not csv_path.exists():
            csv_path = out_dir / "summary.csv"
        header, data = read_csv(csv_path)
        tables[d] = (header, data)
    report_rows = []
    ok_depths = sorted(tables)
    recommended = None
    tol = args.tolerance
    for lo, hi in zip(ok_depths[:-1], ok_depths[1:]):
        header, a = tables[lo]
        _, b = tables[hi]
        devs = {}
        for col in range(1, len(header)):
            devs[header[col]] = float(
                np.max(np.abs(a[:, col] - b[:, col]))
            )
        report_rows.append({"depth": lo, "next": hi, "max_dev": devs})
        if recommended is None and max(devs.values()) < tol:
            recommended = lo
    report = {
        "depths": depths,
        "failures": failures,
        "pairs": report_rows,
        "tolerance": tol,
        "recommended_depth": recommended,
    }
    (base_out / "depth_scan.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    return 0


def cmd_fit_bath(args):
    resolved = validate(
        {
            "experiment": "bath_fit",
            "model": {"mode_table": args.modes, "n_exp": args.n_exp},
        }
    )
    return _execute(resolved, args.output_dir or "bath_fit_output")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="manyheom", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)

    p_sweep = sub.add_parser("sweep", help="run a config across parameter values")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, help="dotted path, e.g. model.g")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--output-dir", default=None)

    p_scan = sub.add_parser("scan-depth", help="hierarchy-depth convergence scan")
    p_scan.add_argument("config")
    p_scan.add_argument("--depths", required=True, help="comma-separated depths")
    p_scan.add_argument("--tolerance", type=float, default=1e-4)
    p_scan.add_argument("--output-dir", default=None)

    p_fit = sub.add_parser("fit-bath", help="fit a vibrational mode table")
    p_fit.add_argument("modes")
    p_fit.add_argument("--n-exp", type=int, default=5)
    p_fit.add_argument("--output-dir", default=None)

    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "scan-depth": cmd_scan_depth,
        "fit-bath": cmd_fit_bath,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
