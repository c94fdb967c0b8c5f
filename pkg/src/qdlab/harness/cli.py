"""Command-line interface.

    qdlab run -c config.toml
    qdlab sweep -c config.toml --axis lambda --values 0.5,0.3,0.2
    qdlab validate
    qdlab report <run-dir> [<run-dir> ...]

Exit code 0 only if all asserted invariants/tolerances pass.  The worker
count for ensemble distribution is taken from ``QDLAB_WORKERS``.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..errors import QdlabError
from .config import SWEEP_AXES, load_config
from .runner import load_summary, run, sweep
from .validate import run_validation


def _check_tolerances(record) -> bool:
    """Kind-specific assertions from the config's [tolerances] table."""
    tol = record.config.tolerances
    ok = True
    summary = record.summary
    if "msd_exponent" in tol and summary.get("late_exponent") is not None:
        lo, hi = tol["msd_exponent"]
        ok &= lo <= summary["late_exponent"] <= hi
    if "l1_max" in tol and summary.get("l1_binned") is not None:
        ok &= summary["l1_binned"] <= tol["l1_max"]
    if "variance_ratio" in tol and summary.get("ratio_L64") is not None:
        lo, hi = tol["variance_ratio"]
        ok &= lo <= summary["ratio_L64"] <= hi
    return bool(ok)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.replace(out=args.out)
    record = run(cfg)
    print(json.dumps({"summary": record.summary, **record.metadata()}, indent=2, sort_keys=True))
    return 0 if _check_tolerances(record) else 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.replace(out=args.out)
    values = []
    for tok in args.values.split(","):
        tok = tok.strip()
        if not tok:
            continue
        values.append(int(tok) if args.axis == "L" else float(tok))
    records, summary = sweep(cfg, args.axis, values)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if all(_check_tolerances(r) for r in records) else 1


def cmd_validate(_args) -> int:
    return 0 if run_validation(verbose=True) else 1


def cmd_report(args) -> int:
    rows = []
    for run_dir in args.dirs:
        try:
            data = load_summary(run_dir)
        except FileNotFoundError:
            print(f"{run_dir}: no summary.json", file=sys.stderr)
            return 1
        rows.append((run_dir, data))
    for run_dir, data in rows:
        print(f"== {run_dir} [{data.get('kind')}] hash={data.get('config_hash')} "
              f"wall={data.get('wallclock_s', 0):.1f}s")
        for key, value in sorted(data.get("summary", {}).items()):
            print(f"   {key}: {value}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qdlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("--out", help="override output directory")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("-c", "--config", required=True)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="override output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the fast invariant battery")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("report", help="summarize stored run records")
    p_rep.add_argument("dirs", nargs="+")
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QdlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
