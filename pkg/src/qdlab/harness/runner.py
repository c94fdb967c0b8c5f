"""Run orchestration and persistence.

A run writes, under the configured output directory:

* ``record.jsonl`` -- one JSON object per observation row (append-only);
* ``summary.json`` -- run summary plus metadata (config hash, software
  version, RNG algorithm, wall-clock);
* ``config.resolved.json`` -- the fully-resolved configuration;
* any CSV artifacts produced by the experiment.

Observation rows are a pure function of (config, seed, build); wall-clock
and host metadata live only in the summary.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .. import __version__
from ..disorder import RNG_ALGORITHM
from ..errors import ConfigInvalid
from .config import SWEEP_AXES, ExperimentConfig
from .experiments import RUNNERS


@dataclass
class RunRecord:
    config: ExperimentConfig
    config_hash: str
    rows: list
    summary: dict
    wallclock_s: float
    software_version: str = __version__
    rng_algorithm: str = RNG_ALGORITHM
    out_dir: Path | None = None

    def metadata(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "software_version": self.software_version,
            "rng_algorithm": self.rng_algorithm,
            "wallclock_s": self.wallclock_s,
            "kind": self.config.kind,
        }


def run(config: ExperimentConfig, persist: bool = True) -> RunRecord:
    """Execute one experiment; deterministic rows given (config, build)."""
    config.validate()
    runner = RUNNERS.get(config.kind)
    if runner is None:
        raise ConfigInvalid(f"no runner for kind {config.kind!r}")
    started = time.monotonic()
    rows, summary, artifacts = runner(config)
    wall = time.monotonic() - started
    record = RunRecord(
        config=config,
        config_hash=config.config_hash(),
        rows=rows,
        summary=summary,
        wallclock_s=wall,
    )
    if persist:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "record.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        with open(out / "summary.json", "w") as fh:
            json.dump({"summary": summary, **record.metadata()}, fh, indent=2, sort_keys=True)
        with open(out / "config.resolved.json", "w") as fh:
            json.dump(config.resolved(), fh, indent=2, sort_keys=True)
        for name, text in artifacts.items():
            (out / name).write_text(text if text.endswith("\n") else text + "\n")
        record.out_dir = out
    return record


def sweep(base: ExperimentConfig, axis: str, values, persist: bool = True):
    """One run per value of the swept parameter, plus a trend summary."""
    if axis not in SWEEP_AXES:
        raise ConfigInvalid(f"sweep axis must be one of {SWEEP_AXES}")
    records = []
    for value in values:
        if axis == "lambda":
            cfg = base.replace(lam=float(value))
        elif axis == "L":
            cfg = base.replace(L=int(value))
        elif axis == "kappa":
            cfg = base.replace(kappa=float(value))
        else:  # t
            cfg = base.replace(t_grid=[float(value)])
        cfg = cfg.replace(out=str(Path(base.out) / f"{axis}={value}"))
        records.append(run(cfg, persist=persist))
    summary = summarize_sweep(axis, values, records)
    if persist and records:
        out = Path(base.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return records, summary


def _trend_metric(record: RunRecord):
    kind = record.config.kind
    if kind == "kinetic-compare":
        return "l1_binned", record.summary.get("l1_binned")
    if kind == "dos":
        return "Phi(1.0)", record.summary.get("probes", {}).get("1.0")
    if kind == "msd":
        return "late_exponent", record.summary.get("late_exponent")
    if kind == "boltzmann":
        return "growth_rate", record.summary.get("growth_rate")
    return None, None


def summarize_sweep(axis: str, values, records) -> dict:
    table = []
    metric_name = None
    for value, record in zip(values, records):
        name, metric = _trend_metric(record)
        metric_name = metric_name or name
        table.append({"value": value, "metric": metric, "hash": record.config_hash})
    metrics = [row["metric"] for row in table if row["metric"] is not None]
    decreasing = all(a > b for a, b in zip(metrics, metrics[1:])) if len(metrics) > 1 else None
    diffs = [abs(b - a) for a, b in zip(metrics, metrics[1:])] if len(metrics) > 1 else []
    shrinking = all(a > b for a, b in zip(diffs, diffs[1:])) if len(diffs) > 1 else None
    return {
        "axis": axis,
        "metric": metric_name,
        "table": table,
        "monotone_decreasing": decreasing,
        "successive_diffs": diffs,
        "diffs_shrinking": shrinking,
    }


def load_summary(path) -> dict:
    with open(Path(path) / "summary.json") as fh:
        return json.load(fh)
