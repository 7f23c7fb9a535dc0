"""Experiment runner: wires plant, controller, and monitor; writes traces.

Outputs per run (``<prefix>`` from the config or the CLI):

* ``<prefix>_steps.csv``    step,t,y_d,u,y_true,y_meas,y_hat_pb,y_hat_h,e
* ``<prefix>_windows.csv``  window,spectral_radius,verdict,weight_change_norm
* ``<prefix>_summary.json`` run-level metrics

Floats are serialized with 17 significant digits so reruns with the same
seed are byte-identical.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, build_experiment_config, load_config, parse_config_text
from .controller import TrackingRecord, run_tracking
from .lifted import discretize_zoh
from .plant import Plant
from .trajectory import generate_trajectory

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_STABILITY_HALT = 3


@dataclass
class SummaryMetrics:
    rms_error_total: float
    rms_error_post_warmup: float
    peak_error: float
    max_spectral_radius: float
    alarm_window: int | None
    engaged_window: int | None
    diverged_window: int | None
    halted: bool
    weight_change_max: float
    weight_change_final: float
    n_steps: int
    n_windows: int


def summarize(rec: TrackingRecord) -> SummaryMetrics:
    err = rec.error()
    post = rec.warmup_batches * rec.batch_len
    changes = rec.weight_change
    return SummaryMetrics(
        rms_error_total=rec.rms_error(),
        rms_error_post_warmup=rec.rms_error(post),
        peak_error=float(np.abs(err).max()) if err.size else float("nan"),
        max_spectral_radius=(float(rec.window_radius.max())
                             if rec.window_radius.size else 0.0),
        alarm_window=rec.alarm_window,
        engaged_window=rec.engaged_window,
        diverged_window=rec.diverged_window,
        halted=rec.halted,
        weight_change_max=float(changes.max()) if changes.size else 0.0,
        weight_change_final=float(changes[-1]) if changes.size else 0.0,
        n_steps=rec.n_steps,
        n_windows=rec.n_windows)


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_steps_csv(path: str | Path, rec: TrackingRecord):
    with open(path, "w", newline="") as fh:
        fh.write("step,t,y_d,u,y_true,y_meas,y_hat_pb,y_hat_h,e\n")
        err = rec.error()
        for k in range(rec.n_steps):
            fh.write(",".join([
                str(k), _fmt(k * rec.ts), _fmt(rec.y_d[k]), _fmt(rec.u[k]),
                _fmt(rec.y_true[k]), _fmt(rec.y_meas[k]),
                _fmt(rec.y_hat_pb[k]), _fmt(rec.y_hat_h[k]), _fmt(err[k]),
            ]) + "\n")


def write_windows_csv(path: str | Path, rec: TrackingRecord):
    with open(path, "w", newline="") as fh:
        fh.write("window,spectral_radius,verdict,weight_change_norm\n")
        for j, verdict in enumerate(rec.window_verdict):
            fh.write(",".join([
                str(j), _fmt(rec.window_radius[j]), verdict,
                _fmt(rec.weight_change[j]),
            ]) + "\n")


def write_summary_json(path: str | Path, metrics: SummaryMetrics):
    with open(path, "w") as fh:
        json.dump(asdict(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg: ExperimentConfig,
                   output_prefix: str | None = None):
    """Run one experiment; returns (exit_code, metrics, record)."""
    prefix = output_prefix if output_prefix is not None else cfg.output_prefix
    y_d = generate_trajectory(cfg.trajectory_kind, cfg.trajectory_params,
                              cfg.ts, cfg.duration)
    nominal = discretize_zoh(cfg.plant.nominal, cfg.ts)
    plant = Plant(cfg.plant, cfg.basis.batch_len, seed=cfg.seed)
    rec = run_tracking(y_d, nominal, cfg.basis, cfg.hybrid, cfg.controller,
                       plant)
    metrics = summarize(rec)
    if prefix is not None:
        out = Path(prefix)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_steps_csv(f"{prefix}_steps.csv", rec)
        write_windows_csv(f"{prefix}_windows.csv", rec)
        write_summary_json(f"{prefix}_summary.json", metrics)
    if rec.halted:
        return EXIT_STABILITY_HALT, metrics, rec
    if rec.diverged_window is not None:
        return EXIT_RUNTIME, metrics, rec
    return EXIT_OK, metrics, rec


def _sweep_worker(args):
    path, key, value, prefix = args
    values = parse_config_text(Path(path).read_text())
    values[key] = value
    cfg = build_experiment_config(values)
    code, metrics, _ = run_experiment(cfg, output_prefix=prefix)
    return value, code, metrics


def sweep(config_path: str | Path, key: str, sweep_values: list,
          output_prefix: str | None = None, jobs: int | None = None):
    """Run one experiment per value of ``key``, in parallel processes.

    Returns a list of (value, exit_code, SummaryMetrics) in input order.
    """
    base = load_config(config_path)  # early validation of the base file
    prefix = output_prefix if output_prefix is not None else base.output_prefix
    tasks = []
    for value in sweep_values:
        tag = str(value).replace("/", "_")
        run_prefix = (f"{prefix}__{key.replace('.', '_')}_{tag}"
                      if prefix is not None else None)
        tasks.append((str(config_path), key, value, run_prefix))
    jobs = jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs <= 1:
        return [_sweep_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_worker, tasks))
