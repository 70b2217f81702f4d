"""Run orchestration and artifact output for the command-line tools.

A run directory holds one seed per ``seed_<k>`` subdirectory, each with a
canonical config.json, metrics.csv (one row per evaluation), checkpoints at
the evaluation cadence, and a final summary.json; the top level aggregates
across-seed statistics. Every artifact is regenerable from config.json and
the seed alone. File writes go through a temp-file rename so interrupted
runs never leave half-written artifacts.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import statistics
import time
from pathlib import Path

import numpy as np
import torch

from .architectures import build_model
from .base import DTYPES
from .config import RunConfig, canonical_json, config_hash
from .errors import ConfigurationError
from .evaluation import (align_psd_curves, error_map, export_feature_maps,
                         flatness_score, psd_curves, resolution_study,
                         slice_error_map)
from .problems import build_problem
from .training import (init_state, load_checkpoint, restore_state,
                       save_checkpoint, train)

METRIC_COLUMNS = ("epoch", "loss_pde", "loss_bc", "loss_ic",
                  "lambda_bc", "lambda_ic", "lr", "l2rel")
LDC_EXTRA_COLUMNS = ("l2rel_u", "l2rel_v", "l2rel_p")

TORUS_SECTIONS = (-1.2, -0.6, 0.0, 0.6, 1.2)


def atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _format(value):
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def metric_columns(problem):
    cols = list(METRIC_COLUMNS)
    if problem.n_outputs == 3:
        cols += list(LDC_EXTRA_COLUMNS)
    return cols


def _metrics_row(columns, row):
    return ",".join(_format(row.get(c)) for c in columns)


def build_run(run_config, seed):
    """Problem and freshly initialized model for one seed."""
    problem = build_problem(run_config.problem, **run_config.problem_params)
    torch.manual_seed(seed)
    model = build_model(run_config.architecture, problem.bounds,
                        n_outputs=problem.n_outputs,
                        dtype=DTYPES[run_config.training.precision],
                        **run_config.architecture_params)
    return problem, model


def run_single(run_config, seed, out_dir, force=False):
    """One training run; returns the summary dict it wrote."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise ConfigurationError(
            f"output directory {out_dir} is not empty (use force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)

    config = RunConfig.from_dict({**run_config.to_dict(), "seeds": [seed],
                                  "output_dir": str(out_dir)})
    atomic_write_text(out_dir / "config.json", canonical_json(config) + "\n")

    problem, model = build_run(run_config, seed)
    training = run_config.training.resolved(problem, run_config.architecture)
    training.seed = seed
    columns = metric_columns(problem)
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w") as fh:
        fh.write(",".join(columns) + "\n")

    run_dict = config.to_dict()

    def on_eval(state, row):
        with open(metrics_path, "a") as fh:
            fh.write(_metrics_row(columns, row) + "\n")
        save_checkpoint(out_dir / f"checkpoint_{state.epoch:07d}.pt",
                        model, state, run_dict)

    started = time.time()
    state = init_state(model, training)
    if training.epochs == 0:
        save_checkpoint(out_dir / "checkpoint_0000000.pt", model, state, run_dict)
    state = train(model, problem, training, state=state, on_eval=on_eval)
    save_checkpoint(out_dir / "checkpoint_final.pt", model, state, run_dict)

    summary = {
        "config_hash": config_hash(config),
        "seed": seed,
        "epochs": training.epochs,
        "wall_clock_seconds": time.time() - started,
        "final": state.log[-1] if state.log else None,
        "history": state.log,
    }
    atomic_write_text(out_dir / "summary.json", json.dumps(summary, indent=1) + "\n")
    return summary


def aggregate_summaries(summaries, run_config):
    """Across-seed statistics of the final headline metric."""
    finals = [s["final"]["l2rel"] for s in summaries
              if s["final"] and "l2rel" in (s["final"] or {})]
    stats = {}
    if finals:
        stats = {
            "mean": statistics.fmean(finals),
            "std": statistics.stdev(finals) if len(finals) > 1 else 0.0,
            "median": statistics.median(finals),
            "best": min(finals),
        }
    return {
        "config_hash": config_hash(run_config),
        "seeds": [s["seed"] for s in summaries],
        "final_l2rel": finals,
        "stats": stats,
        "wall_clock_seconds": sum(s["wall_clock_seconds"] for s in summaries),
    }


def run_config_dir(run_config, force=False):
    """Trains every seed of a run config; returns the aggregate summary."""
    out_dir = Path(run_config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for seed in run_config.seeds:
        seed_dir = out_dir / f"seed_{seed:03d}"
        summary_path = seed_dir / "summary.json"
        if summary_path.exists() and not force:
            summaries.append(json.loads(summary_path.read_text()))
            continue
        summaries.append(run_single(run_config, seed, seed_dir, force=force))
    aggregate = aggregate_summaries(summaries, run_config)
    atomic_write_text(out_dir / "summary.json", json.dumps(aggregate, indent=1) + "\n")
    return aggregate


def _param_tag(params):
    return ",".join(f"{k}={v}" for k, v in sorted(params.items()))


def _cell_dirname(problem, params, architecture):
    tag = _param_tag(params).replace("=", "-").replace(",", "_")
    stem = f"{problem}_{tag}" if tag else problem
    return f"{stem}__{architecture}"


def run_sweep(sweep, out_root, force=False):
    """Cross product of problems x architectures, aggregated into table.csv.

    ``sweep`` is a dict with ``problems`` (list of {name, params}),
    ``architectures``, ``training``, and ``seeds``. Cells with an existing
    summary.json are skipped, so an interrupted sweep resumes cheaply.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    for prob, arch in itertools.product(sweep["problems"], sweep["architectures"]):
        cell_dir = out_root / _cell_dirname(prob["name"], prob.get("params", {}), arch)
        config = RunConfig.from_dict({
            "problem": prob["name"],
            "problem_params": prob.get("params", {}),
            "architecture": arch,
            "training": dict(sweep.get("training", {})),
            "seeds": list(sweep.get("seeds", [0])),
            "output_dir": str(cell_dir),
        })
        summary_path = cell_dir / "summary.json"
        if summary_path.exists() and not force:
            aggregate = json.loads(summary_path.read_text())
        else:
            aggregate = run_config_dir(config, force=force)
        stats = aggregate.get("stats") or {}
        rows.append({
            "problem": prob["name"],
            "parameter": _param_tag(prob.get("params", {})),
            "architecture": arch,
            "mean": stats.get("mean"),
            "std": stats.get("std"),
            "median": stats.get("median"),
            "best": stats.get("best"),
        })
    header = ["problem", "parameter", "architecture", "mean", "std", "median", "best"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format(row[c]) for c in header))
    atomic_write_text(out_root / "table.csv", "\n".join(lines) + "\n")
    return rows


def load_run(run_dir):
    """Rebuilds (problem, model, state, run config) from a finished run."""
    run_dir = Path(run_dir)
    ckpt_path = run_dir / "checkpoint_final.pt"
    if not ckpt_path.exists():
        candidates = sorted(run_dir.glob("checkpoint_*.pt"))
        if not candidates:
            raise ConfigurationError(f"no checkpoint found in {run_dir}")
        ckpt_path = candidates[-1]
    payload = load_checkpoint(ckpt_path)
    config = RunConfig.from_dict(payload["run_config"])
    problem, model = build_run(config, config.seeds[0])
    training = config.training.resolved(problem, config.architecture)
    state = restore_state(payload, model, training)
    return problem, model, state, config


def write_field_csv(path, field):
    """Error map as x,y,err rows over the full lattice."""
    lines = ["x,y,err"]
    for i, x in enumerate(field.xs):
        for j, y in enumerate(field.ys):
            lines.append(f"{x!r},{y!r},{field.values[i, j]!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_field_csv(path):
    """Inverse of write_field_csv; requires a complete lattice."""
    from .evaluation import ErrorField
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "y"]:
            raise ConfigurationError(f"{path}: expected x,y,err header")
        data = np.asarray([[float(v) for v in row] for row in reader if row])
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    if len(data) != len(xs) * len(ys):
        raise ConfigurationError(f"{path}: incomplete lattice")
    order = np.lexsort((data[:, 1], data[:, 0]))
    values = data[order, 2].reshape(len(xs), len(ys))
    return ErrorField(xs, ys, values)


def write_psd_csv(path, bins, values):
    """Directional PSD curve in log10 power units."""
    lines = ["bin,value"]
    for b, v in zip(bins, values):
        lines.append(f"{b},{math.log10(v)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def analyze_field(field, stem, out_dir, summary):
    """PSD curves and flatness for one error field; flags all-zero fields."""
    if not np.any(field.values):
        summary[f"{stem}_raw_zero"] = True
        return
    curves = psd_curves(field.values)
    for direction, (bins, values) in curves.items():
        write_psd_csv(out_dir / f"psd_{stem}_{direction}.csv", bins, values)
        summary[f"flatness_{stem}_{direction}"] = flatness_score(values)


def analyze_run(run_dir, out_dir=None, lattice=256, resolutions=()):
    """Error maps, PSD curves, flatness scores, feature maps, and an
    optional resolution study for a finished run."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)
    problem, model, state, config = load_run(run_dir)
    reference = problem.reference()
    summary = {"run": str(run_dir), "config_hash": config_hash(config),
               "lattice": lattice}

    if reference is None:
        summary["no_reference"] = True
    elif problem.dims == 2:
        if problem.n_outputs == 1:
            field = error_map(model, reference, problem.bounds, n=lattice)
            write_field_csv(out_dir / "error_map.csv", field)
            analyze_field(field, "err", out_dir, summary)
        else:
            mag = error_map(model, reference, problem.bounds, n=lattice, magnitude=True)
            write_field_csv(out_dir / "error_map_magnitude.csv", mag)
            analyze_field(mag, "magnitude", out_dir, summary)
            for k, name in enumerate(problem.output_names):
                field = error_map(model, reference, problem.bounds, n=lattice, channel=k)
                write_field_csv(out_dir / f"error_map_{name}.csv", field)
                analyze_field(field, name, out_dir, summary)
        if resolutions:
            refs = [(n, reference, problem.bounds) for n in resolutions]
            study = resolution_study(model, refs)
            lines = ["n,l2rel"] + [f"{n},{v!r}" for n, v in study]
            atomic_write_text(out_dir / "resolution.csv", "\n".join(lines) + "\n")
            summary["resolution_study"] = {str(n): v for n, v in study}
    else:
        # 3D domain: signed-error cross sections, masked to the solid
        for y_value in TORUS_SECTIONS:
            bounds_2d = (problem.bounds[0], problem.bounds[2])
            field = slice_error_map(
                model, reference, bounds_2d, held_axis=1, held_value=y_value,
                n=lattice, mask=problem.contains)
            tag = f"{y_value:+.1f}".replace("+", "p").replace("-", "m").replace(".", "_")
            write_field_csv(out_dir / f"error_slice_y{tag}.csv", field)

    if hasattr(model, "encode") and problem.dims == 2:
        first, second = export_feature_maps(model, n=lattice)
        write_field_csv(out_dir / "features_first_half.csv", first)
        write_field_csv(out_dir / "features_second_half.csv", second)

    atomic_write_text(out_dir / "analysis_summary.json",
                      json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary
