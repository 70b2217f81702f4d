"""Command-line experiment runner.

Verbs:
  train    -- one (problem, architecture) run over its seeds
  sweep    -- cross product of problems x architectures into table.csv
  analyze  -- error maps, PSD curves, flatness, feature maps for a run
  psd      -- directional PSD of stored error-map files, aligned across them

Exit codes: 0 success, 2 usage error, 3 numeric failure. The output root can
also be set with the PGCAN_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .config import PRESETS, RunConfig, apply_preset, load_config
from .errors import (ConfigurationError, NonFiniteParameterError, PgcanError,
                     TrainingDivergedError)
from .evaluation import align_psd_curves, flatness_score, psd_curves
from .runner import (analyze_run, atomic_write_text, read_field_csv,
                     run_config_dir, run_sweep)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_overrides(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"override '{pair}' is not of the form key=value")
        key, value = pair.split("=", 1)
        out[key] = _parse_value(value)
    return out


def _output_dir(args_out, default_name):
    if args_out:
        return args_out
    root = os.environ.get("PGCAN_OUTPUT_ROOT", "runs")
    return str(Path(root) / default_name)


def _train_config_dict(args):
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.preset:
        data = apply_preset(data, args.preset)
    if args.problem:
        data["problem"] = args.problem
    if args.architecture:
        data["architecture"] = args.architecture
    if args.problem_param:
        data.setdefault("problem_params", {}).update(_parse_overrides(args.problem_param))
    if args.arch_param:
        data.setdefault("architecture_params", {}).update(_parse_overrides(args.arch_param))
    if args.train_param:
        data.setdefault("training", {}).update(_parse_overrides(args.train_param))
    if args.epochs is not None:
        data.setdefault("training", {})["epochs"] = args.epochs
    if args.seeds:
        data["seeds"] = [int(s) for s in args.seeds.split(",")]
    return data


def cmd_train(args):
    data = _train_config_dict(args)
    config = RunConfig.from_dict(data)
    name = f"{config.problem}_{config.architecture}"
    config.output_dir = _output_dir(args.out or data.get("output_dir"), name)
    aggregate = run_config_dir(config, force=args.force)
    print(f"run complete: {config.output_dir}")
    if aggregate["stats"]:
        stats = aggregate["stats"]
        print(f"l2rel median {stats['median']:.3e}  mean {stats['mean']:.3e}  "
              f"best {stats['best']:.3e}")
    return EXIT_OK


def cmd_sweep(args):
    with open(args.config) as fh:
        sweep = json.load(fh)
    out_root = _output_dir(args.out or sweep.get("output_dir"), "sweep")
    rows = run_sweep(sweep, out_root, force=args.force)
    print(f"sweep complete: {out_root}/table.csv ({len(rows)} cells)")
    return EXIT_OK


def cmd_analyze(args):
    resolutions = [int(n) for n in args.resolutions.split(",")] if args.resolutions else ()
    summary = analyze_run(args.run_dir, out_dir=args.out, lattice=args.lattice,
                          resolutions=resolutions)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_psd(args):
    fields = [read_field_csv(path) for path in args.fields]
    out_dir = Path(args.out) if args.out else Path(args.fields[0]).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {}
    for direction in ("x", "y"):
        curves, bins = [], None
        for field in fields:
            b, values = psd_curves(field.values)[direction]
            curves.append(values)
            bins = b
        aligned = align_psd_curves(curves)
        for path, values in zip(args.fields, aligned):
            stem = Path(path).stem
            lines = ["bin,value"]
            lines += [f"{b},{math.log10(v)!r}" for b, v in zip(bins, values)]
            atomic_write_text(out_dir / f"psd_{stem}_{direction}.csv",
                              "\n".join(lines) + "\n")
            report[f"flatness_{stem}_{direction}"] = flatness_score(values)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pgcan",
        description="physics-informed PDE benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one problem/architecture run")
    p_train.add_argument("--config", help="run config JSON file")
    p_train.add_argument("--preset", choices=sorted(PRESETS),
                         help="start from a preset profile")
    p_train.add_argument("--problem", help="problem name")
    p_train.add_argument("--architecture", help="architecture name")
    p_train.add_argument("--problem-param", action="append", metavar="K=V")
    p_train.add_argument("--arch-param", action="append", metavar="K=V")
    p_train.add_argument("--train-param", action="append", metavar="K=V")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--seeds", help="comma-separated seed list")
    p_train.add_argument("--out", help="output directory")
    p_train.add_argument("--force", action="store_true",
                         help="overwrite a non-empty output directory")
    p_train.set_defaults(fn=cmd_train)

    p_sweep = sub.add_parser("sweep", help="run a problem x architecture grid")
    p_sweep.add_argument("--config", required=True, help="sweep config JSON")
    p_sweep.add_argument("--out", help="sweep output root")
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_analyze = sub.add_parser("analyze", help="post-run error/PSD analysis")
    p_analyze.add_argument("run_dir", help="seed run directory")
    p_analyze.add_argument("--out", help="analysis output directory")
    p_analyze.add_argument("--lattice", type=int, default=256)
    p_analyze.add_argument("--resolutions",
                           help="comma-separated lattice sizes for the resolution study")
    p_analyze.set_defaults(fn=cmd_analyze)

    p_psd = sub.add_parser("psd", help="directional PSD of error-map files")
    p_psd.add_argument("fields", nargs="+", help="error-map CSV files (x,y,err)")
    p_psd.add_argument("--out", help="output directory for curve CSVs")
    p_psd.set_defaults(fn=cmd_psd)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (TrainingDivergedError, NonFiniteParameterError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PgcanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
