#!/usr/bin/env python3
"""Run every experiment config passed on the command line, in order.

Convenience wrapper over ``absentrf experiment``: accepts any number of
config paths or directories (directories are scanned for ``*.json``),
applies optional overrides for worker count and output root, and keeps
going after a failed config, reporting a summary at the end.

Typical use, after ``scripts/fetch_datasets.py`` and/or
``scripts/make_synthetic.py``:

    python3 scripts/run_all_experiments.py configs/
    python3 scripts/run_all_experiments.py configs/demo_bridge.json --workers 4
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from absentrf.experiment import load_experiment_config, run_experiment


def headline(summary_rows: list[tuple]) -> list[str]:
    """Mean metric per heuristic, plus the pooled absence median."""
    lines = []
    for kind, heuristic, metric, stat, value in summary_rows:
        if kind == "metric" and stat == "mean":
            lines.append(f"{heuristic:<9} mean {metric} = {value:.6g}")
        elif kind == "absence" and stat == "median":
            lines.append(f"median absence proportion = {value:.4f}")
    return lines


def collect(paths: list[str]) -> list[Path]:
    configs: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            configs.extend(sorted(p.glob("*.json")))
        else:
            configs.append(p)
    return configs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("configs", nargs="+", help="config files or directories of *.json")
    parser.add_argument("--workers", type=int, default=None, help="override worker count")
    parser.add_argument(
        "--output-root",
        default=None,
        help="re-root each config's output_dir under this directory",
    )
    args = parser.parse_args()

    config_paths = collect(args.configs)
    if not config_paths:
        parser.error("no config files found")

    failures: list[tuple[Path, str]] = []
    for path in config_paths:
        print(f"=== {path}")
        try:
            cfg = load_experiment_config(path)
            if args.workers is not None:
                cfg = dataclasses.replace(cfg, workers=args.workers)
            if args.output_root is not None:
                out = Path(args.output_root) / Path(cfg.output_dir).name
                cfg = dataclasses.replace(cfg, output_dir=str(out))
            result = run_experiment(cfg, verbose=True)
        except Exception as exc:  # keep going; report at the end
            print(f"    FAILED: {exc}")
            failures.append((path, str(exc)))
            continue
        print(f"    wrote {cfg.output_dir} ({cfg.replications} replications)")
        for line in headline(result.summary_rows):
            print(f"    {line}")
    if failures:
        print(f"{len(failures)} of {len(config_paths)} configs failed:")
        for path, msg in failures:
            print(f"  {path}: {msg}")
        return 1
    print(f"all {len(config_paths)} configs complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
