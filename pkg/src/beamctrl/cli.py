"""Command line entry point: validate configs, run experiments, read reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import emit_plot_data, run
from .io import read_flat_report


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: kind={cfg.kind} hash={cfg.config_hash}")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    manifest = run(cfg, out_root=args.out_root)
    emit_plot_data(manifest)
    print(f"run {manifest.config_hash} ({manifest.kind}) -> {manifest.run_dir}")
    for key, value in manifest.metrics.items():
        print(f"  {key} = {value}")
    for key, passed in manifest.assertions.items():
        print(f"  [{'PASS' if passed else 'FAIL'}] {key}")
    return 0 if manifest.overall_pass else 1


def _cmd_report(args) -> int:
    manifest_path = Path(args.run_dir) / "manifest.txt"
    if not manifest_path.exists():
        print(f"no manifest in {args.run_dir}", file=sys.stderr)
        return 1
    entries = read_flat_report(manifest_path)
    for key, value in entries.items():
        print(f"{key} = {value}")
    return 0 if entries.get("overall_pass") == "true" else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="beamctrl",
        description="Numerical laboratory for null control of the "
                    "structurally damped beam",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_run = sub.add_parser("run", help="run the configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out-root", default="runs",
                       help="directory collecting run outputs (default: runs)")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="print the manifest of a run")
    p_rep.add_argument("run_dir")
    p_rep.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
