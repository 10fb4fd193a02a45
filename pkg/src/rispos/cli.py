"""Command-line interface: `rispos run|peb|design <config> [options]`.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import parse_config
from .errors import ConfigError, RisposError
from .harness import bounds_table, directed_phases, rows_to_csv, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rispos",
        description="RIS-aided mmWave positioning: simulation, bounds, design")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte-Carlo sweep and write CSV")
    run.add_argument("config", help="YAML experiment config")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--trials", type=int, default=None, help="override trial count")
    run.add_argument("--seed", type=int, default=None, help="override master seed")
    run.add_argument("--profile", choices=("desk", "paper"), default="desk",
                     help="base parameter profile the config overrides")

    peb = sub.add_parser("peb", help="print PEB/CEB per sweep value (no trials)")
    peb.add_argument("config")
    peb.add_argument("--profile", choices=("desk", "paper"), default="desk")

    design = sub.add_parser("design", help="emit the directed RIS phase profiles")
    design.add_argument("config")
    design.add_argument("--out", default=None, help="directory for phases.csv")
    design.add_argument("--profile", choices=("desk", "paper"), default="desk")
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(args.config, profile=args.profile)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    rows = run_sweep(cfg, out_dir=args.out)
    sys.stdout.write(rows_to_csv(rows))
    print(f"wrote {os.path.join(args.out, 'results.csv')}", file=sys.stderr)
    return EXIT_OK


def _cmd_peb(args) -> int:
    cfg = parse_config(args.config, profile=args.profile)
    print(f"{'value':>16} {'peb_m':>16} {'ceb_s':>16}")
    for value, peb, ceb in bounds_table(cfg):
        print(f"{str(value):>16} {peb:>16.9g} {ceb:>16.9g}")
    return EXIT_OK


def _cmd_design(args) -> int:
    cfg = parse_config(args.config, profile=args.profile)
    phases = directed_phases(cfg.scene, cfg.arrays)
    for q in range(phases.shape[0]):
        angles = np.angle(phases[q])
        print(f"RIS {q}: {phases.shape[1]} phases, "
              f"first five [rad]: {np.array2string(angles[:5], precision=4)}")
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "phases.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("ris,element,phase_rad\n")
            for q in range(phases.shape[0]):
                for m, ang in enumerate(np.angle(phases[q])):
                    fh.write(f"{q},{m},{ang:.9g}\n")
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "peb": _cmd_peb, "design": _cmd_design}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RisposError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
