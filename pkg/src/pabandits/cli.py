"""Command-line entry point: ``pabandits run ...`` and ``pabandits plot ...``.

Exit codes: 0 success, 2 configuration or input error, 3 protocol violation,
1 any other failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, InstanceError, InternalError, ProtocolViolation
from .harness import PRESETS, ExperimentConfig, emit_plot, run_experiment, with_subroutine

log = logging.getLogger("pabandits")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_PROTOCOL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pabandits", description="Principal-agent bandit simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSVs (and an SVG plot)")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="experiment config (JSON)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    run.add_argument("--subroutine", choices=["ucb", "eps-greedy"], help="bandit subroutine for every ipa+* entry")
    run.add_argument("--output-dir", type=Path, help="override the output directory")
    run.add_argument("--seeds", type=int, help="override the number of seeds")
    run.add_argument("--no-plot", action="store_true", help="skip the SVG plot")

    plot = sub.add_parser("plot", help="render a summary CSV as an SVG regret plot")
    plot.add_argument("--summary", type=Path, required=True)
    plot.add_argument("--out", type=Path, required=True)
    return p


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else PRESETS[args.preset]()
    changes = {}
    if args.subroutine:
        changes["algorithms"] = with_subroutine(cfg.algorithms, args.subroutine)
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    if args.seeds is not None:
        changes["seed_count"] = args.seeds
    if args.no_plot:
        changes["plot"] = False
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = _load(args)
            log.info("running %s on T=%d with %d seeds", cfg.algorithms, cfg.T, cfg.seed_count)
            paths = run_experiment(cfg)
            for key, path in paths.items():
                print(f"{key}: {path}")
        else:
            print(emit_plot(args.summary, args.out))
    except (ConfigError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolViolation as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
