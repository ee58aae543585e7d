"""Command line entry point: ``cal run <experiment> --config FILE --seed N --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .experiments.config import EXPERIMENTS, default_config, load_config
from .experiments.runners import run

log = logging.getLogger("cal")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cal", description="Run cortical network experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment and write its outputs")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--config", type=Path, help="YAML file overriding the packaged defaults")
    r.add_argument("--seed", type=int, help="master seed (overrides the config)")
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.add_argument("-v", "--verbose", action="store_true")
    c = sub.add_parser("config", help="print an experiment's default configuration")
    c.add_argument("experiment", choices=EXPERIMENTS)
    sub.add_parser("list", help="list experiments")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(EXPERIMENTS))
        return 0
    if args.command == "config":
        print(yaml.safe_dump(default_config(args.experiment), sort_keys=False), end="")
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = load_config(args.experiment, args.config, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=False))
    log.info("running %s with seed %s", args.experiment, cfg["seed"])
    report = run(args.experiment, cfg, args.out)
    print(report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
