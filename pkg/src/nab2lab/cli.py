"""Command-line entry point: ``nab2lab run | validate | list-kinds``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from .config import ConfigError, parse_config
from .runner import KINDS, all_passed, prepare, run_experiment, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3
_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("nab2lab")


def _setup_logging() -> None:
    name = os.environ.get("NAB2LAB_LOG", "quiet").strip().lower()
    level = _LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if name not in _LEVELS:
        log.warning("NAB2LAB_LOG=%r not recognised, using quiet", name)


def _load(path: str, seed: int | None):
    with open(path, encoding="utf-8") as fh:
        spec = parse_config(fh.read())
    if seed is not None:
        spec.seed = seed
    return spec


def _cmd_run(args) -> int:
    spec = _load(args.config, args.seed)
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    t0 = time.perf_counter()
    records = run_experiment(spec, jobs=args.jobs)
    log.info("%s finished in %.2f s", spec.kind, time.perf_counter() - t0)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(records, spec.kind, fh)
    else:
        write_csv(records, spec.kind, sys.stdout)
    log.info("overall: %s", "pass" if all_passed(records) else "fail")
    return EXIT_OK


def _cmd_validate(args) -> int:
    ctx = prepare(_load(args.config, None))
    print(f"ok: {ctx.kind.name}, N = {ctx.N}")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name, kind in KINDS.items():
        print(f"{name}\t{kind.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nab2lab", description="Numerical experiments on non-abelian 2-forms.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configuration and write CSV records")
    run.add_argument("config")
    run.add_argument("--out", help="CSV file (default: stdout)")
    run.add_argument("--seed", type=int, help="override the configured seed")
    run.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    run.set_defaults(func=_cmd_run)
    val = sub.add_parser("validate", help="check a configuration without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    sub.add_parser("list-kinds", help="list experiment kinds").set_defaults(func=_cmd_list)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
