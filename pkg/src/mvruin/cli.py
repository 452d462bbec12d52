"""Command line: ``mvruin run`` and ``mvruin validate``.

Exit codes: 0 success, 2 invalid config, 3 assumption failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, RunConfig, load_config
from .processes import check_assumption_3_1
from .report import write_csv
from .runner import seeded_rng, assumption_violations, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ASSUMPTION = 3

log = logging.getLogger("mvruin")


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(["seed: must be an unsigned 64-bit integer"])
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def _print_violations(header: str, items: List[str]) -> None:
    print(header, file=sys.stderr)
    for v in items:
        print(f"  {v}", file=sys.stderr)


def cmd_validate(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        _print_violations("invalid config:", exc.violations)
        return EXIT_INVALID
    violations = assumption_violations(cfg)
    horizons = [t for e in cfg.experiments for t in e.t_grid if t != float("inf")]
    if horizons:
        pb = check_assumption_3_1(cfg.spec.returns, max(horizons), n_paths=10_000, rng=seeded_rng(cfg.seed, 0))
        note = f" ({pb.note})" if pb.note else ""
        print(f"return path band on [0, {max(horizons):g}]: [{0.0 - pb.c1:.6g}, {pb.c2:.6g}]{note}")
    if violations:
        _print_violations("assumption violations:", violations)
        return EXIT_ASSUMPTION if args.strict else EXIT_OK
    print("no violations")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        _print_violations("invalid config:", exc.violations)
        return EXIT_INVALID
    violations = assumption_violations(cfg)
    if violations:
        _print_violations("assumption violations:", violations)
        if args.strict:
            return EXIT_ASSUMPTION
    out = Path(args.out or cfg.output)
    spec = cfg.spec
    for exp in cfg.experiments:
        log.info("running %s (%s, n=%d)", exp.id, exp.kind, exp.n)
        rows = run_experiment(exp, spec, cfg.seed, threads=args.threads)
        path = write_csv(out / f"{exp.id}.csv", rows)
        print(f"{exp.id}: {len(rows)} rows -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvruin", description="Heavy-tailed multivariate ruin experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "simulate every experiment and write CSV reports"),
                            ("validate", cmd_validate, "check a config without simulating")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, default=None, help="master seed, overrides the config")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes")
        p.add_argument("--strict", action="store_true", help="exit 3 when a model assumption fails")
        p.add_argument("--out", default=None, help="output directory, overrides the config")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
