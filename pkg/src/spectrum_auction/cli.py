"""Command-line entry point.

    spectrum-auction run --preset fig2 --out results/fig2
    spectrum-auction run --config my.cfg --replications 5 --jobs 4
    spectrum-auction validate --config my.cfg

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ScenarioConfig, parse_config, preset, serialize
from .errors import ConfigError, OutputError
from .scenario import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("spectrum_auction")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectrum-auction",
                                     description="Repeated spectrum auction simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV results")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--preset", help="start from a named preset (fig2, fig3, fig4, fig56, fig7)")
    run.add_argument("--seed", type=_u64)
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--replications", type=_nonneg)
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")

    val = sub.add_parser("validate", help="check a config file and print it fully expanded")
    val.add_argument("--config", required=True)
    val.add_argument("--preset")
    return parser


def load_config(path: str | None, preset_name: str | None) -> ScenarioConfig:
    """Preset (if any) first, then the file's overrides on top."""
    base = preset(preset_name) if preset_name else None
    if path is None:
        if base is None:
            raise ConfigError("give --config and/or --preset")
        return base
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_config(text, base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        if args.command == "validate":
            sys.stdout.write(serialize(cfg))
            return EXIT_OK
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.replications is not None:
            changes["replications"] = args.replications
        cfg = dataclasses.replace(cfg, **changes).validate()
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        log.info("running %d point(s) x %d arm(s) x %d replication(s)",
                 len(cfg.points()), len(cfg.strategies), cfg.replications)
        rows = run_scenario(cfg, args.out, jobs=args.jobs)
    except ConfigError as exc:
        where = f"{args.config}: " if args.config and exc.line is not None else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for r in rows:
        gain = "" if r.gain_pct is None else f"  gain {r.gain_pct:+.1f}%"
        point = f"[{r.point}] " if r.point else ""
        print(f"{point}{r.strategies}: gamma {r.gamma_mean:.4f} +- {r.gamma_std:.4f}  "
              f"jain {r.jain_mean:.4f}{gain}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
