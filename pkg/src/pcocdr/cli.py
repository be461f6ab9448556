"""Command-line entry point: ``pcocdr <scenario> [--config FILE] [--seed N] [--out-dir DIR]``.

Exit codes: 0 success, 2 configuration error, 3 runtime or model error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import (
    SCENARIOS,
    ExperimentConfig,
    build_config,
    default_config,
    load_config,
    serialize_config,
)
from .errors import ConfigError, OcdrError
from .runner import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file; its scenario must match the subcommand")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--out-dir", help="directory for emitted data files and report.json")
    common.add_argument("--format", choices=["csv"], default="csv", help="tabular output format")
    common.add_argument("--print-config", action="store_true",
                        help="print the fully resolved config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pcocdr", description="Photon-counting OCDR simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="scenario", required=True, metavar="SCENARIO")
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common], help=f"run the {name} scenario")
    return p


def _resolve(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != args.scenario:
            raise ConfigError(
                f"config file is for scenario {cfg.scenario!r}, not {args.scenario!r}",
                field="scenario",
            )
    else:
        cfg = default_config(args.scenario)
    if args.seed is not None:
        data = cfg.to_dict()
        data["rng_seed"] = args.seed
        cfg = build_config(data)
    return cfg


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    return str(v)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(serialize_config(cfg))
        return EXIT_OK
    try:
        report = run_experiment(cfg, out_dir=args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OcdrError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    width = max(len(k) for k in report.metrics) if report.metrics else 0
    for name, m in report.metrics.items():
        unit = f" {m['unit']}" if m["unit"] else ""
        print(f"{name:<{width}}  {_format_value(m['value'])}{unit}")
    if report.files:
        print(f"wrote {len(report.files)} files to {args.out_dir or cfg['output']['dir']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
