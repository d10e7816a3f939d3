"""Command-line front end for zevca experiments

    zevca run <config.yml> [--out DIR] [--n-list 2,4,6] [--seedless-deterministic]
    zevca run --preset eckart_e20
    zevca run --list-presets
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from zevca import __version__, init_error_reporting
from zevca.config import (
    ConfigError,
    list_presets,
    load_config,
    load_preset,
    load_user_defaults,
    resolve_max_workers,
    resolve_output_dir,
)
from zevca.experiments import run_experiment
from zevca.grid_oracle import OracleError
from zevca.models import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_ALL_BLEW_UP = 3
EXIT_ORACLE_FAILURE = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def parse_n_list(text: str) -> List[int]:
    """Parse a comma-separated list of truncation orders such as ``2,4,6``."""
    try:
        orders = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--n-list expects comma-separated integers: {e}") from e
    if not orders:
        raise ConfigError("--n-list is empty")
    return orders


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zevca",
        description="Zero-velocity complex action experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run one experiment")
    run.add_argument("config", nargs="?", help="Experiment configuration (YAML)")
    run.add_argument(
        "--out",
        type=str,
        help="Output directory. Env: ZEVCA_OUT.",
    )
    run.add_argument("--preset", type=str, help="Run a bundled preset instead")
    run.add_argument(
        "--n-list",
        type=str,
        help="Override the truncation orders, e.g. 2,4,6",
    )
    run.add_argument(
        "--seedless-deterministic",
        action="store_true",
        help="Run the N-sweep serially and mark the summary deterministic",
    )
    run.add_argument(
        "--log-level",
        type=str,
        help="Logging level (default: INFO). Env: ZEVCA_LOG_LEVEL.",
    )
    run.add_argument(
        "--list-presets",
        action="store_true",
        help="List the bundled presets and exit",
    )
    return parser


def _configure_logging(cli_level: Optional[str]) -> None:
    level = (
        cli_level
        or os.getenv("ZEVCA_LOG_LEVEL")
        or load_user_defaults().get("log_level")
        or "INFO"
    )
    level_value = logging.getLevelName(level.upper())
    if not isinstance(level_value, int):
        raise ConfigError(f"Unknown log level '{level}'")
    logging.basicConfig(level=level_value, format=LOG_FORMAT)


def _load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("Give either a configuration file or --preset, not both")
    if args.preset:
        cfg = load_preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("A configuration file or --preset is required")

    if args.n_list:
        data = cfg.model_dump()
        data["n_list"] = parse_n_list(args.n_list)
        try:
            cfg = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid --n-list: {e}") from e
    return cfg


def run_command(args: argparse.Namespace) -> int:
    if args.list_presets:
        for name in list_presets():
            print(name)
        return EXIT_OK

    cfg = _load_experiment(args)
    out_dir = resolve_output_dir(args.out, cfg)
    max_workers = resolve_max_workers(cfg, args.seedless_deterministic)
    logger.info(
        "Running %s experiment (N=%s, %s workers) into %s",
        cfg.experiment,
        cfg.n_list,
        max_workers,
        out_dir,
    )
    summary = run_experiment(
        cfg,
        out_dir,
        preset=args.preset,
        deterministic=args.seedless_deterministic,
        max_workers=max_workers,
    )
    for result in summary.results:
        logger.info(
            "N=%s: value=%s relative_error=%s converged=%s blew_up=%s",
            result.n,
            result.terminal_value,
            result.relative_error,
            result.converged,
            result.blew_up,
        )
    if summary.results and all(r.blew_up for r in summary.results):
        logger.error("Every truncation order blew up")
        return EXIT_ALL_BLEW_UP
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the zevca command."""
    args = build_parser().parse_args(argv)
    try:
        _configure_logging(args.log_level)
        if init_error_reporting():
            logger.info("Error reporting enabled")
        logger.debug("zevca %s", __version__)
        return run_command(args)
    except ConfigError as e:
        sys.stderr.write(f"zevca: configuration error: {e}\n")
        return EXIT_CONFIG_ERROR
    except OracleError as e:
        logger.error("Reference solver failed: %s", e)
        return EXIT_ORACLE_FAILURE
    except Exception:
        logger.exception("zevca run failed")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
