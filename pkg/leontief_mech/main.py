import logging
import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from leontief_mech.cli import create_parser
from leontief_mech.config import RunConfig, load_run_config, resolve_config_path
from leontief_mech.dist import Distribution, build_distribution
from leontief_mech.errors import ConfigError
from leontief_mech.handlers import HANDLERS

EXIT_USAGE = 2
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


def _overrides(args: Namespace) -> dict[str, Any]:
    """Flags that override config-file values; unset flags are None and ignored."""
    keys = ("out_dir", "verify_grid", "k_floor", "tol", "seed", "family", "oracle_k_nodes", "oracle_rho_nodes")
    return {key: getattr(args, key, None) for key in keys}


def _validate_args(args: Namespace, parser: ArgumentParser) -> None:
    if args.command == "verify" and args.mechanism is None and args.random is None:
        parser.error("verify needs a mechanism file or --random")
    if args.command == "verify" and args.mechanism is not None and args.random is not None:
        parser.error("verify takes either a mechanism file or --random, not both")


def load_inputs(args: Namespace) -> tuple[RunConfig, Distribution]:
    """Resolve the run config and build its distribution; any failure is a config error."""
    config_path = resolve_config_path(args.config)
    config = load_run_config(config_path, _overrides(args))
    base_dir = config_path.parent if config_path is not None else None
    try:
        d = build_distribution(config.distribution, config.numerics, base_dir)
    except (ValueError, FileNotFoundError) as e:
        raise ConfigError("distribution", str(e)) from e
    return config, d


def main(argv: list[str] | None = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    _validate_args(args, parser)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)

    try:
        config, d = load_inputs(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr, flush=True)
        return EXIT_USAGE

    logger.debug("Running %s on %s with config %s", args.command, d, config.to_dict())
    try:
        Path(config.out_dir).mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](args, config, d)
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr, flush=True)
        return 1
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr, flush=True)
        return 1
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr, flush=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
