"""
Command-line entry point.
- One subcommand per router command, flags mirror config keys
- --config reads a flat key=value file; flags override it
- Exit code 0 iff no errors were recorded
"""
import argparse
import logging
import sys
from typing import Dict, List, Optional

import torch

from app.config import load_config, settings
from app.exceptions import ConfigError, ToolkitError
from app.routers import Command, add_command_parser
from app.routers import data, experiments, training, translation

logger = logging.getLogger(__name__)

ROUTERS = (data.router, training.router, translation.router, experiments.router)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmt-robust",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    subparsers = parser.add_subparsers(dest="command_name", metavar="command")
    subparsers.required = True
    for router in ROUTERS:
        for command in router.commands.values():
            add_command_parser(subparsers, command)
    return parser


def _overrides(args: argparse.Namespace, command: Command) -> Dict[str, str]:
    return {
        name: getattr(args, name)
        for name in command.config_model.model_fields
        if getattr(args, name, None) is not None
    }


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    torch.set_num_threads(settings.NUM_THREADS)

    command: Command = args.command
    logger.info(f"🚀 {command.name}")
    try:
        config = load_config(command.config_model, args.config, _overrides(args, command))
        errors = command.handler(config) or 0
    except ConfigError as e:
        logger.error(f"❌ {command.name}: {e} (key: {e.key})")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ToolkitError as e:
        logger.error(f"❌ {command.name} failed: {e}")
        return 1

    if errors:
        logger.warning(f"⚠️ {command.name} finished with {errors} error(s)")
        return 1
    logger.info(f"✅ {command.name} done")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
