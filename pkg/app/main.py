"""
morphdiv command line
Wires the command controllers into one argparse program
"""

import argparse
import logging
import sys
import typing
from typing import List, Optional

from pydantic import ValidationError

from app.config.settings import Settings, load_settings
from app.controllers import (
    compare_controller,
    extract_controller,
    plot_controller,
    quality_controller,
    stats_controller,
    synth_controller,
    validate_controller,
)
from app.exceptions import EXIT_USAGE, UsageError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Configure logging
logger = logging.getLogger(__name__)

CONTROLLERS = [
    validate_controller,
    extract_controller,
    stats_controller,
    compare_controller,
    quality_controller,
    plot_controller,
    synth_controller,
]


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage-error code"""

    def error(self, message: str) -> typing.NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def _flag_type(annotation):
    """argparse keyword arguments for a settings field"""
    args = [a for a in typing.get_args(annotation) if a is not type(None)]
    if typing.get_origin(annotation) is typing.Union and len(args) == 1:
        annotation = args[0]
    if annotation is bool:
        return {"action": argparse.BooleanOptionalAction}
    if typing.get_origin(annotation) in (list, List):
        return {"type": _float_list}
    if annotation in (int, float):
        return {"type": annotation}
    return {"type": str}


def settings_flags() -> argparse.ArgumentParser:
    """One flag per settings field; unset flags stay None so the config file applies"""
    parent = CliParser(add_help=False)
    parent.add_argument("--config", type=str, default=None, help="key=value config file")
    group = parent.add_argument_group("settings (also valid as config keys)")
    for name, field in Settings.model_fields.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, **_flag_type(field.annotation))
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="morphdiv", description="Morphosyntactic divergence analysis of parallel treebanks")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    parents = [settings_flags()]
    for controller in CONTROLLERS:
        controller.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse flags, build settings and run one command

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        Exit code: 0 success, 1 usage error, 2 data error
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    if getattr(args, "handler", None) is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    overrides = {name: getattr(args, name) for name in Settings.model_fields if hasattr(args, name)}
    try:
        settings = load_settings(args.config, **overrides)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_USAGE
    except UsageError as e:
        logger.error(str(e))
        return e.exit_code

    logging.getLogger().setLevel(settings.log_level)
    logger.debug(f"Running {args.command}")
    return args.handler(settings, args)


if __name__ == "__main__":
    sys.exit(main())
