"""Entry point: parser construction, logging setup and exit-code mapping."""

import argparse
import logging
import logging.config
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

import pydantic

from app.cli.commands import calibrate, localize, observability, reproduce, simulate
from app.core.config import LOGGING_CONFIG
from app.core.exceptions import AppException, ExitCode, ValidationError, handle_app_exception

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Parser that raises instead of exiting, so usage errors share the exit-code table."""

    def error(self, message: str) -> NoReturn:
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="YAML run config (defaults if omitted)")
    common.add_argument("-o", "--output-dir", type=Path, help="Directory for artifacts")
    common.add_argument("--seed", type=int, help="Override the config seed")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = ArgumentParser(
        prog="binaural-localizer",
        description="Sound source localization with a rotating and translating microphone pair",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for module in (simulate, localize, calibrate, observability, reproduce):
        module.register(subparsers, [common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run one command and return its exit code.

    Exit codes: 0 success, 1 validation, 2 runtime, 3 non-convergence.
    """
    logging.config.dictConfig(LOGGING_CONFIG)
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger("app").setLevel(logging.DEBUG)
        logger.debug(f"Running command {args.command}")
        code: int = args.func(args)
        return code
    except AppException as exc:
        return handle_app_exception(exc)
    except pydantic.ValidationError as exc:
        logger.warning(f"Invalid input: {exc}")
        return ExitCode.VALIDATION
