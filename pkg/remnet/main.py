"""Command-line entry point"""

import argparse
import importlib
import logging
import sys
from typing import List, Optional

from remnet import __version__
from remnet.commands import COMMANDS
from remnet.commands.common import common_parser
from remnet.config import settings
from remnet.utils.exceptions import RemNetError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remnet",
        description="Camera model identification with remnant-block preprocessing",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    parent = common_parser()
    for name in COMMANDS:
        module = importlib.import_module(f"remnet.commands.{name}")
        module.register(subparsers, parent)
    return parser


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        return args.handler(args)
    except RemNetError as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(e.to_json_line(), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}")
        envelope = RemNetError("INTERNAL_ERROR", f"{type(e).__name__}: {e}", exit_code=1)
        print(envelope.to_json_line(), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
