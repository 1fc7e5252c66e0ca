"""Command-line entry point."""

import logging
import sys
from typing import List, Optional

from igmc.cli.router import build_parser
from igmc.core.exceptions import IGMCError, NumericalError
from igmc.core.logging_setup import setup_logging

logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns 0 on success, 1 on usage errors, 2 on data errors, 3 on numerical aborts."""
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    except NumericalError as e:
        logger.error(f"{e.detail} (batch dump: {e.dump_path})")
        return e.exit_code
    except IGMCError as e:
        logger.error(e.detail)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
