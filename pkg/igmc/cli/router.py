"""Command router configuration."""

from igmc.cli.arguments import CliArgumentParser
from igmc.cli.commands import data, experiments, training
from igmc.core.config import settings


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog=settings.PROJECT_NAME, description=settings.DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", metavar="command", parser_class=CliArgumentParser)
    subparsers.required = True

    data.register(subparsers)
    training.register(subparsers)
    experiments.register(subparsers)
    return parser
