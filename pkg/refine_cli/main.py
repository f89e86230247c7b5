"""Main CLI entry point for refine-cli."""

import logging
import sys

import click
from dotenv import load_dotenv

from . import __version__
from .api.models import USAGE_EXIT_CODE
from .commands.ats import enumerate_ats
from .commands.explore import explore
from .commands.parse import parse
from .commands.proof import check_proof, export_derivation
from .commands.refinement import check_refinement
from .commands.run import run

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.FileHandler("refine_cli.log")],
)

console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(logging.WARNING)

logger = logging.getLogger(__name__)

load_dotenv()


class RefineGroup(click.Group):
    """Click group whose usage errors exit with the workbench's usage code."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = USAGE_EXIT_CODE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = USAGE_EXIT_CODE
            raise


@click.group(cls=RefineGroup)
@click.version_option(version=__version__, prog_name="refine")
@click.option("--debug/--no-debug", default=False, help="Enable debug logging")
def cli(debug: bool):
    """refine - check that concurrent programs refine abstract transition systems.

    Explores every interleaving of a small imperative program over bounded
    domains, audits refinement and safety, and checks separation-logic
    derivations that establish refinement.

    Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage error.

    Examples:
        refine check-refinement -p alternating.rimp -a counter.rats -n 40 -r -2..8
        refine check-proof -p echo_loop.rimp -a counter.rats
        refine enumerate-ats -a counter.rats --max-len 3
    """
    root = logging.getLogger()
    if console_handler not in root.handlers:
        root.addHandler(console_handler)
    if debug:
        root.setLevel(logging.DEBUG)
        console_handler.setLevel(logging.DEBUG)
        logger.debug("Debug logging enabled")
    else:
        console_handler.setLevel(logging.WARNING)


cli.add_command(parse)
cli.add_command(run)
cli.add_command(explore)
cli.add_command(check_refinement)
cli.add_command(check_proof)
cli.add_command(export_derivation)
cli.add_command(enumerate_ats)


def main():
    """Main entry point."""
    try:
        cli()
    except Exception as e:
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
