"""The `parse` command: read source files and dump what was understood."""

import logging
from pathlib import Path
from typing import Optional, Tuple

import click

from ..api.models import OutputFormat
from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import build_config, finish, handle_errors

logger = logging.getLogger(__name__)


@click.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "-f", "output_format", type=click.Choice([o.value for o in OutputFormat]),
              help="Report format (default text)")
@handle_errors
def parse(paths: Tuple[Path, ...], output_format: Optional[str]):
    """Parse programs (.rimp), abstract models (.rats) and derivations (.rderiv).

    Programs and models are pretty-printed back in concrete syntax.

    Examples:
        refine parse fixtures/alternating.rimp fixtures/counter.rats
    """
    logger.info(f"Parsing {len(paths)} file(s)")
    config = build_config({"output_format": output_format})
    report = Workbench(config).parse(paths)
    finish(report, ProgressTracker.for_format(config.output_format))
