"""The `run` command: one scheduled execution."""

import logging

import click

from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import (
    build_config, domain_options, finish, handle_errors, output_options, program_option, scheduler_options,
)

logger = logging.getLogger(__name__)


@click.command()
@program_option()
@domain_options
@click.option("--max-steps", "-n", type=int, help="Steps before the run is cut off (default 64)")
@click.option("--frames/--no-frames", default=None, help="Also start from small frame heaps")
@scheduler_options
@output_options
@handle_errors
def run(**flags):
    """Execute the program along one schedule and print the transcript.

    The first scheduler always takes the first enabled step (steps are
    ordered by rule label); the random one draws from a seeded generator,
    so a fixed seed reproduces the same run.

    Examples:
        refine run -p echo_loop.rimp
        refine run -p alternating.rimp --scheduler random --seed 7
    """
    config = build_config(flags)
    bench = Workbench(config)
    program = bench.load_program()
    logger.info(f"Running {config.program} with the {config.scheduler.value} scheduler")
    finish(bench.run(program), ProgressTracker.for_format(config.output_format))
