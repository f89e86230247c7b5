"""The `check-refinement` command."""

import logging

import click

from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import (
    ats_option, build_config, domain_options, exploration_options, finish, handle_errors,
    output_options, program_option, stutter_option,
)

logger = logging.getLogger(__name__)


@click.command("check-refinement")
@program_option()
@ats_option()
@domain_options
@exploration_options
@click.option("--max-trace-len", type=int, help="Longest trace compared (default 6)")
@stutter_option
@output_options
@handle_errors
def check_refinement(**flags):
    """Check that the program refines the abstract model.

    Runs the per-step refinement check and bounded trace inclusion on the
    same explored forest and reports whether the two agree.

    Examples:
        refine check-refinement -p alternating.rimp -a counter.rats --max-steps 40 --int-range -2..8
    """
    config = build_config(flags)
    bench = Workbench(config)
    program = bench.load_program()
    ats = bench.load_ats()
    tracker = ProgressTracker.for_format(config.output_format)
    with tracker.track_exploration("Checking refinement") as progress:
        report = bench.check_refinement(program, ats, progress)
    finish(report, tracker)
