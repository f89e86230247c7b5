"""The `explore` command: bounded exhaustive exploration plus audits."""

import logging

import click

from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import (
    ats_option, audits_option, build_config, domain_options, exploration_options, finish,
    handle_errors, output_options, program_option, stutter_option,
)

logger = logging.getLogger(__name__)


@click.command()
@program_option()
@ats_option(required=False)
@domain_options
@exploration_options
@click.option("--max-trace-len", type=int, help="Longest trace compared by trace_inclusion (default 6)")
@audits_option
@stutter_option
@output_options
@handle_errors
def explore(**flags):
    """Explore every interleaving up to --max-steps and run the audits.

    Audits needing an abstract model (refsucc, trace_inclusion) are
    skipped when --ats is not given.

    Examples:
        refine explore -p alternating.rimp -a counter.rats -n 40 -r -2..8
        refine explore -p racy_counter.rimp --audits safety
    """
    config = build_config(flags)
    bench = Workbench(config)
    program = bench.load_program()
    ats = bench.load_ats() if config.ats else None
    tracker = ProgressTracker.for_format(config.output_format)
    with tracker.track_exploration("Exploring") as progress:
        report = bench.explore_report(program, ats, progress)
    finish(report, tracker)
