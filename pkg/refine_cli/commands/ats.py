"""The `enumerate-ats` command."""

import logging
from typing import Optional

import click

from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import ats_option, build_config, domain_options, finish, handle_errors, output_options, stutter_option

logger = logging.getLogger(__name__)


@click.command("enumerate-ats")
@ats_option()
@click.option("--max-len", "--max-trace-len", "max_trace_len", type=int,
              help="Longest trace listed (default 6)")
@domain_options
@stutter_option
@output_options
@handle_errors
def enumerate_ats(max_trace_len: Optional[int], **flags):
    """List the observable traces of an abstract model.

    Examples:
        refine enumerate-ats -a counter.rats --max-len 3 --int-range 0..3
    """
    config = build_config(dict(flags, max_trace_len=max_trace_len))
    bench = Workbench(config)
    ats = bench.load_ats()
    finish(bench.enumerate_ats(ats, config.max_trace_len), ProgressTracker.for_format(config.output_format))
