"""Proof commands: check a derivation, export the elaborated outline."""

import logging
from pathlib import Path

import click
from rich.console import Console

from ..api.workbench import Workbench
from ..utils.progress import ProgressTracker
from .common import (
    ats_option, build_config, domain_options, finish, handle_errors, output_options,
    program_option, stutter_option,
)

logger = logging.getLogger(__name__)


@click.command("check-proof")
@program_option()
@ats_option(required=False)
@click.option("--derivation", "-d", help="Derivation file (.rderiv); without it the outline is elaborated")
@domain_options
@stutter_option
@output_options
@handle_errors
def check_proof(**flags):
    """Validate a derivation of the program against the proof rules.

    Exits 0 when accepted, 1 when rejected and 2 when an entailment could
    not be decided within the domains.

    Examples:
        refine check-proof -p echo_loop.rimp -a counter.rats
        refine check-proof -p alternating.rimp -a counter.rats -d alternating.rderiv -r -1..3
    """
    config = build_config(flags)
    bench = Workbench(config)
    program = bench.load_program()
    ats = bench.load_ats() if config.ats else None
    report = bench.check_proof(program, ats, config.derivation)
    finish(report, ProgressTracker.for_format(config.output_format))


@click.command("export-derivation")
@program_option()
@ats_option(required=False)
@click.option("--output", "-o", "target", type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the .rderiv file (default: next to the program)")
@domain_options
@stutter_option
@handle_errors
def export_derivation(target, **flags):
    """Elaborate the program's annotations into a derivation file.

    Examples:
        refine export-derivation -p echo_loop.rimp -a counter.rats -o echo_loop.rderiv
    """
    config = build_config(flags)
    bench = Workbench(config)
    program = bench.load_program()
    ats = bench.load_ats() if config.ats else None
    target = target or config.program.with_suffix(".rderiv")
    path = bench.export_derivation(program, ats, target)
    Console().print(f"[green]Wrote derivation to {path}[/green]")
