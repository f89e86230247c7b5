"""Options and plumbing shared by the subcommands."""

import functools
import logging
from typing import Any, Callable, Dict

import click
from rich.console import Console
from rich.markup import escape

from ..api.models import AUDIT_NAMES, USAGE_EXIT_CODE, OutputFormat, Report, RunConfig, Scheduler
from ..errors import ParseError, RefineError
from ..utils.config import env_overrides, load_user_config
from ..utils.progress import ProgressTracker
from ..utils.storage import ReportStorage

logger = logging.getLogger(__name__)

error_console = Console(stderr=True)


def program_option(required: bool = True):
    return click.option(
        "--program", "-p",
        required=required,
        help="Program file (.rimp); bare names are looked up in the fixtures directory",
    )


def ats_option(required: bool = True):
    return click.option(
        "--ats", "-a",
        required=required,
        help="Abstract transition system (.rats)",
    )


def domain_options(f: Callable) -> Callable:
    """--int-range, --addr-count, --max-seq-len, --max-heap-cells."""
    options = [
        click.option("--int-range", "-r", help="Integer domain LO..HI (default -4..8)"),
        click.option("--addr-count", type=int, help="Ordinary addresses considered (default 4)"),
        click.option("--max-seq-len", type=int, help="Longest sequence enumerated (default 6)"),
        click.option("--max-heap-cells", type=int, help="Largest frame heap for wands and precision (default 2)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def exploration_options(f: Callable) -> Callable:
    options = [
        click.option("--max-steps", "-n", type=int, help="Exploration depth (default 64)"),
        click.option("--workers", "-w", type=int, help="Threads per exploration frontier (env REFINE_WORKERS)"),
        click.option("--frames/--no-frames", default=None,
                     help="Also start from small frame heaps next to the precondition's models"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def stutter_option(f: Callable) -> Callable:
    return click.option(
        "--stutter-close/--no-stutter-close",
        default=None,
        help="Close the ATS under stuttering before use (default on)",
    )(f)


def audits_option(f: Callable) -> Callable:
    return click.option(
        "--audits",
        help=f"all, none, or a comma-separated list of: {', '.join(AUDIT_NAMES)}",
    )(f)


def scheduler_options(f: Callable) -> Callable:
    f = click.option("--seed", "-s", type=int, help="Seed of the random scheduler")(f)
    return click.option(
        "--scheduler",
        type=click.Choice([s.value for s in Scheduler]),
        help="Step choice: first enabled step or a seeded random one",
    )(f)


def output_options(f: Callable) -> Callable:
    options = [
        click.option("--format", "-f", "output_format", type=click.Choice([o.value for o in OutputFormat]),
                     help="Report format (default text)"),
        click.option("--timings", is_flag=True, default=None, help="Include wall times in JSON reports"),
        click.option("--save-report", is_flag=True, default=None,
                     help="Save the JSON report under the data directory (env REFINE_REPORT_DIR)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def build_config(flags: Dict[str, Any]) -> RunConfig:
    """RunConfig from command flags, REFINE_* variables and config.yaml."""
    return RunConfig.from_sources(flags, env_overrides(), load_user_config())


def handle_errors(command: Callable) -> Callable:
    """Turn workbench errors into a red message and the usage exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ParseError as e:
            logger.info(f"Parse error: {e}")
            error_console.print(f"[red]Parse error ({e.code}) at line {e.line}, column {e.column}: "
                                f"{escape(e.reason)}[/red]")
            raise SystemExit(USAGE_EXIT_CODE)
        except RefineError as e:
            logger.info(f"Command failed: {e}")
            error_console.print(f"[red]Error: {escape(str(e))}[/red]")
            raise SystemExit(USAGE_EXIT_CODE)
        except OSError as e:
            logger.info(f"I/O error: {e}")
            error_console.print(f"[red]Error: {escape(str(e))}[/red]")
            raise SystemExit(USAGE_EXIT_CODE)

    return wrapper


def finish(report: Report, tracker: ProgressTracker) -> None:
    """Print, optionally save, and exit with the verdict's code."""
    tracker.emit(report)
    if report.config.save_report:
        path = ReportStorage(report.config.report_dir).save(report)
        if report.config.output_format == OutputFormat.TEXT:
            tracker.console.print(f"[dim]Report saved to {escape(str(path))}[/dim]")
    logger.info(f"{report.command} finished with verdict {report.status.value}")
    raise SystemExit(report.exit_code)
