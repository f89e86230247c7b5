"""Progress spinner and result tables for the commands."""

import json
import logging
import time
from typing import Any, Dict, List, Optional

import click
from rich.console import Console
from rich.markup import escape
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from ..api.models import (
    ExploreReport, OutputFormat, ParseReport, ProofReport, RefinementReport, Report, RunReport,
    Status, TraceListing,
)
from ..explorer.audits import AuditResult
from ..semantics.values import decode_value, format_value

logger = logging.getLogger(__name__)

STATUS_STYLE = {
    Status.PASS: "green",
    Status.FAIL: "red",
    Status.INCONCLUSIVE: "yellow",
}

AUDIT_STYLE = {
    "pass": "green",
    "fail": "red",
    "inconclusive": "yellow",
    "skipped": "dim",
}


class ProgressTracker:
    """Progress display and report rendering.

    Attributes:
        console: Rich console for reports (stdout)
        status_console: Rich console for the spinner (stderr)
        style: Display style (rich/quiet)
    """

    def __init__(self, style: str = "rich", console: Optional[Console] = None):
        self.style = style
        self.console = console or Console()
        self.status_console = Console(stderr=True)
        logger.debug(f"Initialized progress tracker with style: {style}")

    @classmethod
    def for_format(cls, output_format: OutputFormat) -> "ProgressTracker":
        return cls("quiet" if output_format == OutputFormat.JSON else "rich")

    def track_exploration(self, operation: str) -> "ExplorationProgress":
        return ExplorationProgress(operation, self.style, self.status_console)

    # Reports ---------------------------------------------------------------

    def emit(self, report: Report) -> None:
        """Print the report as JSON or as rich tables."""
        if report.config.output_format == OutputFormat.JSON:
            click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
            return
        if isinstance(report, RefinementReport):
            self._refinement(report)
        elif isinstance(report, ExploreReport):
            self._explore(report)
        elif isinstance(report, ProofReport):
            self._proof(report)
        elif isinstance(report, RunReport):
            self._run(report)
        elif isinstance(report, TraceListing):
            self._traces(report)
        elif isinstance(report, ParseReport):
            self._parse(report)
        for warning in report.warnings:
            self.console.print(f"[yellow]warning:[/yellow] {escape(warning)}")
        style = STATUS_STYLE[report.status]
        self.console.print(
            f"[bold {style}]{report.status.value.upper()}[/bold {style}] "
            f"[dim]({report.wall_time:.2f}s)[/dim]"
        )

    def _stats_table(self, stats: Dict[str, Any]) -> Table:
        table = Table(title="Exploration")
        table.add_column("Counter", style="cyan")
        table.add_column("Value", justify="right")
        for key, value in stats.items():
            table.add_row(key, str(value))
        return table

    def _audit_table(self, audits: List[AuditResult]) -> Table:
        table = Table(title="Audits")
        table.add_column("Audit", style="cyan")
        table.add_column("Status")
        table.add_column("Obligation")
        table.add_column("Detail", overflow="fold")
        for audit in audits:
            style = AUDIT_STYLE[audit.status.value]
            table.add_row(
                audit.name, f"[{style}]{audit.status.value}[/{style}]", escape(audit.obligation), escape(audit.detail)
            )
        return table

    def _counterexample(self, steps: List[Dict[str, Any]]) -> None:
        if not steps:
            return
        self.console.print("[bold]Counterexample[/bold]")
        for entry in steps:
            label = entry.get("label", "start")
            command = entry.get("config", {}).get("command", "abort")
            head = command.splitlines()[0] if command else ""
            self.console.print(f"  {entry['depth']:>3}  [magenta]{escape(label)}[/magenta]  {escape(head)}")

    def _explore(self, report: ExploreReport) -> None:
        data = report.to_dict()
        self.console.print(f"Initial configurations: {report.initial}")
        self.console.print(self._stats_table(data["stats"]))
        if report.audits:
            self.console.print(self._audit_table(report.audits))
        for audit in report.audits:
            self._counterexample(audit.counterexample)
        if report.detail:
            self.console.print(f"[yellow]{escape(report.detail)}[/yellow]")

    def _refinement(self, report: RefinementReport) -> None:
        self.console.print(self._stats_table(report.stats.to_dict()))
        audits = [a for a in (report.refsucc, report.inclusion) if a is not None]
        if audits:
            self.console.print(self._audit_table(audits))
        self._counterexample(report.counterexample)
        if not report.theorem_consistent:
            self.console.print("[bold red]refsucc passed but trace inclusion failed[/bold red]")
        if report.detail:
            self.console.print(f"[yellow]{escape(report.detail)}[/yellow]")

    def _proof(self, report: ProofReport) -> None:
        result = report.result
        table = Table(title=f"Proof check ({report.source})")
        table.add_column("Property", style="cyan")
        table.add_column("Value", overflow="fold")
        table.add_row("Accepted", "yes" if result.accepted else "no")
        table.add_row("Nodes", str(result.nodes))
        table.add_row("Entailments", str(result.entailments))
        if result.permission is not None:
            table.add_row("Ghost permission", str(result.permission))
        if not result.accepted:
            table.add_row("Reason", result.reason.value if result.reason else "")
            table.add_row("Node", f"{result.path} ({result.rule})")
            table.add_row("Obligation", escape(result.obligation))
            table.add_row("Detail", escape(result.detail))
        self.console.print(table)

    def _run(self, report: RunReport) -> None:
        table = Table(title=f"Run ({report.config.scheduler.value}, seed {report.config.seed})")
        table.add_column("#", justify="right")
        table.add_column("Step", style="magenta")
        table.add_column("Choices", justify="right")
        table.add_column("Printed")
        for entry in report.steps:
            printed = "" if entry.printed is None else format_value(decode_value(entry.printed))
            table.add_row(str(entry.index), escape(entry.label), str(entry.choices), escape(printed))
        self.console.print(table)
        output = ", ".join(format_value(decode_value(v)) for v in report.output)
        self.console.print(f"Outcome: {report.outcome.value}   stdOut: [{output}]", markup=False)
        if report.detail:
            self.console.print(f"[yellow]{escape(report.detail)}[/yellow]")

    def _traces(self, report: TraceListing) -> None:
        self.console.print(f"{len(report.traces)} trace(s) up to length {report.max_len}")
        for trace in report.traces:
            items = ", ".join(format_value(decode_value(v)) for v in trace)
            self.console.print(f"  ({items})", markup=False)
        if report.detail:
            self.console.print(f"[yellow]{escape(report.detail)}[/yellow]")

    def _parse(self, report: ParseReport) -> None:
        for parsed in report.files:
            self.console.rule(escape(f"{parsed.path} [{parsed.kind}]"))
            if parsed.text:
                self.console.print(parsed.text, markup=False, highlight=False)
            for key, value in parsed.summary.items():
                self.console.print(f"  {key}: {value}", markup=False)


class ExplorationProgress:
    """Context manager showing depth and state count while exploring.

    Usable as the explorer's progress callback.
    """

    def __init__(self, operation: str, style: str = "rich", console: Optional[Console] = None):
        self.operation = operation
        self.style = style
        self.console = console or Console(stderr=True)
        self.progress: Optional[Progress] = None
        self.task_id = None
        self.start_time = 0.0

    def __enter__(self) -> "ExplorationProgress":
        logger.debug(f"Starting progress tracking for: {self.operation}")
        self.start_time = time.time()
        if self.style == "quiet":
            return self
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            TextColumn("{task.fields[status]}"),
            TimeElapsedColumn(),
            console=self.console,
            transient=True,
        )
        self.progress.start()
        self.task_id = self.progress.add_task(self.operation, status="starting")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        elapsed = time.time() - self.start_time
        logger.debug(f"Finished {self.operation} after {elapsed:.1f}s")
        if self.progress:
            self.progress.stop()

    def __call__(self, depth: int, states: int) -> None:
        if self.progress is not None and self.task_id is not None:
            self.progress.update(self.task_id, status=f"depth {depth}, {states} states")
