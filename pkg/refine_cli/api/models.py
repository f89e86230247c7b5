"""Run configuration and report models shared by the commands."""

import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import click

from ..explorer.audits import AuditResult, AuditStatus
from ..explorer.forest import DEFAULT_STATE_CAP, ExplorationStats
from ..proof.checker import CheckResult, Reason
from ..semantics.domains import Domains, parse_int_range
from ..utils.config import config_defaults, fixtures_dir

logger = logging.getLogger(__name__)

SCHEMA = "refine-report"
SCHEMA_VERSION = 1

AUDIT_NAMES = (
    "refsucc",
    "trace_inclusion",
    "safety",
    "lock_invariants",
    "erasure",
    "print_before_init",
    "mutual_exclusion",
)


class Status(str, Enum):
    """Overall verdict of a command."""
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"

    @property
    def exit_code(self) -> int:
        return {Status.PASS: 0, Status.FAIL: 1, Status.INCONCLUSIVE: 2}[self]


USAGE_EXIT_CODE = 3


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"


class Scheduler(str, Enum):
    """How `run` picks among the enabled steps."""
    FIRST = "first"
    RANDOM = "random"


def parse_audits(text: str) -> Tuple[str, ...]:
    """Read `all`, `none` or a comma-separated list of audit names."""
    text = text.strip()
    if text == "all":
        return AUDIT_NAMES
    if text in ("none", ""):
        return ()
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [n for n in names if n not in AUDIT_NAMES]
    if unknown:
        raise ValueError(f"unknown audit '{unknown[0]}' (choose from {', '.join(AUDIT_NAMES)})")
    return tuple(n for n in AUDIT_NAMES if n in names)


@dataclass
class RunConfig:
    """Everything one command invocation needs.

    Attributes:
        program: Path of the `.rimp` program
        ats: Path of the `.rats` abstract model
        derivation: Path of a `.rderiv` derivation
        int_lo: Least integer of the bounded domain
        int_hi: Greatest integer of the bounded domain
        addr_count: Ordinary addresses considered
        max_seq_len: Longest sequence enumerated
        max_heap_cells: Largest frame heap enumerated
        max_steps: Exploration depth
        max_trace_len: Longest observable trace compared
        state_cap: Explored configurations allowed before giving up
        workers: Threads expanding each exploration frontier
        seed: Seed of the random scheduler
        scheduler: Step choice of `run`
        output_format: text or json
        audits: Audits `explore` runs
        stutter_close: Close the ATS under stuttering before use
        frames: Add small frame heaps to the initial configurations
        timings: Include wall times in JSON output
        save_report: Persist the report under report_dir
        report_dir: Base directory for saved reports
    """
    program: Optional[Path] = None
    ats: Optional[Path] = None
    derivation: Optional[Path] = None
    int_lo: int = -4
    int_hi: int = 8
    addr_count: int = 4
    max_seq_len: int = 6
    max_heap_cells: int = 2
    max_steps: int = 64
    max_trace_len: int = 6
    state_cap: int = DEFAULT_STATE_CAP
    workers: int = 1
    seed: int = 0
    scheduler: Scheduler = Scheduler.FIRST
    output_format: OutputFormat = OutputFormat.TEXT
    audits: Tuple[str, ...] = AUDIT_NAMES
    stutter_close: bool = True
    frames: bool = False
    timings: bool = False
    save_report: bool = False
    report_dir: Path = Path("./data")

    def domains(self) -> Domains:
        return Domains(
            int_lo=self.int_lo,
            int_hi=self.int_hi,
            addr_count=self.addr_count,
            max_seq_len=self.max_seq_len,
            max_heap_cells=self.max_heap_cells,
        )

    def incompleteness(self) -> Dict[str, Any]:
        """What every verdict is relative to."""
        return {
            "bounded": True,
            "domains": self.domains().to_dict(),
            "max_steps": self.max_steps,
            "max_trace_len": self.max_trace_len,
            "state_cap": self.state_cap,
            "stutter_closed": self.stutter_close,
            "sep_splits": "occurring fractions",
            "frame_heaps": "bounded by max_heap_cells" if self.frames else "not explored",
        }

    @classmethod
    def from_sources(
        cls,
        flags: Mapping[str, Any],
        env: Optional[Mapping[str, Any]] = None,
        user_config: Optional[Mapping[str, Any]] = None,
    ) -> "RunConfig":
        """Merge CLI flags over environment over config.yaml over the defaults.

        Args:
            flags: Command options; None means "not given"
            env: Values from REFINE_* variables (see utils.config.env_overrides)
            user_config: Parsed config.yaml

        Raises:
            click.BadParameter: a value is malformed or out of range
        """
        user_config = user_config or {}
        merged: Dict[str, Any] = {}
        for layer in (config_defaults(user_config), env or {}, flags):
            merged.update({k: v for k, v in layer.items() if v is not None})
        logger.debug(f"Merged run configuration keys: {sorted(merged)}")

        known = {f.name for f in fields(cls)}
        values: Dict[str, Any] = {}
        if "int_range" in merged:
            text = str(merged.pop("int_range"))
            try:
                values["int_lo"], values["int_hi"] = parse_int_range(text)
            except ValueError as e:
                raise click.BadParameter(str(e), param_hint="--int-range") from e
        if "format" in merged:
            merged["output_format"] = merged.pop("format")

        for key in ("addr_count", "max_seq_len", "max_heap_cells", "max_steps",
                    "max_trace_len", "state_cap", "workers", "seed"):
            if key in merged:
                values[key] = _integer(key, merged.pop(key), minimum=None if key == "seed" else 0)
        if values.get("workers", 1) < 1:
            raise click.BadParameter("must be at least 1", param_hint="--workers")

        if "output_format" in merged:
            values["output_format"] = _choice(OutputFormat, merged.pop("output_format"), "--format")
        if "scheduler" in merged:
            values["scheduler"] = _choice(Scheduler, merged.pop("scheduler"), "--scheduler")
        if "audits" in merged:
            audits = merged.pop("audits")
            if isinstance(audits, (list, tuple)):
                audits = ",".join(str(a) for a in audits)
            try:
                values["audits"] = parse_audits(str(audits))
            except ValueError as e:
                raise click.BadParameter(str(e), param_hint="--audits") from e

        fixtures = fixtures_dir(user_config)
        for key in ("program", "ats", "derivation"):
            if merged.get(key) is not None:
                values[key] = _resolve_input(Path(merged.pop(key)), fixtures, key)
        if "report_dir" in merged:
            values["report_dir"] = Path(merged.pop("report_dir"))

        for key in ("stutter_close", "frames", "timings", "save_report"):
            if key in merged:
                values[key] = bool(merged.pop(key))

        ignored = sorted(k for k in merged if k not in known)
        if ignored:
            logger.debug(f"Ignoring configuration keys {ignored}")
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "program": str(self.program) if self.program else None,
            "ats": str(self.ats) if self.ats else None,
            "derivation": str(self.derivation) if self.derivation else None,
            "int_range": f"{self.int_lo}..{self.int_hi}",
            "addr_count": self.addr_count,
            "max_seq_len": self.max_seq_len,
            "max_steps": self.max_steps,
            "max_trace_len": self.max_trace_len,
            "seed": self.seed,
            "audits": list(self.audits),
        }


def _integer(key: str, value: Any, minimum: Optional[int]) -> int:
    hint = "--" + key.replace("_", "-")
    try:
        number = int(value)
    except (TypeError, ValueError) as e:
        raise click.BadParameter(f"'{value}' is not an integer", param_hint=hint) from e
    if minimum is not None and number < minimum:
        raise click.BadParameter(f"must be >= {minimum}", param_hint=hint)
    return number


def _choice(enum_type, value: Any, hint: str):
    try:
        return enum_type(str(value).lower())
    except ValueError as e:
        choices = ", ".join(member.value for member in enum_type)
        raise click.BadParameter(f"'{value}' is not one of {choices}", param_hint=hint) from e


def _resolve_input(path: Path, fixtures: Path, key: str) -> Path:
    """Accept a path as given, or a bare name from the fixtures directory."""
    if path.exists():
        return path
    bundled = fixtures / path
    if bundled.exists():
        logger.debug(f"Using bundled fixture {bundled}")
        return bundled
    raise click.BadParameter(f"file '{path}' does not exist", param_hint=f"--{key}")


# Reports -------------------------------------------------------------------

@dataclass
class Report:
    """Common envelope of every command report.

    Attributes:
        command: Subcommand that produced the report
        status: Overall verdict
        config: Configuration the verdict is relative to
        wall_time: Seconds spent (only serialized with timings)
        warnings: Notes worth surfacing (unsatisfiable precondition, ...)
    """
    command: str
    status: Status
    config: RunConfig
    wall_time: float = 0.0
    warnings: List[str] = field(default_factory=list)

    def body(self) -> Dict[str, Any]:
        return {}

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "command": self.command,
            "verdict": self.status.value,
            "incompleteness": self.config.incompleteness(),
        }
        if self.warnings:
            data["warnings"] = list(self.warnings)
        if self.config.timings:
            data["wall_time"] = round(self.wall_time, 3)
        data.update(self.body())
        return data

    @property
    def exit_code(self) -> int:
        return self.status.exit_code


@dataclass
class ParsedFile:
    """One file read by `parse`."""
    path: str
    kind: str
    summary: Dict[str, Any]
    text: str = ""


@dataclass
class ParseReport(Report):
    files: List[ParsedFile] = field(default_factory=list)

    def body(self) -> Dict[str, Any]:
        return {
            "files": [
                {"path": f.path, "kind": f.kind, "summary": f.summary, "text": f.text}
                for f in self.files
            ]
        }


@dataclass
class RunStep:
    """One scheduled step of `run`."""
    index: int
    label: str
    choices: int
    printed: Optional[Any] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"index": self.index, "label": self.label, "choices": self.choices}
        if self.printed is not None:
            data["printed"] = self.printed
        return data


class RunOutcome(str, Enum):
    """How a scheduled execution ended."""
    TERMINATED = "terminated"
    ABORTED = "aborted"
    BLOCKED = "blocked"
    STEP_LIMIT = "step-limit"
    EVAL_ERROR = "eval-error"


@dataclass
class RunReport(Report):
    """Transcript of one scheduled execution."""
    outcome: RunOutcome = RunOutcome.TERMINATED
    steps: List[RunStep] = field(default_factory=list)
    output: List[Any] = field(default_factory=list)
    initial_choices: int = 0
    detail: str = ""

    def body(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "scheduler": self.config.scheduler.value,
            "seed": self.config.seed,
            "outcome": self.outcome.value,
            "initial_configurations": self.initial_choices,
            "steps": [s.to_dict() for s in self.steps],
            "output": self.output,
        }
        if self.detail:
            data["detail"] = self.detail
        return data


@dataclass
class ExploreReport(Report):
    """Forest statistics plus the selected audits."""
    stats: ExplorationStats = field(default_factory=ExplorationStats)
    initial: int = 0
    audits: List[AuditResult] = field(default_factory=list)
    detail: str = ""

    def body(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "initial_configurations": self.initial,
            "stats": self.stats.to_dict(self.config.timings),
            "audits": [a.to_dict() for a in self.audits],
        }
        if self.detail:
            data["detail"] = self.detail
        return data


@dataclass
class RefinementReport(Report):
    """refsucc and trace inclusion over one explored forest.

    Attributes:
        refsucc: Per-step refinement audit
        inclusion: Bounded trace-inclusion audit
        stats: Exploration counters
        theorem_consistent: False when refsucc passed but inclusion failed
    """
    refsucc: Optional[AuditResult] = None
    inclusion: Optional[AuditResult] = None
    stats: ExplorationStats = field(default_factory=ExplorationStats)
    theorem_consistent: bool = True
    detail: str = ""

    @property
    def counterexample(self) -> List[Dict[str, Any]]:
        for audit in (self.refsucc, self.inclusion):
            if audit is not None and audit.status == AuditStatus.FAIL:
                return audit.counterexample
        return []

    def body(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "stats": self.stats.to_dict(self.config.timings),
            "refsucc": self.refsucc.to_dict() if self.refsucc else None,
            "trace_inclusion": self.inclusion.to_dict() if self.inclusion else None,
            "theorem_consistent": self.theorem_consistent,
        }
        if self.detail:
            data["detail"] = self.detail
        return data


@dataclass
class ProofReport(Report):
    """Outcome of `check-proof`."""
    result: CheckResult = field(default_factory=lambda: CheckResult(False))
    source: str = "derivation"

    def body(self) -> Dict[str, Any]:
        return {"source": self.source, "result": self.result.to_dict()}


@dataclass
class TraceListing(Report):
    """Observable traces of an ATS up to a length bound."""
    max_len: int = 0
    traces: List[List[Any]] = field(default_factory=list)
    detail: str = ""

    def body(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"max_len": self.max_len, "count": len(self.traces), "traces": self.traces}
        if self.detail:
            data["detail"] = self.detail
        return data


def proof_status(result: CheckResult) -> Status:
    if result.accepted:
        return Status.PASS
    if result.reason == Reason.ENTAILMENT_INCONCLUSIVE:
        return Status.INCONCLUSIVE
    return Status.FAIL


def combined_status(results: Sequence[AuditResult]) -> Status:
    statuses = [r.status for r in results]
    if AuditStatus.FAIL in statuses:
        return Status.FAIL
    if AuditStatus.INCONCLUSIVE in statuses:
        return Status.INCONCLUSIVE
    return Status.PASS


__all__ = [
    "AUDIT_NAMES", "CheckResult", "ExploreReport", "OutputFormat", "ParseReport", "ParsedFile",
    "ProofReport", "Reason", "RefinementReport", "Report", "RunConfig", "RunOutcome", "RunReport",
    "RunStep", "Scheduler", "Status", "TraceListing", "USAGE_EXIT_CODE", "combined_status",
    "parse_audits", "proof_status",
]
