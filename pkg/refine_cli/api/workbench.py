"""Facade wiring the language, semantics, explorer and proof layers into workflows."""

import logging
import random
import time
from collections import Counter
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple

from ..errors import BudgetExceeded, RefineError
from ..explorer.audits import (
    AuditResult, AuditStatus, audit_erasure, audit_lock_invariants, audit_mutual_exclusion,
    audit_print_before_init, audit_safety, check_refsucc, check_trace_inclusion,
)
from ..explorer.forest import ExecutionForest, explore
from ..explorer.initial import InitialConfigSet, initial_configs, small_frames
from ..lang.assertions import TRUE_A, alpha_equal, free_vars
from ..lang.ast import Program, Skip
from ..lang.derivation_io import Derivation, load_derivation, save_derivation
from ..lang.parser import parse_ats, parse_program
from ..lang.pretty import format_ats, format_program
from ..lang.wellformed import check_continuously_initialized, ghost_flows, require_continuously_initialized
from ..proof.checker import CheckResult, Reason, check_derivation
from ..proof.elaborate import outline_derivation
from ..semantics.ats import ATSSpec, encode_trace, enumerate_traces, stutter_close
from ..semantics.domains import Domains
from ..semantics.heap import PermHeap
from ..semantics.opsem import ABORT, Config, StepOptions, step
from ..semantics.values import STDOUT, encode_value
from .models import (
    ExploreReport, ParsedFile, ParseReport, ProofReport, RefinementReport, RunConfig,
    RunOutcome, RunReport, RunStep, Scheduler, Status, TraceListing, combined_status, proof_status,
)

logger = logging.getLogger(__name__)

Progress = Callable[[int, int], None]


class Workbench:
    """Runs the workbench commands for one RunConfig.

    Attributes:
        config: Bounds, inputs and toggles of this invocation
    """

    def __init__(self, config: RunConfig):
        self.config = config
        logger.debug(f"Workbench configured with {config.to_dict()}")

    # Inputs ----------------------------------------------------------------

    def load_program(self, path: Optional[Path] = None) -> Program:
        """Parse a program and require it to be continuously initialized."""
        source = self._require(path or self.config.program, "--program")
        logger.info(f"Loading program {source}")
        program = parse_program(source.read_text(encoding="utf-8"), str(source))
        require_continuously_initialized(program.command)
        return program

    def load_ats(self, path: Optional[Path] = None) -> ATSSpec:
        source = self._require(path or self.config.ats, "--ats")
        logger.info(f"Loading abstract model {source}")
        spec = parse_ats(source.read_text(encoding="utf-8"), str(source))
        return stutter_close(spec) if self.config.stutter_close else spec

    @staticmethod
    def _require(path: Optional[Path], flag: str) -> Path:
        if path is None:
            raise RefineError(f"{flag} is required for this command")
        return Path(path)

    def domains(self, program: Optional[Program] = None, ats: Optional[ATSSpec] = None) -> Domains:
        d = self.config.domains()
        if program is not None:
            d = d.with_ghosts(program.ghosts)
        if ats is not None:
            d = d.with_ghosts(ats.ghost_names(), ats.ghost_types())
        return d

    def step_options(self) -> StepOptions:
        return StepOptions(addr_count=self.config.addr_count)

    def initial(self, program: Program, d: Domains) -> InitialConfigSet:
        frames = small_frames(d) if self.config.frames else None
        return initial_configs(program.command, program.pre, (), d, frames)

    # parse -----------------------------------------------------------------

    def parse(self, paths: Sequence[Path]) -> ParseReport:
        """Parse each file by its suffix and summarize what was read."""
        files: List[ParsedFile] = []
        for path in paths:
            path = Path(path)
            text = path.read_text(encoding="utf-8")
            if path.suffix == ".rats":
                spec = parse_ats(text, str(path))
                files.append(ParsedFile(str(path), "ats", spec.to_dict(), format_ats(spec)))
            elif path.suffix == ".rderiv":
                derivation = load_derivation(path)
                rules = Counter(node.rule for _, node in derivation.root.walk())
                summary = {
                    "nodes": derivation.root.size(),
                    "ghosts": list(derivation.ghosts),
                    "rules": dict(sorted(rules.items())),
                }
                files.append(ParsedFile(str(path), "derivation", summary))
            else:
                program = parse_program(text, str(path))
                shape = check_continuously_initialized(program.command)
                summary = {
                    "ghosts": list(program.ghosts),
                    "locks": sorted(program.declared_locks()),
                    "init_shape": shape.shape.value,
                    "ghost_flows": len(ghost_flows(program.command)),
                }
                files.append(ParsedFile(str(path), "program", summary, format_program(program)))
        return ParseReport("parse", Status.PASS, self.config, files=files)

    # run -------------------------------------------------------------------

    def run(self, program: Program) -> RunReport:
        """Execute one schedule from one initial configuration."""
        started = time.perf_counter()
        d = self.domains(program)
        inits = self.initial(program, d)
        report = RunReport("run", Status.PASS, self.config, warnings=list(inits.warnings),
                           initial_choices=len(inits))
        if not inits.configs:
            report.status = Status.INCONCLUSIVE
            report.outcome = RunOutcome.BLOCKED
            report.detail = "no initial configuration"
            return report
        rng = random.Random(self.config.seed)
        pick = self._chooser(rng)
        cfg: Any = pick(inits.configs)
        options = self.step_options()
        printed = _output(cfg.heap)
        report.outcome = RunOutcome.STEP_LIMIT
        for index in range(self.config.max_steps):
            if cfg is ABORT:
                report.outcome = RunOutcome.ABORTED
                break
            try:
                successors = step(cfg, options)
            except RefineError as e:
                report.outcome = RunOutcome.EVAL_ERROR
                report.detail = str(e)
                break
            if not successors:
                report.outcome = RunOutcome.TERMINATED if _finished(cfg) else RunOutcome.BLOCKED
                break
            label, cfg = pick(successors)
            entry = RunStep(index, str(label), len(successors))
            if cfg is not ABORT:
                now = _output(cfg.heap)
                if len(now) > len(printed):
                    entry.printed = encode_value(now[-1])
                printed = now
            else:
                report.detail = str(label)
            report.steps.append(entry)
        else:
            if cfg is ABORT:
                report.outcome = RunOutcome.ABORTED
            elif _finished(cfg):
                report.outcome = RunOutcome.TERMINATED
        report.output = [encode_value(v) for v in printed]
        if report.outcome in (RunOutcome.ABORTED, RunOutcome.EVAL_ERROR):
            report.status = Status.FAIL
        report.wall_time = time.perf_counter() - started
        logger.info(f"Run ended ({report.outcome.value}) after {len(report.steps)} steps")
        return report

    def _chooser(self, rng: random.Random):
        if self.config.scheduler == Scheduler.RANDOM:
            return rng.choice
        return lambda options: options[0]

    # explore ---------------------------------------------------------------

    def explore(self, program: Program, d: Domains,
                progress: Optional[Progress] = None) -> Tuple[ExecutionForest, InitialConfigSet]:
        """Raises BudgetExceeded when the state cap is hit."""
        inits = self.initial(program, d)
        forest = explore(
            inits.configs,
            self.config.max_steps,
            self.step_options(),
            state_cap=self.config.state_cap,
            workers=self.config.workers,
            keep_vars=free_vars(program.post),
            progress=progress,
        )
        return forest, inits

    def explore_report(self, program: Program, ats: Optional[ATSSpec] = None,
                       progress: Optional[Progress] = None) -> ExploreReport:
        started = time.perf_counter()
        d = self.domains(program, ats)
        report = ExploreReport("explore", Status.PASS, self.config)
        try:
            forest, inits = self.explore(program, d, progress)
        except BudgetExceeded as e:
            report.status = Status.INCONCLUSIVE
            report.detail = str(e)
            report.wall_time = time.perf_counter() - started
            return report
        report.stats = forest.stats
        report.initial = len(inits)
        report.warnings = list(inits.warnings)
        for name in self.config.audits:
            report.audits.append(self._audit(name, program, ats, forest, inits, d))
        report.status = combined_status(report.audits)
        if forest.stats.truncated and report.status == Status.PASS:
            report.warnings.append(f"{forest.stats.truncated} configuration(s) cut off at max steps")
        report.wall_time = time.perf_counter() - started
        forest.stats.wall_time = report.wall_time
        return report

    def _audit(self, name: str, program: Program, ats: Optional[ATSSpec], forest: ExecutionForest,
               inits: InitialConfigSet, d: Domains) -> AuditResult:
        logger.debug(f"Running audit {name}")
        if name in ("refsucc", "trace_inclusion") and ats is None:
            return AuditResult(name, AuditStatus.SKIPPED, detail="no abstract model given (--ats)")
        if name == "refsucc":
            return check_refsucc(forest, ats, d)
        if name == "trace_inclusion":
            return check_trace_inclusion(forest, ats, self.config.max_trace_len, d)
        if name == "safety":
            return audit_safety(forest, program.post, d)
        if name == "lock_invariants":
            return audit_lock_invariants(forest, program.lock_invariants(), d, ats)
        if name == "erasure":
            return audit_erasure(
                program, inits.configs, self.config.max_steps, self.step_options(),
                self.config.state_cap, self.config.workers, original=forest,
            )
        if name == "print_before_init":
            return audit_print_before_init(forest)
        if name == "mutual_exclusion":
            return audit_mutual_exclusion(forest)
        raise RefineError(f"unknown audit '{name}'")

    # check-refinement ------------------------------------------------------

    def check_refinement(self, program: Program, ats: ATSSpec,
                         progress: Optional[Progress] = None) -> RefinementReport:
        """refsucc and trace inclusion on one forest, cross-checked against each other."""
        started = time.perf_counter()
        d = self.domains(program, ats)
        report = RefinementReport("check-refinement", Status.PASS, self.config)
        try:
            forest, inits = self.explore(program, d, progress)
        except BudgetExceeded as e:
            report.status = Status.INCONCLUSIVE
            report.detail = str(e)
            report.wall_time = time.perf_counter() - started
            return report
        report.warnings = list(inits.warnings)
        report.stats = forest.stats
        report.refsucc = check_refsucc(forest, ats, d)
        report.inclusion = check_trace_inclusion(forest, ats, self.config.max_trace_len, d)
        if report.refsucc.status == AuditStatus.PASS and report.inclusion.status == AuditStatus.FAIL:
            report.theorem_consistent = False
            logger.error("refsucc holds but trace inclusion fails; the two checks disagree")
        report.status = combined_status([report.refsucc, report.inclusion])
        report.wall_time = time.perf_counter() - started
        forest.stats.wall_time = report.wall_time
        return report

    # check-proof / export-derivation ---------------------------------------

    def derivation_for(self, program: Program, ats: Optional[ATSSpec]) -> Derivation:
        """The outline elaborated into a derivation (MissingAnnotation if it cannot be)."""
        return outline_derivation(program, ats, self.domains(program, ats))

    def check_proof(self, program: Program, ats: Optional[ATSSpec] = None,
                    derivation_path: Optional[Path] = None) -> ProofReport:
        started = time.perf_counter()
        d = self.domains(program, ats)
        if derivation_path is not None:
            derivation = load_derivation(derivation_path)
            source = "derivation"
        else:
            derivation = self.derivation_for(program, ats)
            source = "outline"
        result = self._concludes(derivation, program) or check_derivation(derivation.root, d, ats)
        report = ProofReport("check-proof", proof_status(result), self.config, result=result, source=source)
        report.wall_time = time.perf_counter() - started
        return report

    @staticmethod
    def _concludes(derivation: Derivation, program: Program) -> Optional[CheckResult]:
        """A rejection when the root does not prove the program's own triple."""
        root = derivation.root
        problem = ""
        if root.command != program.command:
            problem = "the root command is not the program"
        elif not alpha_equal(root.pre, program.pre):
            problem = "the root precondition is not the program's precondition"
        elif not alpha_equal(program.post, TRUE_A) and not alpha_equal(root.post, program.post):
            problem = "the root postcondition is not the program's postcondition"
        elif root.env:
            problem = "the root lock environment must be empty"
        if not problem:
            return None
        return CheckResult(
            accepted=False, reason=Reason.RULE_SHAPE_MISMATCH, path="0", rule=root.rule,
            obligation="ConcludesProgram", detail=problem, nodes=root.size(),
        )

    def export_derivation(self, program: Program, ats: Optional[ATSSpec], target: Path) -> Path:
        return save_derivation(self.derivation_for(program, ats), target)

    # enumerate-ats ---------------------------------------------------------

    def enumerate_ats(self, ats: ATSSpec, max_len: int) -> TraceListing:
        started = time.perf_counter()
        d = self.domains(ats=ats)
        report = TraceListing("enumerate-ats", Status.PASS, self.config, max_len=max_len)
        try:
            report.traces = [encode_trace(t) for t in enumerate_traces(ats, max_len, d)]
        except BudgetExceeded as e:
            report.status = Status.INCONCLUSIVE
            report.detail = str(e)
        report.wall_time = time.perf_counter() - started
        return report


def _output(heap: PermHeap) -> Tuple:
    cell = heap.get(STDOUT)
    if cell is None or not isinstance(cell.value, tuple):
        return ()
    return cell.value


def _finished(cfg: Any) -> bool:
    return isinstance(cfg, Config) and isinstance(cfg.command, Skip)
