"""Refinement and safety audits over an explored forest."""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from ..errors import BudgetExceeded
from ..lang.assertions import Assertion, Sep, TRUE_A
from ..lang.ast import GHOST_LOCK, Program, Within, walk_command
from ..lang.wellformed import ghost_flows
from ..semantics.assertion_eval import eval_assertion
from ..semantics.ats import ATSSpec, Trace, enumerate_traces, is_initial, is_transition, trace_key
from ..semantics.domains import Budget, Domains
from ..semantics.heap import UNDEFINED, get_state
from ..semantics.opsem import DEFAULT_OPTIONS, Config, StepOptions, erase_ghost, reads
from ..semantics.values import STDOUT, encode_value, format_value, value_key
from .forest import Edge, ExecutionForest, Node, describe_path, explore

logger = logging.getLogger(__name__)


class AuditStatus(str, Enum):
    """Outcome of one audit."""
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
    SKIPPED = "skipped"


@dataclass
class AuditResult:
    """Verdict of one audit.

    Attributes:
        name: Audit identifier
        status: pass / fail / inconclusive / skipped
        obligation: Violated (or undecided) obligation
        detail: Human-readable explanation
        counterexample: Root-to-violation path of configurations and labels
        data: Audit-specific extras
    """
    name: str
    status: AuditStatus
    obligation: str = ""
    detail: str = ""
    counterexample: List[Dict[str, Any]] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status in (AuditStatus.PASS, AuditStatus.SKIPPED)

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"name": self.name, "status": self.status.value}
        if self.obligation:
            result["obligation"] = self.obligation
        if self.detail:
            result["detail"] = self.detail
        if self.counterexample:
            result["counterexample"] = self.counterexample
        if self.data:
            result["data"] = self.data
        return result


def combine(results: Iterable[AuditResult]) -> AuditStatus:
    statuses = [r.status for r in results]
    if AuditStatus.FAIL in statuses:
        return AuditStatus.FAIL
    if AuditStatus.INCONCLUSIVE in statuses:
        return AuditStatus.INCONCLUSIVE
    return AuditStatus.PASS


def edge_path(forest: ExecutionForest, edge: Edge) -> List[Dict[str, Any]]:
    """Counterexample ending with the given edge."""
    steps = describe_path(forest.path_to(edge.src))
    dst = forest.nodes[edge.dst]
    steps.append({
        "depth": forest.nodes[edge.src].depth + 1,
        "label": str(edge.label),
        "config": dst.config.to_dict(),
    })
    return steps


def _edges_bfs(forest: ExecutionForest) -> List[Edge]:
    """Edges ordered by source depth, then discovery order."""
    return sorted(forest.edges, key=lambda e: forest.nodes[e.src].depth)


# refsucc -------------------------------------------------------------------

def check_refsucc(forest: ExecutionForest, ats: ATSSpec, d: Domains) -> AuditResult:
    """Initialized steps satisfy Next; the initializing step satisfies Init."""
    if not ats.stutter_closed:
        logger.warning("refsucc checked against an ATS that is not stutter-closed")
    transition_cache: Dict[Tuple, bool] = {}
    initial_cache: Dict[Tuple, bool] = {}
    checked = 0
    for edge in _edges_bfs(forest):
        src, dst = forest.nodes[edge.src], forest.nodes[edge.dst]
        if dst.aborted or not isinstance(src.config, Config):
            continue
        if src.initialized:
            before, after = get_state(src.config.heap, ats), get_state(dst.config.heap, ats)
            if before is UNDEFINED or after is UNDEFINED:
                return AuditResult(
                    "refsucc", AuditStatus.FAIL, "MissingGhostState",
                    "an initialized configuration lacks a ghost cell of the ATS state",
                    edge_path(forest, edge),
                )
            key = (tuple(value_key(v) for v in before), tuple(value_key(v) for v in after))
            if key not in transition_cache:
                transition_cache[key] = is_transition(before, after, ats, d)
            checked += 1
            if not transition_cache[key]:
                return AuditResult(
                    "refsucc", AuditStatus.FAIL, "Next",
                    f"step {edge.label} moves the abstract state from {_state_text(before)} "
                    f"to {_state_text(after)}, which Next does not allow",
                    edge_path(forest, edge),
                )
        elif dst.initialized:
            after = get_state(dst.config.heap, ats)
            if after is UNDEFINED:
                return AuditResult(
                    "refsucc", AuditStatus.FAIL, "MissingGhostState",
                    "the initializing step leaves a ghost cell of the ATS state unallocated",
                    edge_path(forest, edge),
                )
            key = tuple(value_key(v) for v in after)
            if key not in initial_cache:
                initial_cache[key] = is_initial(after, ats, d)
            checked += 1
            if not initial_cache[key]:
                return AuditResult(
                    "refsucc", AuditStatus.FAIL, "Init",
                    f"initialization starts from {_state_text(after)}, which Init does not allow",
                    edge_path(forest, edge),
                )
    return AuditResult("refsucc", AuditStatus.PASS, data={"edges_checked": checked})


def _state_text(state) -> str:
    return "(" + ", ".join(format_value(v) for v in state) + ")"


# Traces --------------------------------------------------------------------

def observation(node: Node) -> Tuple:
    """Obs: the stdOut contents once initialized, nothing otherwise."""
    if node.aborted or not node.initialized:
        return ()
    cell = node.config.heap.get(STDOUT)
    return () if cell is None else (cell.value,)


@dataclass
class ProgramTraces:
    """Observable traces of the explored executions, with a witness path per trace."""
    traces: Dict[Tuple, Trace]
    witnesses: Dict[Tuple, List[Dict[str, Any]]]

    def sorted(self) -> List[Trace]:
        return [self.traces[k] for k in sorted(self.traces)]


def program_traces(forest: ExecutionForest, max_len: Optional[int] = None) -> ProgramTraces:
    """Project every rooted path through Obs (traces longer than max_len are cut)."""
    traces: Dict[Tuple, Trace] = {}
    parents: Dict[Tuple, Optional[Tuple]] = {}
    frontier = deque()

    def visit(node_id: int, trace: Trace, parent: Optional[Tuple]) -> None:
        if max_len is not None and len(trace) > max_len:
            return
        key = (node_id, trace_key(trace))
        if key in parents:
            return
        parents[key] = parent
        traces.setdefault(trace_key(trace), trace)
        frontier.append((node_id, trace, key))

    for root in forest.roots:
        visit(root, observation(forest.nodes[root]), None)
    while frontier:
        node_id, trace, key = frontier.popleft()
        for edge in forest.successors(node_id):
            visit(edge.dst, trace + observation(forest.nodes[edge.dst]), key)

    witnesses: Dict[Tuple, List[Dict[str, Any]]] = {}
    for key in parents:
        tkey = key[1]
        if tkey in witnesses:
            continue
        chain: List[int] = []
        current: Optional[Tuple] = key
        while current is not None:
            chain.append(current[0])
            current = parents[current]
        witnesses[tkey] = [{"node": n, "depth": forest.nodes[n].depth} for n in reversed(chain)]
    return ProgramTraces(traces, witnesses)


def _witness_path(forest: ExecutionForest, chain: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    steps = []
    previous: Optional[int] = None
    for entry in chain:
        node = forest.nodes[entry["node"]]
        item: Dict[str, Any] = {"depth": node.depth, "config": node.config.to_dict()}
        if previous is not None:
            labels = [e.label for e in forest.successors(previous) if e.dst == node.id]
            if labels:
                item["label"] = str(labels[0])
        steps.append(item)
        previous = node.id
    return steps


def check_trace_inclusion(forest: ExecutionForest, ats: ATSSpec, max_len: int, d: Domains,
                          budget: Optional[Budget] = None) -> AuditResult:
    """Every program trace of length ≤ max_len is a trace of the ATS."""
    try:
        abstract = {trace_key(t) for t in enumerate_traces(ats, max_len, d, budget)}
    except BudgetExceeded as e:
        return AuditResult("trace_inclusion", AuditStatus.INCONCLUSIVE, "ATSTraces", str(e))
    concrete = program_traces(forest, max_len)
    missing = sorted(k for k in concrete.traces if k not in abstract)
    data = {"program_traces": len(concrete.traces), "ats_traces": len(abstract)}
    if missing:
        first = concrete.traces[missing[0]]
        return AuditResult(
            "trace_inclusion", AuditStatus.FAIL, "TraceInclusion",
            "program trace " + "[" + ", ".join(format_value(v) for v in first) + "] is not an ATS trace",
            _witness_path(forest, concrete.witnesses[missing[0]]),
            dict(data, trace=[encode_value(v) for v in first]),
        )
    return AuditResult("trace_inclusion", AuditStatus.PASS, data=data)


# Safety --------------------------------------------------------------------

def audit_safety(forest: ExecutionForest, post: Assertion, d: Domains) -> AuditResult:
    """Nothing aborts, accesses stay in the heap, and terminal states satisfy post."""
    checks: Dict[str, Tuple[str, str, List[Dict[str, Any]]]] = {}
    for edge in _edges_bfs(forest):
        if forest.nodes[edge.dst].aborted:
            checks["no_abort"] = ("NoAbort", f"execution aborts by {edge.label}", edge_path(forest, edge))
            break
    if "no_abort" not in checks and forest.stats.errors:
        node_id = forest.stats.errors[0]
        checks["no_abort"] = (
            "NoAbort", f"evaluation error: {forest.nodes[node_id].error}",
            describe_path(forest.path_to(node_id)),
        )
    for node in forest.nodes:
        if node.aborted:
            continue
        outside = reads(node.config.command, node.config.stack) - set(node.config.heap.addresses())
        if outside:
            checks["access_in_domain"] = (
                "AccessInDomain",
                "next step accesses " + ", ".join(sorted(str(a) for a in outside)) + " outside the heap",
                describe_path(forest.path_to(node.id)),
            )
            break
    framed_post = Sep(post, TRUE_A)
    inconclusive = ""
    try:
        for node in forest.terminals():
            if not eval_assertion(node.config.stack, node.config.heap, framed_post, d):
                checks["postcondition"] = (
                    "Postcondition", "terminal configuration does not satisfy the postcondition",
                    describe_path(forest.path_to(node.id)),
                )
                break
    except BudgetExceeded as e:
        inconclusive = str(e)
    data: Dict[str, Any] = {"terminals": len(forest.terminals())}
    for name in ("no_abort", "access_in_domain", "postcondition"):
        data[name] = "fail" if name in checks else "pass"
    if inconclusive and "postcondition" not in checks:
        data["postcondition"] = "inconclusive"
    for name in ("no_abort", "access_in_domain", "postcondition"):
        if name in checks:
            obligation, detail, path = checks[name]
            return AuditResult("safety", AuditStatus.FAIL, obligation, detail, path, data)
    if inconclusive:
        return AuditResult("safety", AuditStatus.INCONCLUSIVE, "Postcondition", inconclusive, data=data)
    return AuditResult("safety", AuditStatus.PASS, data=data)


def audit_lock_invariants(forest: ExecutionForest, invariants: Dict[str, Assertion],
                          d: Domains, ats: Optional[ATSSpec] = None) -> AuditResult:
    """Lock invariants hold at every release; the ghost invariant at every init and next."""
    checked = 0
    try:
        for edge in _edges_bfs(forest):
            dst = forest.nodes[edge.dst]
            if dst.aborted:
                continue
            leaf = edge.label.rule
            if leaf == "WithinS":
                lock = edge.label.detail
            elif leaf in ("Init", "Next"):
                lock = GHOST_LOCK
            else:
                continue
            inv = invariants.get(lock)
            if inv is None:
                continue
            checked += 1
            cfg = dst.config
            if not eval_assertion(cfg.stack, cfg.heap, Sep(inv, TRUE_A), d):
                name = "ghost invariant" if lock == GHOST_LOCK else f"invariant of lock {lock}"
                return AuditResult(
                    "lock_invariants", AuditStatus.FAIL, f"Invariant({lock})",
                    f"{name} does not hold after {edge.label}",
                    edge_path(forest, edge),
                )
            if leaf == "Init" and ats is not None:
                state = get_state(cfg.heap, ats)
                if state is UNDEFINED or not is_initial(state, ats, d):
                    return AuditResult(
                        "lock_invariants", AuditStatus.FAIL, "InitState",
                        "ghost state does not satisfy Init when initialization starts",
                        edge_path(forest, edge),
                    )
    except BudgetExceeded as e:
        return AuditResult("lock_invariants", AuditStatus.INCONCLUSIVE, "Invariant", str(e))
    return AuditResult("lock_invariants", AuditStatus.PASS, data={"releases_checked": checked})


# Erasure -------------------------------------------------------------------

def printed_outputs(forest: ExecutionForest) -> Dict[Tuple, Tuple]:
    """stdOut contents of every explored configuration.

    Only prints append to stdOut, so the contents at a node are exactly the
    output printed along the schedule that reached it. The result is the
    prefix-closed set of per-schedule output sequences, keyed for sorting.
    """
    outputs: Dict[Tuple, Tuple] = {}
    for node in forest.nodes:
        if node.aborted:
            continue
        cell = node.config.heap.get(STDOUT)
        if cell is not None and isinstance(cell.value, tuple):
            outputs.setdefault(trace_key(cell.value), cell.value)
    return outputs


def audit_erasure(program: Program, inits: Sequence[Config], max_steps: int,
                  options: StepOptions = DEFAULT_OPTIONS, state_cap: int = 1_000_000,
                  workers: int = 1, original: Optional[ExecutionForest] = None) -> AuditResult:
    """Erasing ghost code does not change what gets printed.

    Compares the sets of output sequences the two forests reach, one per
    explored schedule prefix (see printed_outputs), so a sequence printed
    in either program must be printed by some schedule of the other. The
    erased program needs fewer steps per print, so it is only compared up
    to one print short of the longest output the original reached.
    """
    flows = ghost_flows(program.command)
    if flows:
        return AuditResult(
            "erasure", AuditStatus.SKIPPED, "GhostFlowsToControl",
            f"{len(flows)} command(s) read ghost state outside ghost code; erasure is not meaningful",
            data={"warning": "GhostFlowsToControl"},
        )
    try:
        if original is None:
            original = explore(inits, max_steps, options, state_cap, workers)
        erased_inits = [Config(erase_ghost(c.command), c.stack, c.heap) for c in inits]
        erased = explore(erased_inits, max_steps, options, state_cap, workers)
    except BudgetExceeded as e:
        return AuditResult("erasure", AuditStatus.INCONCLUSIVE, "Erasure", str(e))
    with_ghost = printed_outputs(original)
    without_ghost = printed_outputs(erased)
    longest = max((len(v) for v in with_ghost.values()), default=0)
    missing = sorted(k for k in with_ghost if k not in without_ghost)
    extra = sorted(k for k, v in without_ghost.items() if len(v) < longest and k not in with_ghost)
    data = {"outputs": len(with_ghost), "erased_outputs": len(without_ghost)}
    if missing or extra:
        culprit = with_ghost[missing[0]] if missing else without_ghost[extra[0]]
        side = "only with" if missing else "only without"
        return AuditResult(
            "erasure", AuditStatus.FAIL, "Erasure",
            f"output [{', '.join(format_value(v) for v in culprit)}] is printed {side} ghost code",
            data=data,
        )
    return AuditResult("erasure", AuditStatus.PASS, data=data)


# Ghost discipline ----------------------------------------------------------

def audit_print_before_init(forest: ExecutionForest) -> AuditResult:
    """No print happens before the program is initialized."""
    for edge in _edges_bfs(forest):
        if edge.label.rule in ("Print", "PrintA") and not forest.nodes[edge.src].initialized:
            return AuditResult(
                "print_before_init", AuditStatus.FAIL, "PrintBeforeInit",
                "print executed before init", edge_path(forest, edge),
            )
    return AuditResult("print_before_init", AuditStatus.PASS)


def audit_mutual_exclusion(forest: ExecutionForest) -> AuditResult:
    """No lock is held by two parallel branches at once."""
    for node in forest.nodes:
        if node.aborted:
            continue
        held: Set[str] = set()
        for sub in walk_command(node.config.command):
            if isinstance(sub, Within):
                if sub.lock in held:
                    return AuditResult(
                        "mutual_exclusion", AuditStatus.FAIL, "MutualExclusion",
                        f"lock {sub.lock} is held twice", describe_path(forest.path_to(node.id)),
                    )
                held.add(sub.lock)
    return AuditResult("mutual_exclusion", AuditStatus.PASS)
