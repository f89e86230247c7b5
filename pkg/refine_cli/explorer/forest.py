"""Breadth-first exploration of every interleaving from a set of initial configurations."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..errors import BudgetExceeded, EvalError
from ..lang.ast import Skip
from ..semantics.opsem import (
    DEFAULT_OPTIONS, Abort, Config, Outcome, StepLabel, StepOptions,
    command_vars, is_init, step,
)

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 1_000_000


@dataclass
class Node:
    """One explored configuration.

    Attributes:
        id: Index in the forest
        config: The configuration (or abort)
        depth: Steps from its root
        parent: Node it was first reached from (None for roots)
        label: Label of the edge from parent
        initialized: Whether the ghost lock is declared in its command
        error: Evaluation error that stopped expansion, if any
    """
    id: int
    config: Outcome
    depth: int
    parent: Optional[int] = None
    label: Optional[StepLabel] = None
    initialized: bool = False
    error: str = ""

    @property
    def aborted(self) -> bool:
        return isinstance(self.config, Abort)

    @property
    def terminal(self) -> bool:
        return isinstance(self.config, Config) and isinstance(self.config.command, Skip)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: StepLabel


@dataclass
class ExplorationStats:
    """Counters reported with every exploration."""
    states: int = 0
    edges: int = 0
    dedup_hits: int = 0
    roots: int = 0
    max_depth: int = 0
    truncated: int = 0
    blocked: List[int] = field(default_factory=list)
    errors: List[int] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, timings: bool = False) -> Dict[str, Any]:
        data = {
            "states": self.states,
            "edges": self.edges,
            "dedup_hits": self.dedup_hits,
            "roots": self.roots,
            "max_depth": self.max_depth,
            "truncated": self.truncated,
            "blocked": len(self.blocked),
            "eval_errors": len(self.errors),
        }
        if timings:
            data["wall_time"] = round(self.wall_time, 3)
        return data


class ExecutionForest:
    """Rooted DAG of explored configurations with labelled edges."""

    def __init__(self):
        self.nodes: List[Node] = []
        self.edges: List[Edge] = []
        self.roots: List[int] = []
        self.out: Dict[int, List[int]] = {}
        self.stats = ExplorationStats()
        self._index: Dict[Tuple, int] = {}

    def add_node(self, key: Tuple, config: Outcome, depth: int,
                 parent: Optional[int], label: Optional[StepLabel]) -> Tuple[int, bool]:
        existing = self._index.get(key)
        if existing is not None:
            return existing, False
        node = Node(
            id=len(self.nodes),
            config=config,
            depth=depth,
            parent=parent,
            label=label,
            initialized=isinstance(config, Config) and is_init(config.command),
        )
        self.nodes.append(node)
        self._index[key] = node.id
        self.out[node.id] = []
        self.stats.max_depth = max(self.stats.max_depth, depth)
        return node.id, True

    def add_edge(self, src: int, dst: int, label: StepLabel) -> None:
        self.out[src].append(len(self.edges))
        self.edges.append(Edge(src, dst, label))

    def successors(self, node_id: int) -> List[Edge]:
        return [self.edges[i] for i in self.out.get(node_id, [])]

    def path_to(self, node_id: int) -> List[Node]:
        """Root-to-node path along first-discovery parents (a shortest path)."""
        path: List[Node] = []
        current: Optional[int] = node_id
        while current is not None:
            node = self.nodes[current]
            path.append(node)
            current = node.parent
        return list(reversed(path))

    def aborts(self) -> List[Node]:
        return [n for n in self.nodes if n.aborted]

    def terminals(self) -> List[Node]:
        return [n for n in self.nodes if n.terminal]


def dedup_key(config: Outcome, keep_vars: Iterable[str] = ()) -> Tuple:
    """Identity used to merge configurations: command, relevant stack, heap."""
    if isinstance(config, Abort):
        return ("abort",)
    names = command_vars(config.command) | set(keep_vars)
    return (config.command, config.stack.restrict(names).key(), config.heap.key())


def _expand(config: Outcome, options: StepOptions):
    if isinstance(config, Abort):
        return [], ""
    try:
        return step(config, options), ""
    except EvalError as e:
        return [], str(e)


def explore(inits: Sequence[Config], max_steps: int, options: StepOptions = DEFAULT_OPTIONS,
            state_cap: int = DEFAULT_STATE_CAP, workers: int = 1,
            keep_vars: Iterable[str] = (), progress=None) -> ExecutionForest:
    """All configurations reachable from inits within max_steps steps.

    Frontiers are expanded layer by layer; with several workers the step
    computations of one layer run in a thread pool and are merged in
    frontier order, so the forest does not depend on the worker count.

    Raises:
        BudgetExceeded: more than state_cap configurations were reached
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    keep = tuple(sorted(set(keep_vars)))
    forest = ExecutionForest()
    frontier: List[int] = []
    for cfg in inits:
        node_id, new = forest.add_node(dedup_key(cfg, keep), cfg, 0, None, None)
        if new:
            forest.roots.append(node_id)
            frontier.append(node_id)
        else:
            forest.stats.dedup_hits += 1
    forest.stats.roots = len(forest.roots)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        depth = 0
        while frontier:
            logger.debug(f"Depth {depth}: frontier of {len(frontier)} configurations")
            if depth >= max_steps:
                forest.stats.truncated += sum(
                    1 for n in frontier
                    if not forest.nodes[n].aborted and not forest.nodes[n].terminal
                )
                break
            configs = [forest.nodes[n].config for n in frontier]
            if pool is not None:
                expansions = list(pool.map(lambda c: _expand(c, options), configs))
            else:
                expansions = [_expand(c, options) for c in configs]
            next_frontier: List[int] = []
            for node_id, (successors, error) in zip(frontier, expansions):
                node = forest.nodes[node_id]
                if error:
                    node.error = error
                    forest.stats.errors.append(node_id)
                    continue
                if not successors and not node.aborted and not node.terminal:
                    forest.stats.blocked.append(node_id)
                for label, outcome in successors:
                    child, new = forest.add_node(dedup_key(outcome, keep), outcome, depth + 1, node_id, label)
                    forest.add_edge(node_id, child, label)
                    if new:
                        next_frontier.append(child)
                        if len(forest.nodes) > state_cap:
                            raise BudgetExceeded("states", state_cap)
                    else:
                        forest.stats.dedup_hits += 1
            if progress is not None:
                progress(depth + 1, len(forest.nodes))
            frontier = next_frontier
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown()
    forest.stats.states = len(forest.nodes)
    forest.stats.edges = len(forest.edges)
    logger.info(f"Explored {forest.stats.states} states, {forest.stats.edges} edges")
    return forest


def replay(forest: ExecutionForest, node_id: int, options: StepOptions = DEFAULT_OPTIONS) -> bool:
    """Check that every edge on the path to node_id is a step of its source."""
    path = forest.path_to(node_id)
    for parent, child in zip(path, path[1:]):
        if parent.aborted:
            return False
        found = any(
            label == child.label and (
                (isinstance(outcome, Abort) and child.aborted)
                or (isinstance(outcome, Config) and not child.aborted
                    and dedup_key(outcome) == dedup_key(child.config))
            )
            for label, outcome in step(parent.config, options)
        )
        if not found:
            return False
    return True


def describe_path(path: List[Node]) -> List[Dict[str, Any]]:
    """JSON-ready rendering of a counterexample path."""
    steps = []
    for node in path:
        entry: Dict[str, Any] = {"depth": node.depth}
        if node.label is not None:
            entry["label"] = str(node.label)
        entry["config"] = node.config.to_dict()
        steps.append(entry)
    return steps
