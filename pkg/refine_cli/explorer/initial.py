"""Initial configurations of a program under a precondition and lock environment."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from ..errors import BudgetExceeded
from ..lang.assertions import Assertion, free_vars, sep_all
from ..lang.ast import Command
from ..semantics.assertion_eval import Evaluator, enumerate_stacks, var_types, query_perms
from ..semantics.domains import Budget, Domains
from ..semantics.heap import EMPTY_HEAP, UNDEFINED, Cell, PermHeap, heap_add, normal_completion
from ..semantics.opsem import Config
from ..semantics.values import Addr

logger = logging.getLogger(__name__)

LockEnv = Sequence[Tuple[str, Assertion]]


@dataclass
class InitialConfigSet:
    """The configurations exploration starts from.

    Attributes:
        configs: Distinct initial configurations, in generation order
        warnings: Notes for the report (e.g. an unsatisfiable precondition)
        completed: How many sums needed topping up to a normal heap
    """
    configs: List[Config] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    completed: int = 0

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)


def small_frames(d: Domains) -> List[PermHeap]:
    """The empty frame plus one-cell frames on the last ordinary address."""
    if d.addr_count == 0:
        return [EMPTY_HEAP]
    last = Addr(d.addr_count - 1)
    return [EMPTY_HEAP] + [PermHeap({last: Cell(1, v)}) for v in d.frame_values()[:2]]


def initial_configs(c: Command, p: Assertion, env: LockEnv, d: Domains,
                    frame_pool: Optional[Iterable[PermHeap]] = None,
                    budget: Optional[Budget] = None) -> InitialConfigSet:
    """(c, s, h ⊕ hS ⊕ hF) with s, h ⊨ p, s, hS ⊨ ⊛ env, and hF from the pool.

    Stacks range over the free variables of p and env; every other variable
    starts at the stack default. Sums that are not normal are topped up.

    Raises:
        BudgetExceeded: generating models ran past the budget
    """
    frames = list(frame_pool) if frame_pool is not None else [EMPTY_HEAP]
    shared = sep_all(inv for _, inv in env)
    evaluator = Evaluator(d, budget or Budget(d.node_limit, "initial"), query_perms(p, shared))
    names = sorted(free_vars(p) | free_vars(shared))
    types = var_types(names, [p, shared], d)
    result = InitialConfigSet()
    seen: Set[Tuple] = set()
    for s in enumerate_stacks(names, types, d, evaluator, pin_from=p):
        for h in evaluator.models(s, p):
            for hs in evaluator.models(s, shared):
                base = heap_add(h, hs)
                if base is UNDEFINED:
                    continue
                for hf in frames:
                    total = heap_add(base, hf)
                    if total is UNDEFINED:
                        continue
                    if not total.is_normal():
                        topped = heap_add(total, normal_completion(total))
                        if topped is UNDEFINED:
                            continue
                        total = topped
                        result.completed += 1
                    key = (s.key(), total.key())
                    if key in seen:
                        continue
                    seen.add(key)
                    result.configs.append(Config(c, s, total))
    if not result.configs:
        result.warnings.append("precondition has no model within the domains; nothing to explore")
        logger.warning("No initial configurations")
    logger.info(f"Generated {len(result.configs)} initial configurations")
    return result
