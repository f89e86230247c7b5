"""Small-step operational semantics of the language.

`step` returns the complete successor set of a configuration. Each
successor carries a `StepLabel`: the axiom that fired plus the chain of
congruence rules (outermost first) that lifted it to the whole command.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple, Union

from ..errors import BudgetExceeded, EvalError
from ..lang.ast import (
    GHOST_LOCK, SKIP, Alloc, Assign, Command, Free, GhostAssign, InitBlock, Ite, LockDecl,
    NextBlock, Par, Print, Read, Seq, Skip, While, With, Within, Write,
    command_exprs, expr_vars, flatten_seq, walk_command,
)
from .expressions import GhostReadError, eval_bool, eval_expr
from .heap import PermHeap, Stack, heap_delete, heap_update
from .values import STDOUT, Addr, Address, GhostAddr, append, is_address

logger = logging.getLogger(__name__)


class Abort:
    """The distinguished aborting configuration."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "abort"

    def key(self) -> Tuple:
        return ("abort",)

    def to_dict(self) -> Dict[str, Any]:
        return {"abort": True}


ABORT = Abort()


@dataclass(frozen=True)
class Config:
    """A running configuration (command, stack, normal heap)."""
    command: Command
    stack: Stack
    heap: PermHeap

    def to_dict(self) -> Dict[str, Any]:
        from ..lang.pretty import format_command

        return {
            "command": format_command(self.command),
            "stack": self.stack.to_dict(),
            "heap": self.heap.to_dict(),
        }


Outcome = Union[Config, Abort]


@dataclass(frozen=True)
class StepLabel:
    """Rule instance justifying one step.

    Attributes:
        rule: The axiom (or abort rule) at the leaf
        context: Congruence rules from the outermost inward
        detail: Extra data (chosen address, abort cause)
    """
    rule: str
    context: Tuple[str, ...] = ()
    detail: str = ""

    @property
    def name(self) -> str:
        """The rule applied to the whole command."""
        return self.context[0] if self.context else self.rule

    @property
    def aborts(self) -> bool:
        return self.rule.endswith("A") or self.rule in ("Race", "WithinL")

    def within(self, rule: str) -> "StepLabel":
        return StepLabel(self.rule, (rule,) + self.context, self.detail)

    def sort_key(self) -> Tuple:
        return (self.context, self.rule, self.detail)

    def __str__(self) -> str:
        text = "/".join(self.context + (self.rule,))
        return f"{text}[{self.detail}]" if self.detail else text

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"rule": self.name, "leaf": self.rule, "context": list(self.context)}
        if self.detail:
            data["detail"] = self.detail
        return data


Successor = Tuple[StepLabel, Outcome]


@dataclass(frozen=True)
class StepOptions:
    """Knobs of the step relation.

    Attributes:
        alloc_all: Offer every unused address to `new` instead of the least one
        addr_count: Ordinary addresses considered when alloc_all is set
        next_limit: Steps allowed for one atomic body
    """
    alloc_all: bool = False
    addr_count: int = 4
    next_limit: int = 10_000


DEFAULT_OPTIONS = StepOptions()


# Static predicates ---------------------------------------------------------

def locked(c: Command) -> FrozenSet[str]:
    """Locks currently held by c (its `within` sub-commands)."""
    return frozenset(n.lock for n in walk_command(c) if isinstance(n, Within))


def dlocks(c: Command) -> FrozenSet[str]:
    """Locks declared in c; an init block counts once it has become a lock declaration."""
    return frozenset(n.lock for n in walk_command(c) if isinstance(n, LockDecl))


def is_init(c: Command) -> bool:
    return GHOST_LOCK in dlocks(c)


def is_atomic(c: Command) -> bool:
    """A sequence of ghost assignments with at most one base command or print."""
    effects = 0
    for part in flatten_seq(c):
        if isinstance(part, (Skip, GhostAssign)):
            continue
        if isinstance(part, (Assign, Write, Read, Free, Alloc, Print)):
            effects += 1
            continue
        return False
    return effects <= 1


def mod_vars(c: Command) -> Set[str]:
    """Variables assigned by c."""
    return {n.var for n in walk_command(c) if isinstance(n, (Assign, Read, Alloc))}


def command_vars(c: Command) -> Set[str]:
    """Every stack variable c reads or writes."""
    names = mod_vars(c)
    for node in walk_command(c):
        for e in command_exprs(node):
            names |= expr_vars(e)
    return names


def _address(e, s: Stack) -> Optional[Address]:
    try:
        value = eval_expr(e, s)
    except EvalError:
        return None
    return value if is_address(value) else None


def _accesses(c: Command, s: Stack, writes: bool) -> Set[Address]:
    if isinstance(c, Read):
        found = _address(c.addr, s)
        return set() if writes or found is None else {found}
    if isinstance(c, (Write, Free)):
        found = _address(c.addr, s)
        return set() if found is None else {found}
    if isinstance(c, Print):
        return {STDOUT}
    if isinstance(c, GhostAssign):
        if writes:
            return {GhostAddr(c.name)}
        return {GhostAddr(c.name)} | {GhostAddr(g) for g in _ghost_names(c)}
    if isinstance(c, Seq):
        return _accesses(c.first, s, writes)
    if isinstance(c, Par):
        return _accesses(c.left, s, writes) | _accesses(c.right, s, writes)
    if isinstance(c, LockDecl):
        return _accesses(c.body, s, writes)
    return set()


def _ghost_names(c: GhostAssign) -> Set[str]:
    from ..lang.ast import expr_ghosts

    return expr_ghosts(c.expr)


def reads(c: Command, s: Stack) -> Set[Address]:
    """Addresses the next step of c may access outside a protected region."""
    return _accesses(c, s, writes=False)


def writes(c: Command, s: Stack) -> Set[Address]:
    """Addresses the next step of c may modify outside a protected region."""
    return _accesses(c, s, writes=True)


# Step relation -------------------------------------------------------------

def _fresh_addresses(h: PermHeap, options: StepOptions) -> List[Addr]:
    if not options.alloc_all:
        index = 0
        while Addr(index) in h:
            index += 1
        return [Addr(index)]
    bound = max(options.addr_count, len(h) + 1)
    return [Addr(i) for i in range(bound) if Addr(i) not in h]


def _base_step(c: Command, s: Stack, h: PermHeap, options: StepOptions) -> List[Successor]:
    if isinstance(c, Assign):
        return [(StepLabel("Assign"), Config(SKIP, s.assign(c.var, eval_expr(c.expr, s)), h))]
    if isinstance(c, Read):
        addr = _address(c.addr, s)
        if addr is None or addr not in h:
            return [(StepLabel("ReadA"), ABORT)]
        return [(StepLabel("Read"), Config(SKIP, s.assign(c.var, h.value(addr)), h))]
    if isinstance(c, Write):
        addr = _address(c.addr, s)
        if addr is None or addr not in h:
            return [(StepLabel("WriteA"), ABORT)]
        return [(StepLabel("Write"), Config(SKIP, s, heap_update(h, addr, eval_expr(c.value, s))))]
    if isinstance(c, Alloc):
        value = eval_expr(c.expr, s)
        return [
            (StepLabel("Alloc", detail=str(a)), Config(SKIP, s.assign(c.var, a), heap_update(h, a, value)))
            for a in _fresh_addresses(h, options)
        ]
    if isinstance(c, Free):
        addr = _address(c.addr, s)
        if isinstance(addr, GhostAddr):
            return [(StepLabel("FreeA", detail="ghost"), ABORT)]
        if addr is None or addr not in h:
            return [(StepLabel("FreeA"), ABORT)]
        return [(StepLabel("Free"), Config(SKIP, s, heap_delete(h, addr)))]
    if isinstance(c, Print):
        if STDOUT not in h:
            return [(StepLabel("PrintA"), ABORT)]
        current = h.value(STDOUT)
        if not isinstance(current, tuple):
            return [(StepLabel("PrintA", detail="stdOut is not a sequence"), ABORT)]
        return [(StepLabel("Print"), Config(SKIP, s, heap_update(h, STDOUT, append(eval_expr(c.expr, s), current))))]
    if isinstance(c, GhostAssign):
        target = GhostAddr(c.name)
        if target not in h:
            return [(StepLabel("WriteA", detail="ghost"), ABORT)]
        try:
            value = eval_expr(c.expr, s, ghost_heap=h)
        except GhostReadError as e:
            return [(StepLabel("ReadA", detail=str(e.addr)), ABORT)]
        return [(StepLabel("Write", detail="ghost"), Config(SKIP, s, heap_update(h, target, value)))]
    raise TypeError(f"not a base command: {c!r}")


def _lift(successors: List[Successor], rule: str, abort_rule: str, wrap) -> List[Successor]:
    lifted: List[Successor] = []
    for label, outcome in successors:
        if isinstance(outcome, Abort):
            lifted.append((label.within(abort_rule), ABORT))
        else:
            lifted.append((label.within(rule), wrap(outcome)))
    return lifted


def step(cfg: Config, options: StepOptions = DEFAULT_OPTIONS) -> List[Successor]:
    """Every (label, successor) of cfg, sorted by label.

    Raises:
        EvalError: an expression the step needs is ill-typed
    """
    successors = _step(cfg.command, cfg.stack, cfg.heap, options)
    return sorted(successors, key=lambda pair: pair[0].sort_key())


def _step(c: Command, s: Stack, h: PermHeap, options: StepOptions) -> List[Successor]:
    if isinstance(c, Skip):
        return []
    if isinstance(c, (Assign, Read, Write, Alloc, Free, Print, GhostAssign)):
        return _base_step(c, s, h, options)
    if isinstance(c, Seq):
        if isinstance(c.first, Skip):
            return [(StepLabel("SeqS"), Config(c.second, s, h))]
        inner = _step(c.first, s, h, options)
        return _lift(inner, "Seq", "SeqA", lambda o: Config(Seq(o.command, c.second, c.mid), o.stack, o.heap))
    if isinstance(c, Ite):
        if eval_bool(c.cond, s):
            return [(StepLabel("Ite1"), Config(c.then, s, h))]
        return [(StepLabel("Ite2"), Config(c.else_, s, h))]
    if isinstance(c, While):
        unfolded = Ite(c.cond, Seq(c.body, c), SKIP)
        return [(StepLabel("While"), Config(unfolded, s, h))]
    if isinstance(c, Par):
        return _par_step(c, s, h, options)
    if isinstance(c, LockDecl):
        if isinstance(c.body, Skip):
            return [(StepLabel("LockS"), Config(SKIP, s, h))]
        inner = _step(c.body, s, h, options)
        return _lift(inner, "Lock", "LockA",
                     lambda o: Config(LockDecl(c.lock, o.command, c.invariant), o.stack, o.heap))
    if isinstance(c, With):
        if eval_bool(c.cond, s):
            return [(StepLabel("With"), Config(Within(c.lock, c.body), s, h))]
        return []
    if isinstance(c, Within):
        if c.lock in locked(c.body):
            return [(StepLabel("WithinL"), ABORT)]
        if isinstance(c.body, Skip):
            return [(StepLabel("WithinS", detail=c.lock), Config(SKIP, s, h))]
        inner = _step(c.body, s, h, options)
        return _lift(inner, "Within", "WithinA", lambda o: Config(Within(c.lock, o.command), o.stack, o.heap))
    if isinstance(c, InitBlock):
        return [(StepLabel("Init"), Config(LockDecl(GHOST_LOCK, c.body, c.invariant), s, h))]
    if isinstance(c, NextBlock):
        return _next_step(c, s, h, options)
    raise TypeError(f"not a command: {c!r}")


def _par_step(c: Par, s: Stack, h: PermHeap, options: StepOptions) -> List[Successor]:
    if isinstance(c.left, Skip) and isinstance(c.right, Skip):
        return [(StepLabel("ParS"), Config(SKIP, s, h))]
    result: List[Successor] = []
    held_right = locked(c.right)
    for label, outcome in _step(c.left, s, h, options):
        if isinstance(outcome, Abort):
            result.append((label.within("Par1A"), ABORT))
        elif not (locked(outcome.command) & held_right):
            result.append((label.within("Par1"), Config(Par(outcome.command, c.right, c.left_spec, c.right_spec),
                                                       outcome.stack, outcome.heap)))
    held_left = locked(c.left)
    for label, outcome in _step(c.right, s, h, options):
        if isinstance(outcome, Abort):
            result.append((label.within("Par2A"), ABORT))
        elif not (locked(outcome.command) & held_left):
            result.append((label.within("Par2"), Config(Par(c.left, outcome.command, c.left_spec, c.right_spec),
                                                       outcome.stack, outcome.heap)))
    conflict = (reads(c.left, s) & writes(c.right, s)) | (writes(c.left, s) & reads(c.right, s))
    if conflict:
        detail = ",".join(sorted(str(a) for a in conflict))
        result.append((StepLabel("Race", detail=detail), ABORT))
    return result


def _next_step(c: NextBlock, s: Stack, h: PermHeap, options: StepOptions) -> List[Successor]:
    """Run the atomic body to completion as a single step."""
    if not is_atomic(c.body):
        logger.debug("Next block with non-atomic body has no step")
        return []
    results: List[Successor] = []
    frontier: List[Tuple[Config, Optional[StepLabel]]] = [(Config(c.body, s, h), None)]
    used = 0
    while frontier:
        cfg, last = frontier.pop()
        if isinstance(cfg.command, Skip):
            results.append((StepLabel("Next"), Config(SKIP, cfg.stack, cfg.heap)))
            continue
        for label, outcome in _step(cfg.command, cfg.stack, cfg.heap, options):
            used += 1
            if used > options.next_limit:
                raise BudgetExceeded("next-body", options.next_limit)
            if isinstance(outcome, Abort):
                results.append((label.within("Next"), ABORT))
            else:
                frontier.append((outcome, label))
    return results


# Ghost erasure -------------------------------------------------------------

def erase_ghost(c: Command) -> Command:
    """Drop ghost assignments and unwrap init/next blocks."""
    if isinstance(c, GhostAssign):
        return SKIP
    if isinstance(c, (NextBlock, InitBlock)):
        return erase_ghost(c.body)
    if isinstance(c, Seq):
        first, second = erase_ghost(c.first), erase_ghost(c.second)
        if isinstance(first, Skip):
            return second
        if isinstance(second, Skip):
            return first
        return Seq(first, second)
    if isinstance(c, Ite):
        return Ite(c.cond, erase_ghost(c.then), erase_ghost(c.else_))
    if isinstance(c, While):
        return While(c.cond, erase_ghost(c.body))
    if isinstance(c, Par):
        return Par(erase_ghost(c.left), erase_ghost(c.right))
    if isinstance(c, LockDecl):
        if c.lock == GHOST_LOCK:
            return erase_ghost(c.body)
        return LockDecl(c.lock, erase_ghost(c.body))
    if isinstance(c, With):
        return With(c.lock, c.cond, erase_ghost(c.body))
    if isinstance(c, Within):
        return Within(c.lock, erase_ghost(c.body))
    return c
