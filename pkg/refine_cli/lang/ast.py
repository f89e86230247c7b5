"""Abstract syntax of expressions, commands and programs.

Nodes are frozen dataclasses so that configurations built from them hash
and compare structurally. Proof annotations (loop/lock/ghost invariants,
midconditions, branch specs) are excluded from equality.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

if TYPE_CHECKING:
    from .assertions import Assertion

logger = logging.getLogger(__name__)


# Expressions ---------------------------------------------------------------

class Expr:
    """Base class for expressions (stack-only functions)."""
    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class SeqLit(Expr):
    items: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class GhostVar(Expr):
    """Ghost name; denotes its ghost address (its contents inside ghost code)."""
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


UNARY_OPS = ("-", "!", "len")
BINARY_OPS = ("+", "-", "*", "=", "!=", "<", "<=", ">", ">=", "&&", "||", "==>", "++", ":", "index")
TRUE = BoolLit(True)
FALSE = BoolLit(False)


def expr_children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, SeqLit):
        return e.items
    if isinstance(e, Unary):
        return (e.operand,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    return ()


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    for child in expr_children(e):
        yield from walk_expr(child)


def expr_vars(e: Expr) -> Set[str]:
    """Stack variables read by e."""
    return {n.name for n in walk_expr(e) if isinstance(n, Var)}


def expr_ghosts(e: Expr) -> Set[str]:
    return {n.name for n in walk_expr(e) if isinstance(n, GhostVar)}


def map_expr(e: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Bottom-up rebuild; fn returns a replacement or None to keep the node."""
    replaced = fn(e)
    if replaced is not None:
        return replaced
    if isinstance(e, SeqLit):
        return SeqLit(tuple(map_expr(i, fn) for i in e.items))
    if isinstance(e, Unary):
        return Unary(e.op, map_expr(e.operand, fn))
    if isinstance(e, Binary):
        return Binary(e.op, map_expr(e.left, fn), map_expr(e.right, fn))
    return e


def subst_expr(e: Expr, mapping: Dict[str, Expr]) -> Expr:
    """Replace stack variables by expressions (expressions bind nothing)."""
    if not mapping:
        return e
    return map_expr(e, lambda n: mapping.get(n.name) if isinstance(n, Var) else None)


def subst_ghost_values(e: Expr, mapping: Dict[str, Expr]) -> Expr:
    """Replace ghost-value reads (ghost code only) by expressions."""
    return map_expr(e, lambda n: mapping.get(n.name) if isinstance(n, GhostVar) else None)


# Commands ------------------------------------------------------------------

class Command:
    """Base class for commands."""
    __slots__ = ()


@dataclass(frozen=True)
class Skip(Command):
    pass


@dataclass(frozen=True)
class Assign(Command):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Write(Command):
    addr: Expr
    value: Expr


@dataclass(frozen=True)
class Read(Command):
    var: str
    addr: Expr


@dataclass(frozen=True)
class Free(Command):
    addr: Expr


@dataclass(frozen=True)
class Alloc(Command):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    second: Command
    mid: Optional["Assertion"] = field(default=None, compare=False)


@dataclass(frozen=True)
class Ite(Command):
    cond: Expr
    then: Command
    else_: Command


@dataclass(frozen=True)
class While(Command):
    cond: Expr
    body: Command
    invariant: Optional["Assertion"] = field(default=None, compare=False)


@dataclass(frozen=True)
class BranchSpec:
    """`requires`/`ensures` annotation of one parallel branch."""
    requires: Optional["Assertion"] = None
    ensures: Optional["Assertion"] = None


@dataclass(frozen=True)
class Par(Command):
    left: Command
    right: Command
    left_spec: Optional[BranchSpec] = field(default=None, compare=False)
    right_spec: Optional[BranchSpec] = field(default=None, compare=False)


@dataclass(frozen=True)
class LockDecl(Command):
    lock: str
    body: Command
    invariant: Optional["Assertion"] = field(default=None, compare=False)


@dataclass(frozen=True)
class With(Command):
    lock: str
    cond: Expr
    body: Command


@dataclass(frozen=True)
class Within(Command):
    """Internal form: lock held while the body runs."""
    lock: str
    body: Command


@dataclass(frozen=True)
class Print(Command):
    expr: Expr


@dataclass(frozen=True)
class InitBlock(Command):
    body: Command
    invariant: Optional["Assertion"] = field(default=None, compare=False)


@dataclass(frozen=True)
class NextBlock(Command):
    body: Command


@dataclass(frozen=True)
class GhostAssign(Command):
    name: str
    expr: Expr


SKIP = Skip()
GHOST_LOCK = "@G"
INIT_TOKEN = "@I"
RESERVED_LOCKS = (GHOST_LOCK, INIT_TOKEN)

BASE_COMMANDS = (Assign, Write, Read, Free, Alloc)


def command_children(c: Command) -> Tuple[Command, ...]:
    if isinstance(c, Seq):
        return (c.first, c.second)
    if isinstance(c, Ite):
        return (c.then, c.else_)
    if isinstance(c, Par):
        return (c.left, c.right)
    if isinstance(c, (While, LockDecl, With, Within, InitBlock, NextBlock)):
        return (c.body,)
    return ()


def walk_command(c: Command) -> Iterator[Command]:
    yield c
    for child in command_children(c):
        yield from walk_command(child)


def command_exprs(c: Command) -> Tuple[Expr, ...]:
    """Expressions appearing directly in c (not in sub-commands)."""
    if isinstance(c, (Assign, Alloc, Print, GhostAssign)):
        return (c.expr,)
    if isinstance(c, Write):
        return (c.addr, c.value)
    if isinstance(c, (Read, Free)):
        return (c.addr,)
    if isinstance(c, (Ite, While, With)):
        return (c.cond,)
    return ()


def seq_of(commands: List[Command]) -> Command:
    """Right-nested sequence of the commands (skip when empty)."""
    if not commands:
        return SKIP
    result = commands[-1]
    for c in reversed(commands[:-1]):
        result = Seq(c, result)
    return result


def flatten_seq(c: Command) -> List[Command]:
    if isinstance(c, Seq):
        return flatten_seq(c.first) + flatten_seq(c.second)
    return [c]


def contains(c: Command, kind: type) -> bool:
    return any(isinstance(n, kind) for n in walk_command(c))


@dataclass(frozen=True)
class Program:
    """A parsed `.rimp` file.

    Attributes:
        command: Program body
        ghosts: Declared ghost names (stdOut always first)
        pre: Precondition P of the initial configurations
        post: Postcondition Q checked at terminal configurations
        source: Path the program was read from, if any
    """
    command: Command
    ghosts: Tuple[str, ...]
    pre: "Assertion"
    post: "Assertion"
    source: Optional[str] = field(default=None, compare=False)

    def lock_invariants(self) -> Dict[str, "Assertion"]:
        """Invariants annotated on `lock` and `init` blocks."""
        found: Dict[str, "Assertion"] = {}
        for node in walk_command(self.command):
            if isinstance(node, LockDecl) and node.invariant is not None:
                found[node.lock] = node.invariant
            elif isinstance(node, InitBlock) and node.invariant is not None:
                found[GHOST_LOCK] = node.invariant
        return found

    def declared_locks(self) -> FrozenSet[str]:
        return frozenset(n.lock for n in walk_command(self.command) if isinstance(n, LockDecl))
