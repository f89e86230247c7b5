"""Rule labels, lock environments and the assertion shapes the rules are stated with."""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Sequence, Set, Tuple

from ..lang.assertions import (
    EMP, And, Assertion, Not, PointsTo, Pure, Sep, alpha_equal, and_all, apt, exists_all,
    free_vars, fresh_name, owns, sep_all, substitute_many,
)
from ..lang.ast import GHOST_LOCK, INIT_TOKEN, Command, Expr, GhostVar, Unary, Var, expr_vars
from ..semantics.ats import ATSSpec, primed
from ..semantics.opsem import command_vars, mod_vars

logger = logging.getLogger(__name__)


class Rule(str, Enum):
    """Labels of the proof rules; the value is the label used in derivation files."""
    SKIP = "Skip"
    ASSIGN = "Assign"
    WRITE = "Write"
    READ = "Read"
    ALLOC = "Alloc"
    FREE = "Free"
    SEQ = "Seq"
    COND = "Cond"
    WHILE = "While"
    PAR = "Par"
    LOCK = "Lock"
    WITH = "With"
    FRAME = "Frame"
    CONS = "Cons"
    EX = "Ex"
    CONJ = "Conj"
    DISJ = "Disj"
    INIT = "Init"
    NEXT = "Next"
    PRINT = "Print"


PREMISES: Dict[Rule, int] = {
    Rule.SKIP: 0, Rule.ASSIGN: 0, Rule.WRITE: 0, Rule.READ: 0, Rule.ALLOC: 0, Rule.FREE: 0,
    Rule.PRINT: 0,
    Rule.WHILE: 1, Rule.LOCK: 1, Rule.WITH: 1, Rule.FRAME: 1, Rule.CONS: 1, Rule.EX: 1,
    Rule.INIT: 1, Rule.NEXT: 1,
    Rule.SEQ: 2, Rule.COND: 2, Rule.PAR: 2, Rule.CONJ: 2, Rule.DISJ: 2,
}

# Rules whose premises are about the same command as the conclusion.
STRUCTURAL = (Rule.FRAME, Rule.CONS, Rule.EX, Rule.CONJ, Rule.DISJ)


def rule_of(label: str) -> Rule:
    """Raises ValueError for unknown labels."""
    return Rule(label)


@dataclass(frozen=True)
class LockEnv:
    """Ordered lock bindings; lookups see the latest binding, unbound locks have `emp`."""
    bindings: Tuple[Tuple[str, Assertion], ...] = ()

    @classmethod
    def of(cls, pairs: Iterable[Tuple[str, Assertion]]) -> "LockEnv":
        return cls(tuple((lock, inv) for lock, inv in pairs))

    def __iter__(self) -> Iterator[Tuple[str, Assertion]]:
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)

    def binds(self, lock: str) -> bool:
        return any(name == lock for name, _ in self.bindings)

    def lookup(self, lock: str) -> Assertion:
        for name, inv in reversed(self.bindings):
            if name == lock:
                return inv
        return EMP

    def extend(self, lock: str, inv: Assertion) -> "LockEnv":
        return LockEnv(self.bindings + ((lock, inv),))

    def without(self, lock: str) -> "LockEnv":
        """Drop the latest binding of lock."""
        for index in range(len(self.bindings) - 1, -1, -1):
            if self.bindings[index][0] == lock:
                return LockEnv(self.bindings[:index] + self.bindings[index + 1:])
        return self

    def invariants(self) -> List[Assertion]:
        return [inv for _, inv in self.bindings]

    def same_as(self, other: "LockEnv") -> bool:
        if len(self.bindings) != len(other.bindings):
            return False
        return all(
            a_lock == b_lock and alpha_equal(a_inv, b_inv)
            for (a_lock, a_inv), (b_lock, b_inv) in zip(self.bindings, other.bindings)
        )

    def locks(self) -> List[str]:
        return [name for name, _ in self.bindings]


# Variable sets -------------------------------------------------------------

def mod_set(c: Command) -> Set[str]:
    """Mod(C): variables on the left of assignments, reads and allocations."""
    return mod_vars(c)


def fv_command(c: Command) -> Set[str]:
    """FV(C): every variable C accesses."""
    return command_vars(c)


def fv_env(env: Iterable[Tuple[str, Assertion]]) -> Set[str]:
    """FV(Γ): the union of the free variables of its invariants."""
    names: Set[str] = set()
    for _, inv in env:
        names |= free_vars(inv)
    return names


def fv_triple(pre: Assertion, c: Command, post: Assertion) -> Set[str]:
    return free_vars(pre) | fv_command(c) | free_vars(post)


# Assertion shapes ----------------------------------------------------------

def write_pre(addr: Expr) -> Assertion:
    """`E ↦1 _`, the precondition of writes and frees."""
    return owns(addr, var=fresh_name("y", expr_vars(addr)))


def negated(a: Assertion, cond: Expr) -> List[Assertion]:
    """The accepted spellings of `a ∧ ¬E`."""
    return [And(a, Not(Pure(cond))), And(a, Pure(Unary("!", cond)))]


def ghost_pts(spec: ATSSpec, names: Sequence[str], rho: Fraction) -> Assertion:
    """x̂1 ↦ρ y1 ∗ ... ∗ x̂k ↦ρ yk, each cell with an arbitrary frame."""
    return sep_all(
        apt(GhostVar(addr.name), rho, Var(name))
        for addr, name in zip(spec.ghost_addresses, names)
    )


def init_formula(spec: ATSSpec, names: Sequence[str]) -> Assertion:
    return substitute_many(spec.init, {x: Var(y) for x, y in zip(spec.vars, names)})


def next_formula(spec: ATSSpec, olds: Sequence[str], news: Sequence[str]) -> Assertion:
    mapping: Dict[str, Expr] = {x: Var(o) for x, o in zip(spec.vars, olds)}
    mapping.update({primed(x): Var(y) for x, y in zip(spec.vars, news)})
    return substitute_many(spec.next, mapping)


def initialized_state(spec: ATSSpec, names: Sequence[str], rho: Fraction, ghost_inv: Assertion) -> Assertion:
    """∃ys. x̂ ↦ρ ys ∧ Init(ys) ∧ G"""
    body = and_all([ghost_pts(spec, names, rho), init_formula(spec, names), ghost_inv])
    return exists_all(names, body)


def init_pre(spec: ATSSpec, names: Sequence[str], rho: Fraction,
             ghost_inv: Assertion, frame: Assertion) -> Assertion:
    return Sep(initialized_state(spec, names, rho, ghost_inv), frame)


def next_pre(spec: ATSSpec, olds: Sequence[str], rho: Fraction,
             ghost_inv: Assertion, frame: Assertion) -> Assertion:
    """(x̂ ↦ρ os ∧ G) ∗ P"""
    return Sep(And(ghost_pts(spec, olds, rho), ghost_inv), frame)


def next_post(spec: ATSSpec, olds: Sequence[str], news: Sequence[str], rho: Fraction,
              ghost_inv: Assertion, frame: Assertion) -> Assertion:
    """(∃ys. x̂ ↦ρ ys ∧ Next(os, ys) ∧ G) ∗ Q"""
    body = and_all([ghost_pts(spec, news, rho), next_formula(spec, olds, news), ghost_inv])
    return Sep(exists_all(news, body), frame)


def print_pre(current: Expr) -> Assertion:
    return PointsTo(GhostVar("stdOut"), Fraction(1), current)


def reserved(lock: str) -> bool:
    return lock in (GHOST_LOCK, INIT_TOKEN)


def empty_token_env(env: LockEnv) -> bool:
    """Whether 𝓘 is bound to `emp`, as printing requires."""
    return env.binds(INIT_TOKEN) and alpha_equal(env.lookup(INIT_TOKEN), EMP)
