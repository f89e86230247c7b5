"""Separation-logic assertions: AST, sugar, free variables, substitution."""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

from .ast import (
    FALSE, TRUE, Binary, BoolLit, Expr, GhostVar, Unary, Var,
    expr_ghosts, expr_vars, map_expr, subst_expr, walk_expr,
)

logger = logging.getLogger(__name__)


class Assertion:
    """Base class for assertions."""
    __slots__ = ()


@dataclass(frozen=True)
class Pure(Assertion):
    """A boolean expression; holds on any heap when it evaluates to true."""
    expr: Expr


@dataclass(frozen=True)
class And(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class Not(Assertion):
    body: Assertion


@dataclass(frozen=True)
class Forall(Assertion):
    var: str
    body: Assertion
    typ: Optional[str] = None


@dataclass(frozen=True)
class Exists(Assertion):
    var: str
    body: Assertion
    typ: Optional[str] = None


@dataclass(frozen=True)
class Emp(Assertion):
    pass


@dataclass(frozen=True)
class PointsTo(Assertion):
    """`addr ↦perm value`, satisfied by exactly one cell."""
    addr: Expr
    perm: Fraction
    value: Expr


@dataclass(frozen=True)
class Sep(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class Wand(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True)
class IterSep(Assertion):
    parts: Tuple[Assertion, ...]


EMP = Emp()
TRUE_A = Pure(TRUE)
FALSE_A = Pure(FALSE)
FULL_PERM = Fraction(1)

Binder = (Forall, Exists)


# Sugar ---------------------------------------------------------------------

def or_(a: Assertion, b: Assertion) -> Assertion:
    return Not(And(Not(a), Not(b)))


def implies(a: Assertion, b: Assertion) -> Assertion:
    return Not(And(a, Not(b)))


def match_or(a: Assertion) -> Optional[Tuple[Assertion, Assertion]]:
    if isinstance(a, Not) and isinstance(a.body, And):
        left, right = a.body.left, a.body.right
        if isinstance(left, Not) and isinstance(right, Not):
            return left.body, right.body
    return None


def match_implies(a: Assertion) -> Optional[Tuple[Assertion, Assertion]]:
    if isinstance(a, Not) and isinstance(a.body, And) and isinstance(a.body.right, Not):
        if match_or(a) is None:
            return a.body.left, a.body.right.body
    return None


def apt(addr: Expr, perm: Fraction, value: Expr) -> Assertion:
    """`E ↦ρ E'` in its intuitionistic form: the cell plus any frame."""
    return Sep(PointsTo(addr, perm, value), TRUE_A)


def acc(addr: Expr, perm: Fraction, var: str = "y") -> Assertion:
    return Exists(var, apt(addr, perm, Var(var)))


def owns(addr: Expr, perm: Fraction = FULL_PERM, var: str = "y") -> Assertion:
    """`E ↦ρ _`: exactly the cell, with an unknown value."""
    return Exists(var, PointsTo(addr, perm, Var(var)))


def sep_all(parts: Iterable[Assertion]) -> Assertion:
    items = list(parts)
    if not items:
        return EMP
    result = items[-1]
    for part in reversed(items[:-1]):
        result = Sep(part, result)
    return result


def and_all(parts: Iterable[Assertion]) -> Assertion:
    items = list(parts)
    if not items:
        return TRUE_A
    result = items[-1]
    for part in reversed(items[:-1]):
        result = And(part, result)
    return result


def exists_all(names: Iterable[str], body: Assertion, typ: Optional[str] = None) -> Assertion:
    for name in reversed(list(names)):
        body = Exists(name, body, typ)
    return body


def flatten_sep(a: Assertion) -> List[Assertion]:
    if isinstance(a, Sep):
        return flatten_sep(a.left) + flatten_sep(a.right)
    if isinstance(a, IterSep):
        return [p for part in a.parts for p in flatten_sep(part)]
    if isinstance(a, Emp):
        return []
    return [a]


def flatten_and(a: Assertion) -> List[Assertion]:
    if isinstance(a, And):
        return flatten_and(a.left) + flatten_and(a.right)
    return [a]


def pure_of(e: Expr) -> Assertion:
    return Pure(e)


def negate_expr(e: Expr) -> Expr:
    return Unary("!", e)


# Traversals ----------------------------------------------------------------

def children(a: Assertion) -> Tuple[Assertion, ...]:
    if isinstance(a, (And, Sep, Wand)):
        return (a.left, a.right)
    if isinstance(a, Not):
        return (a.body,)
    if isinstance(a, Binder):
        return (a.body,)
    if isinstance(a, IterSep):
        return a.parts
    return ()


def walk(a: Assertion):
    yield a
    for child in children(a):
        yield from walk(child)


def exprs_of(a: Assertion) -> Tuple[Expr, ...]:
    if isinstance(a, Pure):
        return (a.expr,)
    if isinstance(a, PointsTo):
        return (a.addr, a.value)
    return ()


def free_vars(a: Assertion) -> Set[str]:
    """Free stack variables."""
    if isinstance(a, Pure):
        return expr_vars(a.expr)
    if isinstance(a, PointsTo):
        return expr_vars(a.addr) | expr_vars(a.value)
    if isinstance(a, Binder):
        return free_vars(a.body) - {a.var}
    result: Set[str] = set()
    for child in children(a):
        result |= free_vars(child)
    return result


def bound_vars(a: Assertion) -> Set[str]:
    return {n.var for n in walk(a) if isinstance(n, Binder)}


def all_names(a: Assertion) -> Set[str]:
    names = bound_vars(a)
    for node in walk(a):
        for e in exprs_of(node):
            names |= expr_vars(e)
    return names


def ghost_names(a: Assertion) -> Set[str]:
    result: Set[str] = set()
    for node in walk(a):
        for e in exprs_of(node):
            result |= expr_ghosts(e)
    return result


def fractions(a: Assertion) -> Set[Fraction]:
    return {n.perm for n in walk(a) if isinstance(n, PointsTo)}


def is_fol(a: Assertion) -> bool:
    """True when a uses no heap constructs (first-order fragment)."""
    return not any(isinstance(n, (Emp, PointsTo, Sep, Wand, IterSep)) for n in walk(a))


def is_pure(a: Assertion) -> bool:
    return is_fol(a)


def fresh_name(base: str, avoid: Set[str]) -> str:
    stem = base.rstrip("0123456789'") or "v"
    if base not in avoid:
        return base
    for i in itertools.count(1):
        candidate = f"{stem}{i}"
        if candidate not in avoid:
            return candidate
    raise AssertionError("unreachable")


def fresh_names(count: int, base: str, avoid: Set[str]) -> List[str]:
    """base1, base2, ... skipping anything in avoid."""
    taken = set(avoid)
    names: List[str] = []
    for i in itertools.count(1):
        if len(names) == count:
            break
        candidate = f"{base}{i}"
        if candidate not in taken:
            taken.add(candidate)
            names.append(candidate)
    return names


def map_exprs(a: Assertion, fn: Callable[[Expr], Expr]) -> Assertion:
    """Rebuild a with fn applied to every expression (binders untouched)."""
    if isinstance(a, Pure):
        return Pure(fn(a.expr))
    if isinstance(a, PointsTo):
        return PointsTo(fn(a.addr), a.perm, fn(a.value))
    if isinstance(a, And):
        return And(map_exprs(a.left, fn), map_exprs(a.right, fn))
    if isinstance(a, Sep):
        return Sep(map_exprs(a.left, fn), map_exprs(a.right, fn))
    if isinstance(a, Wand):
        return Wand(map_exprs(a.left, fn), map_exprs(a.right, fn))
    if isinstance(a, Not):
        return Not(map_exprs(a.body, fn))
    if isinstance(a, Forall):
        return Forall(a.var, map_exprs(a.body, fn), a.typ)
    if isinstance(a, Exists):
        return Exists(a.var, map_exprs(a.body, fn), a.typ)
    if isinstance(a, IterSep):
        return IterSep(tuple(map_exprs(p, fn) for p in a.parts))
    return a


def substitute_many(a: Assertion, mapping: Dict[str, Expr]) -> Assertion:
    """Simultaneous capture-avoiding substitution of variables by expressions."""
    mapping = {k: v for k, v in mapping.items() if k in free_vars(a)}
    if not mapping:
        return a
    if isinstance(a, (Pure, PointsTo)):
        return map_exprs(a, lambda e: subst_expr(e, mapping))
    if isinstance(a, Binder):
        inner = {k: v for k, v in mapping.items() if k != a.var}
        incoming: Set[str] = set()
        for e in inner.values():
            incoming |= expr_vars(e)
        var, body = a.var, a.body
        if var in incoming:
            avoid = incoming | all_names(body) | set(inner)
            new_var = fresh_name(var, avoid)
            body = substitute_many(body, {var: Var(new_var)})
            var = new_var
        return type(a)(var, substitute_many(body, inner), a.typ)
    if isinstance(a, And):
        return And(substitute_many(a.left, mapping), substitute_many(a.right, mapping))
    if isinstance(a, Sep):
        return Sep(substitute_many(a.left, mapping), substitute_many(a.right, mapping))
    if isinstance(a, Wand):
        return Wand(substitute_many(a.left, mapping), substitute_many(a.right, mapping))
    if isinstance(a, Not):
        return Not(substitute_many(a.body, mapping))
    if isinstance(a, IterSep):
        return IterSep(tuple(substitute_many(p, mapping) for p in a.parts))
    return a


def substitute(a: Assertion, x: str, e: Expr) -> Assertion:
    """a[x/e], renaming bound variables that would capture e's variables."""
    return substitute_many(a, {x: e})


def canonical(a: Assertion) -> Assertion:
    """Rename bound variables to positional names for alpha-comparison."""
    counter = itertools.count()

    def go(node: Assertion) -> Assertion:
        if isinstance(node, Binder):
            name = f"${next(counter)}"
            body = substitute_many(node.body, {node.var: Var(name)})
            return type(node)(name, go(body), node.typ)
        if isinstance(node, And):
            return And(go(node.left), go(node.right))
        if isinstance(node, Sep):
            return Sep(go(node.left), go(node.right))
        if isinstance(node, Wand):
            return Wand(go(node.left), go(node.right))
        if isinstance(node, Not):
            return Not(go(node.body))
        if isinstance(node, IterSep):
            return IterSep(tuple(go(p) for p in node.parts))
        return node

    return go(a)


def alpha_equal(a: Assertion, b: Assertion) -> bool:
    if a == b:
        return True
    return canonical(a) == canonical(b)


def subst_ghost_reads(a: Assertion, mapping: Dict[str, Expr]) -> Assertion:
    """Replace ghost names by expressions inside every expression of a."""
    return map_exprs(
        a,
        lambda e: map_expr(e, lambda n: mapping.get(n.name) if isinstance(n, GhostVar) else None),
    )


def mentions_only_literals(e: Expr) -> bool:
    return all(not isinstance(n, (Var, GhostVar)) for n in walk_expr(e))


def bool_lit(value: bool) -> Assertion:
    return Pure(BoolLit(value))


def eq(left: Expr, right: Expr) -> Assertion:
    return Pure(Binary("=", left, right))
