"""Bounded semantics of assertions: satisfaction, model generation and checks.

Satisfaction follows the usual separation-logic reading over permission
heaps. Everything that would quantify over an infinite universe (values
bound by quantifiers, heaps added by a wand, the portions a `**` split
assigns to a cell) is drawn from the finite universes of a `Domains`:

* quantified values come from the typed domain of the variable, unless the
  body pins them (a points-to whose value is the variable, or an equality);
* wand frames are the generated models of the wand's left-hand side;
* `**` carves points-to parts exactly and only splits the remainder among
  the other parts, using the permission fractions occurring in the query.
"""

import functools
import itertools
import logging
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from ..errors import BudgetExceeded, EvalError
from ..lang.assertions import (
    And, Assertion, Binder, Emp, Exists, Forall, IterSep, Not, PointsTo, Pure, Sep, Wand,
    all_names, alpha_equal, flatten_sep, fractions, free_vars, fresh_name, match_implies, match_or,
    substitute,
)
from ..lang.ast import Binary, BoolLit, Expr, GhostVar, IntLit, SeqLit, Unary, Var, expr_vars, walk_expr
from .domains import Budget, Domains, Verdict
from .expressions import eval_bool, eval_expr
from .heap import EMPTY_HEAP, FULL, UNDEFINED, Cell, PermHeap, Stack, heap_add, heap_difference
from .values import Address, Value, is_address, same_value

logger = logging.getLogger(__name__)


# Type inference ------------------------------------------------------------

_INT_OPS = ("+", "-", "*", "<", "<=", ">", ">=")
_BOOL_OPS = ("&&", "||", "==>")


def _literal_type(e: Expr, d: Optional[Domains]) -> Optional[str]:
    if isinstance(e, IntLit) or (isinstance(e, Unary) and e.op in ("-", "len")):
        return "int"
    if isinstance(e, Binary) and e.op in _INT_OPS[:3]:
        return "int"
    if isinstance(e, BoolLit) or (isinstance(e, Unary) and e.op == "!"):
        return "bool"
    if isinstance(e, Binary) and (e.op in _BOOL_OPS or e.op in ("=", "!=") or e.op in _INT_OPS[3:]):
        return "bool"
    if isinstance(e, SeqLit) or (isinstance(e, Binary) and e.op in ("++", ":")):
        return "seq"
    if isinstance(e, GhostVar):
        return "addr"
    return None


def _expr_votes(e: Expr, var: str, votes: Set[str], d: Optional[Domains], top_bool: bool = False) -> None:
    if top_bool and isinstance(e, Var) and e.name == var:
        votes.add("bool")
    for node in walk_expr(e):
        if isinstance(node, Unary):
            if isinstance(node.operand, Var) and node.operand.name == var:
                votes.add({"-": "int", "!": "bool", "len": "seq"}[node.op])
        elif isinstance(node, Binary):
            left_is = isinstance(node.left, Var) and node.left.name == var
            right_is = isinstance(node.right, Var) and node.right.name == var
            if not (left_is or right_is):
                continue
            op = node.op
            if op in _INT_OPS:
                votes.add("int")
            elif op in _BOOL_OPS:
                votes.add("bool")
            elif op == "++":
                votes.add("seq")
            elif op == ":":
                votes.add("seq" if right_is else "int")
            elif op == "index":
                votes.add("seq" if left_is else "int")
            elif op in ("=", "!="):
                other = node.right if left_is else node.left
                found = _literal_type(other, d)
                if found:
                    votes.add(found)


def infer_type(var: str, a: Assertion, d: Optional[Domains] = None) -> str:
    """Light monomorphic inference for a variable used in a; int by default."""
    votes: Set[str] = set()

    def visit(node: Assertion) -> None:
        if isinstance(node, Binder):
            if node.var == var:
                return
            visit(node.body)
            return
        if isinstance(node, Pure):
            _expr_votes(node.expr, var, votes, d, top_bool=True)
        elif isinstance(node, PointsTo):
            if isinstance(node.addr, Var) and node.addr.name == var:
                votes.add("addr")
            _expr_votes(node.addr, var, votes, d)
            _expr_votes(node.value, var, votes, d)
            if isinstance(node.value, Var) and node.value.name == var and isinstance(node.addr, GhostVar) and d:
                typ = d.ghost_type(node.addr.name)
                if typ:
                    votes.add(typ)
        for child in _children(node):
            visit(child)

    visit(a)
    for typ in ("addr", "seq", "bool", "int"):
        if typ in votes:
            return typ
    return "int"


def _children(a: Assertion) -> Tuple[Assertion, ...]:
    if isinstance(a, (And, Sep, Wand)):
        return (a.left, a.right)
    if isinstance(a, Not):
        return (a.body,)
    if isinstance(a, IterSep):
        return a.parts
    return ()


# Frame universe ------------------------------------------------------------

@functools.lru_cache(maxsize=32)
def frame_heaps(d: Domains, perms: FrozenSet[Fraction]) -> Tuple[PermHeap, ...]:
    """Every heap of at most d.max_heap_cells cells over the frame universe."""
    addresses = d.addresses()
    values = d.frame_values()
    perm_list = sorted(perms | {FULL})
    heaps: List[PermHeap] = [EMPTY_HEAP]
    for size in range(1, d.max_heap_cells + 1):
        for addrs in itertools.combinations(addresses, size):
            choices = [[(p, v) for p in perm_list for v in values] for _ in addrs]
            for cells in itertools.product(*choices):
                heaps.append(PermHeap({a: Cell(p, v) for a, (p, v) in zip(addrs, cells)}))
    return tuple(heaps)


# Evaluator -----------------------------------------------------------------

class Evaluator:
    """Satisfaction and model generation for one query.

    Attributes:
        domains: Finite universes for quantifiers and frames
        budget: Step counter shared by everything this evaluator does
        perms: Permission fractions occurring in the query
    """

    def __init__(self, domains: Domains, budget: Optional[Budget] = None,
                 perms: Iterable[Fraction] = ()):
        self.domains = domains
        self.budget = budget or Budget(domains.node_limit)
        self.perms: FrozenSet[Fraction] = frozenset(p for p in perms if 0 < p <= 1)

    def tick(self, n: int = 1) -> None:
        self.budget.tick(n)

    # Satisfaction ----------------------------------------------------------

    def sat(self, s: Stack, h: PermHeap, a: Assertion) -> bool:
        self.tick()
        if isinstance(a, Pure):
            return self._pure(s, a.expr)
        if isinstance(a, Emp):
            return h.is_empty()
        if isinstance(a, PointsTo):
            return self._points_to(s, h, a)
        if isinstance(a, And):
            return self.sat(s, h, a.left) and self.sat(s, h, a.right)
        if isinstance(a, Not):
            return not self.sat(s, h, a.body)
        if isinstance(a, Exists):
            return any(
                self.sat(s.assign(a.var, v), h, a.body)
                for v in self.witnesses(a.var, a.body, a.typ, s, h)
            )
        if isinstance(a, Forall):
            typ = a.typ or infer_type(a.var, a.body, self.domains)
            for v in self.domains.values_of(typ):
                self.tick()
                if not self.sat(s.assign(a.var, v), h, a.body):
                    return False
            return True
        if isinstance(a, (Sep, IterSep)):
            return self._sep(s, h, flatten_sep(a))
        if isinstance(a, Wand):
            return self._wand(s, h, a)
        raise TypeError(f"not an assertion: {a!r}")

    def _pure(self, s: Stack, e: Expr) -> bool:
        try:
            return eval_bool(e, s)
        except EvalError:
            return False

    def _points_to(self, s: Stack, h: PermHeap, a: PointsTo) -> bool:
        if len(h) != 1:
            return False
        try:
            addr = eval_expr(a.addr, s)
            value = eval_expr(a.value, s)
        except EvalError:
            return False
        cell = h.get(addr) if is_address(addr) else None
        return cell is not None and cell.perm == a.perm and same_value(cell.value, value)

    def _sep(self, s: Stack, h: PermHeap, parts: List[Assertion]) -> bool:
        if any(isinstance(p, Exists) for p in parts):
            return self.sat(s, h, self._lift_exists(parts))
        rest = h
        absorb = False
        complex_parts: List[Assertion] = []
        for part in parts:
            if isinstance(part, Pure):
                if not self._pure(s, part.expr):
                    return False
                absorb = True
            elif fact_expr(part) is not None:
                if not self._pure(s, fact_expr(part)):
                    return False
            elif isinstance(part, PointsTo):
                try:
                    addr = eval_expr(part.addr, s)
                    value = eval_expr(part.value, s)
                except EvalError:
                    return False
                if not is_address(addr):
                    return False
                carved = heap_difference(rest, PermHeap({addr: Cell(part.perm, value)}))
                if carved is None:
                    return False
                rest = carved
            else:
                complex_parts.append(part)
        return self._split(s, rest, complex_parts, absorb)

    def _lift_exists(self, parts: List[Assertion]) -> Assertion:
        """∃x.A ** B  becomes  ∃x'.(A[x/x'] ** B) with x' fresh."""
        avoid: Set[str] = set()
        for p in parts:
            avoid |= all_names(p) | free_vars(p)
        binders: List[Tuple[str, Optional[str]]] = []
        bodies: List[Assertion] = []
        for part in parts:
            while isinstance(part, Exists):
                name = fresh_name(part.var, avoid)
                avoid.add(name)
                body = part.body if name == part.var else substitute(part.body, part.var, Var(name))
                binders.append((name, part.typ))
                part = body
            bodies.extend(flatten_sep(part) if isinstance(part, (Sep, IterSep)) else [part])
        result: Assertion = _sep_list(bodies)
        for name, typ in reversed(binders):
            result = Exists(name, result, typ)
        return result

    def _split(self, s: Stack, h: PermHeap, parts: List[Assertion], absorb: bool) -> bool:
        if not parts:
            return absorb or h.is_empty()
        if len(parts) == 1 and not absorb:
            return self.sat(s, h, parts[0])
        first, rest = parts[0], parts[1:]
        for sub in self.sub_heaps(h):
            if not self.sat(s, sub, first):
                continue
            remainder = heap_difference(h, sub)
            if remainder is not None and self._split(s, remainder, rest, absorb):
                return True
        return False

    def sub_heaps(self, h: PermHeap) -> Iterator[PermHeap]:
        """Sub-heaps of h whose portions come from {0, ρ, f, ρ - f}."""
        options: List[List[Optional[Cell]]] = []
        addrs = h.addresses()
        for addr in addrs:
            cell = h.get(addr)
            portions = {cell.perm}
            for f in self.perms:
                if f < cell.perm:
                    portions.add(f)
                    portions.add(cell.perm - f)
            options.append([None] + [Cell(p, cell.value) for p in sorted(portions)])
        for choice in itertools.product(*options):
            self.tick()
            yield PermHeap({a: c for a, c in zip(addrs, choice) if c is not None})

    def _wand(self, s: Stack, h: PermHeap, a: Wand) -> bool:
        for extra in self.models(s, a.left):
            total = heap_add(h, extra)
            if total is UNDEFINED:
                continue
            if not self.sat(s, total, a.right):
                return False
        return True

    # Existential witnesses -------------------------------------------------

    def witnesses(self, var: str, body: Assertion, typ: Optional[str],
                  s: Stack, h: Optional[PermHeap]) -> Iterator[Value]:
        pinned = self._pinned(var, body, s, h)
        if pinned is not None:
            yield from pinned
            return
        for v in self.domains.values_of(typ or infer_type(var, body, self.domains)):
            self.tick()
            yield v

    def _pinned(self, var: str, body: Assertion, s: Stack,
                h: Optional[PermHeap]) -> Optional[List[Value]]:
        """Values var must take for body to hold, when the body's spine fixes it."""
        for atom, bound in _spine(body):
            if var in bound:
                continue
            if isinstance(atom, PointsTo) and h is not None:
                if not (isinstance(atom.value, Var) and atom.value.name == var):
                    continue
                if (expr_vars(atom.addr) & bound) or var in expr_vars(atom.addr):
                    continue
                try:
                    addr = eval_expr(atom.addr, s)
                except EvalError:
                    return []
                cell = h.get(addr) if is_address(addr) else None
                return [] if cell is None else [cell.value]
            if isinstance(atom, Pure):
                for conjunct in _expr_conjuncts(atom.expr):
                    other = _equation_side(conjunct, var)
                    if other is None or expr_vars(other) & bound:
                        continue
                    try:
                        return [eval_expr(other, s)]
                    except EvalError:
                        return []
        return None

    # Model generation ------------------------------------------------------

    def models(self, s: Stack, a: Assertion) -> Iterator[PermHeap]:
        """Distinct heaps h (within the domains) with s, h ⊨ a."""
        seen: Set[Tuple] = set()
        for h in self._generate(s, a):
            key = h.key()
            if key in seen:
                continue
            seen.add(key)
            if self.sat(s, h, a):
                yield h

    def _generate(self, s: Stack, a: Assertion) -> Iterator[PermHeap]:
        """Candidate heaps covering every bounded model of a (filtered by callers)."""
        self.tick()
        if isinstance(a, Emp):
            yield EMPTY_HEAP
        elif isinstance(a, PointsTo):
            try:
                addr = eval_expr(a.addr, s)
                value = eval_expr(a.value, s)
            except EvalError:
                return
            if is_address(addr):
                yield PermHeap({addr: Cell(a.perm, value)})
        elif isinstance(a, Pure):
            if self._pure(s, a.expr):
                yield from self.frames()
        elif isinstance(a, (Sep, IterSep)):
            parts = sorted(flatten_sep(a), key=lambda p: 0 if is_exact(p) else 1)
            yield from self._generate_sep(s, parts, EMPTY_HEAP)
        elif isinstance(a, Exists):
            for v in self.witnesses(a.var, a.body, a.typ, s, None):
                yield from self._generate(s.assign(a.var, v), a.body)
        elif match_or(a) is not None:
            left, right = match_or(a)
            yield from self._generate(s, left)
            yield from self._generate(s, right)
        elif isinstance(a, And):
            if is_exact(a.left) or not is_exact(a.right):
                yield from self._generate(s, a.left)
            else:
                yield from self._generate(s, a.right)
        else:
            yield from self.frames()

    def _generate_sep(self, s: Stack, parts: Sequence[Assertion], acc: PermHeap) -> Iterator[PermHeap]:
        if not parts:
            yield acc
            return
        for part_heap in self._generate(s, parts[0]):
            total = heap_add(acc, part_heap)
            if total is not UNDEFINED:
                yield from self._generate_sep(s, parts[1:], total)

    def frames(self) -> Iterator[PermHeap]:
        for h in frame_heaps(self.domains, self.perms):
            self.tick()
            yield h


def _sep_list(parts: List[Assertion]) -> Assertion:
    if not parts:
        return Emp()
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = Sep(part, result)
    return result


def _spine(a: Assertion, bound: FrozenSet[str] = frozenset()) -> Iterator[Tuple[Assertion, FrozenSet[str]]]:
    """Atoms every model of a must satisfy (through **, && and ∃), with the names bound above them."""
    if isinstance(a, (Sep, And)):
        yield from _spine(a.left, bound)
        yield from _spine(a.right, bound)
    elif isinstance(a, IterSep):
        for part in a.parts:
            yield from _spine(part, bound)
    elif isinstance(a, Exists):
        yield from _spine(a.body, bound | {a.var})
    elif isinstance(a, (PointsTo, Pure)):
        yield a, bound


def _expr_conjuncts(e: Expr) -> List[Expr]:
    if isinstance(e, Binary) and e.op == "&&":
        return _expr_conjuncts(e.left) + _expr_conjuncts(e.right)
    return [e]


def _equation_side(e: Expr, var: str) -> Optional[Expr]:
    if not (isinstance(e, Binary) and e.op == "="):
        return None
    if isinstance(e.left, Var) and e.left.name == var and var not in expr_vars(e.right):
        return e.right
    if isinstance(e.right, Var) and e.right.name == var and var not in expr_vars(e.left):
        return e.left
    return None


def fact_expr(a: Assertion) -> Optional[Expr]:
    """The expression of a `pure && emp` fact, or None."""
    if isinstance(a, And):
        if isinstance(a.left, Pure) and isinstance(a.right, Emp):
            return a.left.expr
        if isinstance(a.right, Pure) and isinstance(a.left, Emp):
            return a.right.expr
    return None


def is_exact(a: Assertion) -> bool:
    """Whether generation enumerates a's models without the frame universe."""
    if isinstance(a, (Emp, PointsTo)):
        return True
    if isinstance(a, (Sep, IterSep)):
        return all(is_exact(p) for p in flatten_sep(a))
    if isinstance(a, Exists):
        return is_exact(a.body)
    if match_or(a) is not None:
        left, right = match_or(a)
        return is_exact(left) and is_exact(right)
    if isinstance(a, And):
        return is_exact(a.left) or is_exact(a.right)
    return False


# Public checks -------------------------------------------------------------

def query_perms(*assertions: Assertion) -> Set[Fraction]:
    found: Set[Fraction] = set()
    for a in assertions:
        found |= fractions(a)
    return found


def eval_assertion(s: Stack, h: PermHeap, a: Assertion, d: Domains) -> bool:
    """s, h ⊨ a within d.

    Raises:
        BudgetExceeded: the evaluation ran past d.node_limit
    """
    evaluator = Evaluator(d, perms=query_perms(a) | {c.perm for _, c in h.items()})
    return evaluator.sat(s, h, a)


def var_types(names: Iterable[str], assertions: Sequence[Assertion], d: Domains,
               hints: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    types: Dict[str, str] = {}
    for name in names:
        if hints and name in hints:
            types[name] = hints[name]
            continue
        guesses = [infer_type(name, a, d) for a in assertions]
        types[name] = next((g for g in guesses if g != "int"), "int")
    return types


def enumerate_stacks(names: Sequence[str], types: Dict[str, str], d: Domains, evaluator: Evaluator,
            pin_from: Optional[Assertion] = None) -> Iterator[Stack]:
    """Stacks over names, pinning variables that an equality in pin_from fixes."""

    def go(s: Stack, remaining: List[str]) -> Iterator[Stack]:
        if not remaining:
            yield s
            return
        if pin_from is not None:
            for index, name in enumerate(remaining):
                others = set(remaining) - {name}
                pinned = _pure_pin(name, pin_from, others)
                if pinned is not None:
                    try:
                        value = eval_expr(pinned, s)
                    except EvalError:
                        return
                    yield from go(s.assign(name, value), remaining[:index] + remaining[index + 1:])
                    return
        name = remaining[0]
        for v in d.values_of(types.get(name)):
            evaluator.tick()
            yield from go(s.assign(name, v), remaining[1:])

    yield from go(Stack(), list(names))


def _pure_pin(var: str, a: Assertion, unknown: Set[str]) -> Optional[Expr]:
    for atom, bound in _spine(a):
        if isinstance(atom, Pure) and var not in bound:
            for conjunct in _expr_conjuncts(atom.expr):
                other = _equation_side(conjunct, var)
                if other is not None and not (expr_vars(other) & (unknown | bound)):
                    return other
    return None


def open_binders(a: Assertion, avoid: Set[str]) -> Tuple[Assertion, Dict[str, str]]:
    """Strip a's leading existentials, renaming them away from avoid.

    Returns the body and the declared types of the opened names.
    """
    taken = set(avoid) | all_names(a)
    types: Dict[str, str] = {}
    while isinstance(a, Exists):
        name = fresh_name(a.var, taken)
        taken.add(name)
        if a.typ:
            types[name] = a.typ
        a = a.body if name == a.var else substitute(a.body, a.var, Var(name))
    return a, types


def _syntactically_entails(p: Assertion, q: Assertion) -> bool:
    """p is q, or one of the disjuncts of q."""
    if alpha_equal(p, q):
        return True
    split = match_or(q)
    return split is not None and any(_syntactically_entails(p, side) for side in split)


@functools.lru_cache(maxsize=1)
def _note_split_fractions() -> None:
    logger.warning("** splits use only the permission fractions occurring in each query; "
                   "a passing check holds within that restriction")


def check_entailment(p: Assertion, q: Assertion, d: Domains,
                     hints: Optional[Dict[str, str]] = None) -> Verdict:
    """p ⊨ q: every bounded model of p satisfies q.

    Entailments the symbolic matcher establishes are accepted without
    enumeration. Otherwise the leading existentials of p are opened into
    free variables, so that equalities can pin them against the variables
    of q.
    """
    if _syntactically_entails(p, q):
        return Verdict.ok("syntactically entailed")
    split = match_or(p)
    if split is not None:
        for side in split:
            verdict = check_entailment(side, q, d, hints)
            if not verdict.valid:
                return verdict
        return Verdict.ok()
    from .symbolic import prove_entailment
    if prove_entailment(p, q, d, hints):
        return Verdict.ok("proved symbolically")
    _note_split_fractions()
    body, opened = open_binders(p, free_vars(q))
    evaluator = Evaluator(d, perms=query_perms(body, q))
    names = sorted(free_vars(body) | free_vars(q))
    types = var_types(names, [body, q], d, dict(opened, **(hints or {})))
    try:
        for s in enumerate_stacks(names, types, d, evaluator, pin_from=body):
            for h in evaluator.models(s, body):
                if not evaluator.sat(s, h, q):
                    logger.debug(f"Entailment counterexample {s} {h}")
                    return Verdict.counterexample(s, h, "left side holds, right side does not")
    except BudgetExceeded as e:
        return Verdict.unknown(str(e))
    return Verdict.ok()


def check_validity(a: Assertion, d: Domains, hints: Optional[Dict[str, str]] = None) -> Verdict:
    """⊨ a over bounded stacks and frame-universe heaps."""
    implication = match_implies(a)
    if implication is not None:
        return check_entailment(implication[0], implication[1], d, hints)
    evaluator = Evaluator(d, perms=query_perms(a))
    names = sorted(free_vars(a))
    types = var_types(names, [a], d, hints)
    try:
        for s in enumerate_stacks(names, types, d, evaluator):
            for h in evaluator.frames():
                if not evaluator.sat(s, h, a):
                    return Verdict.counterexample(s, h, "assertion does not hold")
    except BudgetExceeded as e:
        return Verdict.unknown(str(e))
    return Verdict.ok()


def _lub_defined(h1: PermHeap, h2: PermHeap) -> bool:
    for addr, cell in h1.items():
        other = h2.get(addr)
        if other is not None and not same_value(cell.value, other.value):
            return False
    return True


def _lub(h1: PermHeap, h2: PermHeap) -> PermHeap:
    cells: Dict[Address, Cell] = {a: c for a, c in h1.items()}
    for addr, cell in h2.items():
        mine = cells.get(addr)
        if mine is None or mine.perm < cell.perm:
            cells[addr] = cell
    return PermHeap(cells)


def check_precise(p: Assertion, d: Domains, hints: Optional[Dict[str, str]] = None) -> Verdict:
    """p is precise: no heap has two different sub-heaps satisfying p."""
    evaluator = Evaluator(d, perms=query_perms(p))
    names = sorted(free_vars(p))
    types = var_types(names, [p], d, hints)
    try:
        for s in enumerate_stacks(names, types, d, evaluator):
            found: List[PermHeap] = []
            for h in evaluator.models(s, p):
                for other in found:
                    evaluator.tick()
                    if _lub_defined(h, other):
                        return Verdict.counterexample(
                            s, _lub(h, other), "two different sub-heaps satisfy the assertion",
                            first=other, second=h,
                        )
                found.append(h)
    except BudgetExceeded as e:
        return Verdict.unknown(str(e))
    return Verdict.ok()


def sorted_heaps(heaps: Iterable[PermHeap]) -> List[PermHeap]:
    return sorted(heaps, key=lambda h: h.key())


def satisfying_subheap(s: Stack, h: PermHeap, a: Assertion, d: Domains) -> Optional[PermHeap]:
    """Some h' ⊑ h with s, h' ⊨ a (used by the runtime audits), or None."""
    evaluator = Evaluator(d, perms=query_perms(a) | {c.perm for _, c in h.items()})
    if evaluator.sat(s, h, Sep(a, Pure(BoolLit(True)))):
        for sub in evaluator.sub_heaps(h):
            if evaluator.sat(s, sub, a):
                return sub
    return None
