"""Symbolic entailment between separation-logic assertions.

Both sides are brought into symbolic-heap form: existential names, points-to
cells, pure facts and opaque atoms. The goal's cells are matched against the
hypothesis's cells by syntactic address, its existentials are instantiated
by unification, and what is left is a pure implication. That implication is
discharged by substituting the hypothesis's equations and, for the few
variables that survive, by a search over the bounded domains.

The procedure is sound and incomplete. `prove_entailment` returns True only
when every model of the hypothesis satisfies the goal; False means "not
proved here" and the caller falls back to model enumeration.
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from ..errors import BudgetExceeded, EvalError
from ..lang.assertions import (
    TRUE_A, And, Assertion, Emp, Exists, IterSep, Not, PointsTo, Pure, Sep, all_names, alpha_equal,
    flatten_and, flatten_sep, free_vars, fresh_name, is_pure, match_implies, match_or, substitute,
    substitute_many,
)
from ..lang.ast import (
    FALSE, TRUE, Binary, BoolLit, Expr, GhostVar, IntLit, SeqLit, Unary, Var, expr_vars, subst_expr,
    walk_expr,
)
from .assertion_eval import var_types
from .domains import Budget, Domains
from .expressions import eval_bool, eval_expr
from .heap import Stack
from .values import Value

logger = logging.getLogger(__name__)

MAX_CASES = 64


def pure_expr(a: Assertion) -> Optional[Expr]:
    """The expression a first-order assertion denotes, when it has one."""
    if isinstance(a, Pure):
        return a.expr
    split = match_or(a)
    if split is not None:
        parts = [pure_expr(p) for p in split]
        return None if None in parts else Binary("||", parts[0], parts[1])
    implication = match_implies(a)
    if implication is not None:
        parts = [pure_expr(p) for p in implication]
        return None if None in parts else Binary("==>", parts[0], parts[1])
    if isinstance(a, Not):
        body = pure_expr(a.body)
        return None if body is None else Unary("!", body)
    if isinstance(a, And):
        left, right = pure_expr(a.left), pure_expr(a.right)
        return None if left is None or right is None else Binary("&&", left, right)
    return None


# Pure simplification -------------------------------------------------------

def _literal(v: Value) -> Optional[Expr]:
    if isinstance(v, bool):
        return BoolLit(v)
    if isinstance(v, int):
        return IntLit(v)
    if isinstance(v, tuple):
        items = [_literal(i) for i in v]
        return None if None in items else SeqLit(tuple(items))
    return None


def _closed(e: Expr) -> bool:
    return not any(isinstance(n, (Var, GhostVar)) for n in walk_expr(e))


def _indexes(e: Expr) -> bool:
    return any(isinstance(n, Binary) and n.op == "index" for n in walk_expr(e))


def simplify(e: Expr) -> Expr:
    """Fold constants and the boolean connectives a literal decides.

    Only rewrites that keep the evaluation-error behaviour of e are applied,
    so a simplified goal is never weaker than the original.
    """
    if isinstance(e, SeqLit):
        e = SeqLit(tuple(simplify(i) for i in e.items))
    elif isinstance(e, Unary):
        e = Unary(e.op, simplify(e.operand))
    elif isinstance(e, Binary):
        left, right = simplify(e.left), simplify(e.right)
        if e.op == "&&":
            if left == TRUE or right == TRUE:
                return right if left == TRUE else left
            if left == FALSE:
                return FALSE
        elif e.op == "||":
            if left in (TRUE, FALSE):
                return TRUE if left == TRUE else right
        elif e.op == "==>":
            if left in (TRUE, FALSE):
                return right if left == TRUE else TRUE
        elif e.op == "=" and left == right and not _indexes(left):
            return TRUE
        e = Binary(e.op, left, right)
    if _closed(e) and not isinstance(e, (IntLit, BoolLit)):
        try:
            folded = _literal(eval_expr(e, Stack()))
        except EvalError:
            return e
        if folded is not None:
            return folded
    return e


def conjuncts(e: Expr) -> List[Expr]:
    e = simplify(e)
    if isinstance(e, Binary) and e.op == "&&":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def _binding(fact: Expr) -> Optional[Tuple[str, Expr]]:
    """A variable the fact fixes, with its value."""
    if isinstance(fact, Var):
        return fact.name, TRUE
    if isinstance(fact, Unary) and fact.op == "!":
        inner = fact.operand
        if isinstance(inner, Var):
            return inner.name, FALSE
        if isinstance(inner, Unary) and inner.op == "!" and isinstance(inner.operand, Var):
            return inner.operand.name, TRUE
    if isinstance(fact, Binary) and fact.op == "=":
        for side, other in ((fact.left, fact.right), (fact.right, fact.left)):
            if isinstance(side, Var) and side.name not in expr_vars(other):
                return side.name, other
    return None


class PureProver:
    """Decides `facts ⇒ goals` over the bounded domains.

    Equations in the facts are substituted away first; the remaining
    variables of the goals, and of the facts connected to them, are then
    enumerated with early pruning on the facts.
    """

    def __init__(self, d: Domains, budget: Budget, types: Optional[Dict[str, str]] = None,
                 context: Sequence[Assertion] = ()):
        self.domains = d
        self.budget = budget
        self.types = dict(types or {})
        self.context = list(context)

    def implies(self, facts: Sequence[Expr], goals: Sequence[Expr]) -> bool:
        hyps = [c for f in facts for c in conjuncts(f)]
        wanted = [c for g in goals for c in conjuncts(g)]
        while True:
            if FALSE in hyps:
                return True
            hyps = [h for h in hyps if h != TRUE]
            wanted = [g for g in wanted if g != TRUE and g not in hyps]
            if not wanted:
                return True
            found = next(((i, b) for i, h in enumerate(hyps) if (b := _binding(h)) is not None), None)
            if found is None:
                break
            index, (name, value) = found
            self.budget.tick()
            del hyps[index]
            mapping = {name: value}
            hyps = [c for h in hyps for c in conjuncts(subst_expr(h, mapping))]
            wanted = [c for g in wanted for c in conjuncts(subst_expr(g, mapping))]
        return self._search(hyps, wanted)

    def _search(self, hyps: List[Expr], goals: List[Expr]) -> bool:
        names = set()
        for g in goals:
            names |= expr_vars(g)
        relevant: List[Expr] = []
        pending = list(hyps)
        changed = True
        while changed:
            changed = False
            for h in list(pending):
                if expr_vars(h) & names or not expr_vars(h):
                    relevant.append(h)
                    pending.remove(h)
                    names |= expr_vars(h)
                    changed = True
        assertions = [Pure(e) for e in relevant + goals] + self.context
        types = var_types(sorted(names), assertions, self.domains, self.types)
        counts = {n: sum(n in expr_vars(e) for e in relevant + goals) for n in names}
        order = sorted(names, key=lambda n: (types.get(n) == "seq", -counts[n], n))
        checks: List[List[Expr]] = [[] for _ in range(len(order) + 1)]
        for h in relevant:
            level = max((order.index(n) + 1 for n in expr_vars(h)), default=0)
            checks[level].append(h)
        return self._extend(Stack(), 0, order, types, checks, goals)

    def _extend(self, s: Stack, level: int, order: List[str], types: Dict[str, str],
                checks: List[List[Expr]], goals: List[Expr]) -> bool:
        self.budget.tick()
        if not all(_holds(h, s) for h in checks[level]):
            return True
        if level == len(order):
            return all(_holds(g, s) for g in goals)
        name = order[level]
        return all(self._extend(s.assign(name, v), level + 1, order, types, checks, goals)
                   for v in self.domains.values_of(types.get(name)))


def _holds(e: Expr, s: Stack) -> bool:
    try:
        return eval_bool(e, s)
    except EvalError:
        return False


# Symbolic heaps ------------------------------------------------------------

@dataclass(frozen=True)
class SymHeap:
    """`∃names. cells ∗ facts ∗ opaque`, absorbing when it also allows any frame."""
    names: Tuple[str, ...] = ()
    cells: Tuple[PointsTo, ...] = ()
    facts: Tuple[Expr, ...] = ()
    opaque: Tuple[Assertion, ...] = ()
    absorbing: bool = False

    def join(self, other: "SymHeap") -> "SymHeap":
        return SymHeap(self.names + other.names, self.cells + other.cells, self.facts + other.facts,
                       self.opaque + other.opaque, self.absorbing or other.absorbing)

    def with_facts(self, facts: Sequence[Expr]) -> "SymHeap":
        return replace(self, facts=self.facts + tuple(facts))

    def perm_at(self, addr: Expr) -> Fraction:
        return sum((c.perm for c in self.cells if c.addr == addr), Fraction(0))


def merge_cells(heap: SymHeap) -> Optional[SymHeap]:
    """One cell per syntactic address; None when the permissions overflow."""
    merged: Dict[Expr, PointsTo] = {}
    facts = list(heap.facts)
    for cell in heap.cells:
        seen = merged.get(cell.addr)
        if seen is None:
            merged[cell.addr] = cell
            continue
        perm = seen.perm + cell.perm
        if perm > 1:
            return None
        facts.append(Binary("=", seen.value, cell.value))
        merged[cell.addr] = PointsTo(cell.addr, perm, seen.value)
    return replace(heap, cells=tuple(merged.values()), facts=tuple(facts))


def _view(a: Assertion) -> Optional[Tuple[Tuple[str, ...], List[PointsTo]]]:
    """`∃ys. cells ∗ true`: its names and cells, or None."""
    names: List[str] = []
    while isinstance(a, Exists):
        names.append(a.var)
        a = a.body
    parts = flatten_sep(a)
    cells = [p for p in parts if isinstance(p, PointsTo)]
    if not cells or TRUE_A not in parts or any(p != TRUE_A and not isinstance(p, PointsTo) for p in parts):
        return None
    return tuple(names), cells


class Normalizer:
    """Brings an assertion into a list of symbolic heaps (a disjunction).

    On the hypothesis side existentials become fresh free names and shapes
    outside the fragment are weakened or kept opaque. On the goal side
    existentials become unknowns and every rewrite strengthens; shapes that
    cannot be strengthened make `run` return None.
    """

    def __init__(self, taken: Set[str], budget: Budget, goal: bool):
        self.taken = taken
        self.budget = budget
        self.goal = goal
        self.types: Dict[str, str] = {}

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.taken)
        self.taken.add(name)
        return name

    def run(self, a: Assertion) -> Optional[List[SymHeap]]:
        self.budget.tick()
        if isinstance(a, Emp):
            return [SymHeap()]
        if isinstance(a, PointsTo):
            return [SymHeap(cells=(a,))]
        if isinstance(a, (Sep, IterSep)):
            result = [SymHeap()]
            for part in flatten_sep(a):
                options = self.run(part)
                if options is None:
                    return None
                result = [x.join(y) for x in result for y in options]
                if len(result) > MAX_CASES:
                    return None
            return result
        if isinstance(a, Exists):
            if self.goal and a.typ:
                return None
            name = self.fresh(a.var)
            if a.typ:
                self.types[name] = a.typ
            body = a.body if name == a.var else substitute(a.body, a.var, Var(name))
            options = self.run(body)
            return None if options is None else [replace(o, names=(name,) + o.names) for o in options]
        e = pure_expr(a) if is_pure(a) else None
        if e is not None:
            return [SymHeap(facts=(e,), absorbing=True)]
        split = match_or(a)
        if split is not None:
            left, right = self.run(split[0]), self.run(split[1])
            return None if left is None or right is None else left + right
        if isinstance(a, And):
            return self._conjunction(a)
        return [SymHeap(opaque=(a,))]

    def _conjunction(self, a: And) -> Optional[List[SymHeap]]:
        facts: List[Expr] = []
        views: List[Assertion] = []
        bases: List[Assertion] = []
        for part in flatten_and(a):
            e = pure_expr(part) if is_pure(part) else None
            if e is not None:
                facts.append(e)
            elif is_pure(part):
                if self.goal:
                    return None
            elif _view(part) is not None:
                views.append(part)
            else:
                bases.append(part)
        if not bases and not views:
            return [SymHeap(facts=tuple(facts), absorbing=True)]
        if not bases:
            bases, views = views[:1], views[1:]
        if len(bases) > 1 and self.goal:
            return None
        options = self.run(bases[0])
        if options is None:
            return None
        result: List[SymHeap] = []
        for option in options:
            viewed: Optional[SymHeap] = option.with_facts(facts)
            for view in views:
                viewed = self._apply_view(viewed, view)
                if viewed is None:
                    break
            if viewed is not None:
                result.append(viewed)
        return result

    def _apply_view(self, heap: SymHeap, view: Assertion) -> Optional[SymHeap]:
        """`(∃ys. cells ∗ true) ∧ heap` as heap plus equations on its cell values."""
        names, cells = _view(view)
        mapping = {n: Var(self.fresh(n)) for n in names}
        facts: List[Expr] = []
        for cell in cells:
            value = subst_expr(cell.value, mapping)
            target = next((c for c in heap.cells if c.addr == cell.addr), None)
            if target is None or (self.goal and cell.perm > heap.perm_at(cell.addr)):
                if self.goal:
                    return None
                continue
            facts.append(Binary("=", value, target.value))
        added = tuple(v.name for v in mapping.values())
        return replace(heap, names=heap.names + added).with_facts(facts)


# Matching ------------------------------------------------------------------

def _bind(pattern: Expr, term: Expr, unknowns: Set[str], found: Dict[str, Expr]) -> bool:
    if isinstance(pattern, Var) and pattern.name in unknowns:
        if pattern.name in found:
            return found[pattern.name] == term
        found[pattern.name] = term
        return True
    if type(pattern) is not type(term):
        return False
    if isinstance(pattern, Unary):
        return pattern.op == term.op and _bind(pattern.operand, term.operand, unknowns, found)
    if isinstance(pattern, Binary):
        return (pattern.op == term.op and _bind(pattern.left, term.left, unknowns, found)
                and _bind(pattern.right, term.right, unknowns, found))
    if isinstance(pattern, SeqLit):
        return (len(pattern.items) == len(term.items)
                and all(_bind(p, t, unknowns, found) for p, t in zip(pattern.items, term.items)))
    return pattern == term


def unify(pattern: Expr, term: Expr, unknowns: Set[str], found: Dict[str, Expr]) -> bool:
    """Extend found so that pattern, instantiated, is term; leaves found alone on failure."""
    trial = dict(found)
    if _bind(pattern, term, unknowns, trial):
        found.update(trial)
        return True
    return False


def _instantiate(equations: List[Expr], unknowns: Set[str], found: Dict[str, Expr]) -> None:
    """Solve unknowns from equations whose other side is already known."""
    progress = True
    while progress:
        progress = False
        for e in equations:
            e = subst_expr(e, found)
            if not (isinstance(e, Binary) and e.op == "="):
                continue
            open_ = unknowns - set(found)
            for pattern, term in ((e.left, e.right), (e.right, e.left)):
                if expr_vars(pattern) & open_ and not expr_vars(term) & open_:
                    if unify(pattern, term, unknowns, found):
                        progress = True
                        break


def match(hyp: SymHeap, goal: SymHeap, budget: Budget) -> Optional[List[Expr]]:
    """Pure obligations under which hyp's heap satisfies goal, or None."""
    unknowns = set(goal.names)
    found: Dict[str, Expr] = {}
    equations: List[Expr] = []
    mine = {c.addr: c for c in hyp.cells}
    used: Set[Expr] = set()
    for cell in goal.cells:
        budget.tick()
        target = mine.get(cell.addr)
        if expr_vars(cell.addr) & unknowns or target is None or cell.perm > target.perm:
            return None
        if cell.perm < target.perm and not goal.absorbing:
            return None
        used.add(cell.addr)
        if not unify(cell.value, target.value, unknowns, found):
            equations.append(Binary("=", cell.value, target.value))
    if not goal.absorbing and (len(used) < len(hyp.cells) or hyp.absorbing):
        return None
    equations.extend(c for f in goal.facts for c in conjuncts(f))
    _instantiate(equations, unknowns, found)
    obligations = [subst_expr(e, found) for e in equations]
    if any(expr_vars(e) & unknowns for e in obligations):
        return None
    remaining = list(hyp.opaque)
    for atom in goal.opaque:
        budget.tick()
        atom = substitute_many(atom, found)
        if free_vars(atom) & unknowns:
            return None
        hit = next((i for i, other in enumerate(remaining) if alpha_equal(other, atom)), None)
        if hit is None:
            return None
        del remaining[hit]
    if remaining and not goal.absorbing:
        return None
    return obligations


def _cell_types(heap: SymHeap, d: Domains) -> Dict[str, str]:
    found: Dict[str, str] = {}
    for cell in heap.cells:
        if isinstance(cell.addr, GhostVar) and isinstance(cell.value, Var):
            typ = d.ghost_type(cell.addr.name)
            if typ:
                found[cell.value.name] = typ
    return found


def prove_entailment(p: Assertion, q: Assertion, d: Domains,
                     hints: Optional[Dict[str, str]] = None) -> bool:
    """True when p ⊨ q is established symbolically.

    Runs on the same step budget as the bounded check; an exhausted budget
    reads as "not proved".
    """
    budget = Budget(d.node_limit)
    try:
        return _prove(p, q, d, dict(hints or {}), budget)
    except BudgetExceeded:
        return False


def _prove(p: Assertion, q: Assertion, d: Domains, hints: Dict[str, str], budget: Budget) -> bool:
    taken = all_names(p) | all_names(q)
    left = Normalizer(taken, budget, goal=False)
    hyps = left.run(p)
    goals = Normalizer(taken, budget, goal=True).run(q)
    if hyps is None or goals is None:
        return False
    goals = [g for g in map(merge_cells, goals) if g is not None]
    for hyp in hyps:
        hyp = merge_cells(hyp)
        if hyp is None:
            continue
        types = {**left.types, **_cell_types(hyp, d), **hints}
        prover = PureProver(d, budget, types, context=list(hyp.cells) + [p, q])
        if not any(_discharges(hyp, goal, prover, budget) for goal in goals):
            if not prover.implies(hyp.facts, [FALSE]):
                logger.debug(f"Symbolic entailment not established for case with {len(hyp.cells)} cells")
                return False
    return True


def _discharges(hyp: SymHeap, goal: SymHeap, prover: PureProver, budget: Budget) -> bool:
    obligations = match(hyp, goal, budget)
    return obligations is not None and prover.implies(hyp.facts, obligations)
