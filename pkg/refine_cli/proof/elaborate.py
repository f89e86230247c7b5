"""Candidate derivations from annotated programs.

The elaborator runs the program forward over symbolic states: an
existential prefix over a list of separated atoms (points-to cells,
`pure && emp` facts and opaque parts). Every step that reshapes a state
is recorded as a Cons node, so acceptance is still decided by the
checker alone.
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import List, Optional, Sequence, Set, Tuple

from ..errors import MissingAnnotation, RefineError
from ..lang.assertions import (
    EMP, TRUE_A, And, Assertion, Emp, Exists, IterSep, PointsTo, Pure, Sep, all_names,
    alpha_equal, exists_all, flatten_sep, free_vars, fresh_name, is_pure, match_or,
    or_, sep_all, substitute,
)
from ..lang.ast import (
    GHOST_LOCK, INIT_TOKEN, TRUE, Alloc, Assign, Binary, Command, Expr, Free, GhostAssign,
    GhostVar, InitBlock, Ite, LockDecl, NextBlock, Par, Print, Program, Read, Seq, Skip, Unary, Var,
    While, With, Write, expr_vars, subst_expr, subst_ghost_values, walk_command,
)
from ..lang.derivation_io import Derivation, DerivationNode
from ..lang.pretty import format_command, format_expr
from ..semantics.assertion_eval import fact_expr
from ..semantics.ats import ATSSpec, check_assumption1
from ..semantics.domains import Domains
from ..semantics.opsem import command_vars
from ..semantics.symbolic import pure_expr
from .rules import LockEnv, Rule, init_pre, next_post, next_pre, write_pre

logger = logging.getLogger(__name__)

ONE = Fraction(1)


def fact(e: Expr) -> Assertion:
    return And(Pure(e), EMP)


def or_all(parts: Sequence[Assertion]) -> Assertion:
    distinct: List[Assertion] = []
    for part in parts:
        if not any(alpha_equal(part, seen) for seen in distinct):
            distinct.append(part)
    result = distinct[-1]
    for part in reversed(distinct[:-1]):
        result = or_(part, result)
    return result


def _trivial(e: Expr) -> bool:
    if e == TRUE:
        return True
    return isinstance(e, Binary) and e.op == "=" and e.left == e.right


@dataclass(frozen=True)
class SymState:
    """`∃names. atom1 ∗ ... ∗ atomN`"""
    names: Tuple[str, ...] = ()
    atoms: Tuple[Assertion, ...] = ()

    def assertion(self) -> Assertion:
        return exists_all(self.names, sep_all(self.atoms))

    def bind(self, *names: str) -> "SymState":
        return SymState(self.names + names, self.atoms)

    def join(self, other: "SymState") -> "SymState":
        return SymState(self.names + other.names, self.atoms + other.atoms)

    def with_fact(self, e: Expr) -> "SymState":
        return SymState(self.names, self.atoms + (fact(e),))

    def rename(self, var: str, new: str) -> "SymState":
        atoms = tuple(substitute(a, var, Var(new)) for a in self.atoms)
        return SymState(self.names + (new,), atoms)

    def cell(self, addr: Expr) -> Optional[int]:
        for index, atom in enumerate(self.atoms):
            if isinstance(atom, PointsTo) and atom.addr == addr:
                return index
        return None

    def without(self, index: int) -> Tuple[Assertion, ...]:
        return self.atoms[:index] + self.atoms[index + 1:]


class OutlineElaborator:
    """Builds one derivation for a program from its annotations.

    Loops, locks and the init block must carry invariants; `par` needs a
    `requires` on at least one branch. Midconditions (`assert`) and branch
    `ensures` are honoured where present.
    """

    def __init__(self, program: Program, ats: Optional[ATSSpec] = None,
                 domains: Optional[Domains] = None, rho: Optional[Fraction] = None):
        self.program = program
        self.ats = ats
        self.domains = domains or Domains()
        self.rho = rho
        self.taken: Set[str] = set(program.ghosts) | {"stdOut"} | command_vars(program.command)
        self.taken |= all_names(program.pre) | all_names(program.post)
        for c in walk_command(program.command):
            for annotation in _annotations(c):
                self.taken |= all_names(annotation)
        if ats is not None:
            self.taken |= set(ats.vars)

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.taken)
        self.taken.add(name)
        return name

    # Symbolic states -------------------------------------------------------

    def normalize(self, a: Assertion) -> List[SymState]:
        """Disjuncts of a weakening of a, each tidied."""
        return [self.tidy(s) for s in self._split(a)]

    def _split(self, a: Assertion) -> List[SymState]:
        if isinstance(a, Emp):
            return [SymState()]
        if isinstance(a, Exists):
            name = self.fresh(a.var)
            body = a.body if name == a.var else substitute(a.body, a.var, Var(name))
            return [s.bind(name) for s in self._split(body)]
        if isinstance(a, (Sep, IterSep)):
            states = [SymState()]
            for part in flatten_sep(a):
                states = [s.join(t) for s in states for t in self._split(part)]
            return states
        split = match_or(a)
        if split is not None:
            return self._split(split[0]) + self._split(split[1])
        if isinstance(a, And) and fact_expr(a) is None:
            for side, other in ((a.right, a.left), (a.left, a.right)):
                e = pure_expr(side) if is_pure(side) else None
                if e is not None:
                    return [s.with_fact(e) for s in self._split(other)]
            for cells, other in ((a.left, a.right), (a.right, a.left)):
                viewed = self._cell_view(cells, other)
                if viewed is not None:
                    return viewed
        return [SymState(atoms=(a,))]

    def _cell_view(self, cells: Assertion, other: Assertion) -> Optional[List[SymState]]:
        """`(x ↦ v ∗ true) ∧ R` as R plus the facts equating v with R's cell values."""
        parts = flatten_sep(cells)
        points = [p for p in parts if isinstance(p, PointsTo)]
        if not points or any(not isinstance(p, PointsTo) and p != TRUE_A for p in parts):
            return None
        results = []
        for state in self._split(other):
            state = self._merge(state)
            for cell in points:
                index = state.cell(cell.addr)
                if index is None:
                    return None
                state = state.with_fact(Binary("=", cell.value, state.atoms[index].value))
            results.append(state)
        return results

    def _merge(self, state: SymState) -> SymState:
        cells: List[PointsTo] = []
        others: List[Assertion] = []
        facts: List[Assertion] = []
        for atom in state.atoms:
            if isinstance(atom, PointsTo):
                for index, prev in enumerate(cells):
                    if prev.addr == atom.addr and prev.perm + atom.perm <= ONE:
                        cells[index] = PointsTo(prev.addr, prev.perm + atom.perm, prev.value)
                        if prev.value != atom.value:
                            facts.append(fact(Binary("=", prev.value, atom.value)))
                        break
                else:
                    cells.append(atom)
            elif fact_expr(atom) is not None:
                facts.append(atom)
            else:
                others.append(atom)
        return SymState(state.names, tuple(cells) + tuple(others) + tuple(facts))

    def _eliminate(self, state: SymState) -> Optional[SymState]:
        """Substitute away one existential fixed by an equation, if any."""
        for index, atom in enumerate(state.atoms):
            e = fact_expr(atom)
            if not (isinstance(e, Binary) and e.op == "="):
                continue
            for side, other in ((e.left, e.right), (e.right, e.left)):
                if isinstance(side, Var) and side.name in state.names and side.name not in expr_vars(other):
                    rest = tuple(substitute(a, side.name, other) for a in state.without(index))
                    names = tuple(n for n in state.names if n != side.name)
                    return SymState(names, rest)
        return None

    def tidy(self, state: SymState) -> SymState:
        state = self._merge(state)
        while True:
            reduced = self._eliminate(state)
            if reduced is None:
                break
            state = self._merge(reduced)
        atoms = tuple(a for a in state.atoms if fact_expr(a) is None or not _trivial(fact_expr(a)))
        used: Set[str] = set()
        for atom in atoms:
            used |= free_vars(atom)
        return SymState(tuple(n for n in state.names if n in used), atoms)

    def _loose_facts_dropped(self, state: SymState) -> SymState:
        held: Set[str] = set()
        for atom in state.atoms:
            if fact_expr(atom) is None:
                held |= free_vars(atom)
        bound = set(state.names)
        atoms = tuple(
            a for a in state.atoms
            if fact_expr(a) is None or not ((free_vars(a) & bound) - held)
        )
        return self.tidy(SymState(state.names, atoms))

    def cells_of(self, inv: Assertion) -> List[PointsTo]:
        states = self.normalize(inv)
        return [a for a in states[0].atoms if isinstance(a, PointsTo)] if states else []

    def remainder(self, a: Assertion, inv: Assertion, hide: Sequence[str] = ()) -> Assertion:
        """What is left of a once the cells inv describes are handed over."""
        handed = self.cells_of(inv)
        parts = []
        for state in self.normalize(a):
            atoms = list(state.atoms)
            for cell in handed:
                for index, atom in enumerate(atoms):
                    if isinstance(atom, PointsTo) and atom.addr == cell.addr:
                        left = atom.perm - cell.perm
                        if left > 0:
                            atoms[index] = PointsTo(atom.addr, left, atom.value)
                        elif left == 0:
                            del atoms[index]
                        break
            rest = SymState(state.names + tuple(hide), tuple(atoms))
            parts.append(self._loose_facts_dropped(self.tidy(rest)).assertion())
        return or_all(parts)

    # Tree building ---------------------------------------------------------

    @staticmethod
    def node(rule: Rule, env: LockEnv, pre: Assertion, command: Command, post: Assertion,
             children: Sequence[DerivationNode] = (), **witnesses) -> DerivationNode:
        return DerivationNode(rule.value, env.bindings, pre, command, post, list(children), dict(witnesses))

    @staticmethod
    def strengthen(pre: Assertion, node: DerivationNode) -> DerivationNode:
        """A node for the same command starting from pre."""
        if alpha_equal(pre, node.pre):
            return node
        if node.rule == Rule.CONS.value:
            return replace(node, pre=pre)
        return DerivationNode(Rule.CONS.value, node.env, pre, node.command, node.post, [node])

    @staticmethod
    def weaken(node: DerivationNode, post: Assertion) -> DerivationNode:
        if alpha_equal(post, node.post):
            return node
        if node.rule == Rule.CONS.value:
            return replace(node, post=post)
        return DerivationNode(Rule.CONS.value, node.env, node.pre, node.command, post, [node])

    # Commands --------------------------------------------------------------

    def elaborate(self, c: Command, pre: Assertion, env: LockEnv) -> DerivationNode:
        """A derivation of `env ⊢ {pre} c {Q}` for some computed Q."""
        if isinstance(c, Seq):
            first = self.elaborate(c.first, pre, env)
            if c.mid is not None:
                first = self.weaken(first, c.mid)
            second = self.elaborate(c.second, first.post, env)
            return self.node(Rule.SEQ, env, pre, c, second.post, [first, second])
        if isinstance(c, Skip):
            return self.node(Rule.SKIP, env, pre, c, pre)
        if isinstance(c, Ite):
            return self._cond(c, pre, env)
        if isinstance(c, While):
            return self._loop(c, pre, env)
        if isinstance(c, Par):
            return self._par(c, pre, env)
        if isinstance(c, LockDecl):
            return self._lock(c, pre, env)
        if isinstance(c, With):
            return self._with(c, pre, env)
        if isinstance(c, InitBlock):
            return self._init(c, pre, env)
        if isinstance(c, NextBlock):
            return self._next(c, pre, env)
        if isinstance(c, (Assign, Read, Write, Free, Alloc, Print, GhostAssign)):
            return self._base(c, pre, env)
        raise RefineError(f"cannot elaborate {type(c).__name__}")

    def _cond(self, c: Ite, pre: Assertion, env: LockEnv) -> DerivationNode:
        then = self.elaborate(c.then, And(pre, Pure(c.cond)), env)
        other = self.elaborate(c.else_, And(pre, Pure(Unary("!", c.cond))), env)
        post = or_all([then.post, other.post])
        return self.node(Rule.COND, env, pre, c, post, [self.weaken(then, post), self.weaken(other, post)])

    def _loop(self, c: While, pre: Assertion, env: LockEnv) -> DerivationNode:
        if c.invariant is None:
            raise MissingAnnotation("loop invariant", _where(c))
        inv = c.invariant
        body = self.weaken(self.elaborate(c.body, And(inv, Pure(c.cond)), env), inv)
        loop = self.node(Rule.WHILE, env, inv, c, And(inv, Pure(Unary("!", c.cond))), [body])
        return self.strengthen(pre, loop)

    def _par(self, c: Par, pre: Assertion, env: LockEnv) -> DerivationNode:
        left_spec, right_spec = c.left_spec, c.right_spec
        p1 = left_spec.requires if left_spec else None
        p2 = right_spec.requires if right_spec else None
        if p1 is None and p2 is None:
            raise MissingAnnotation("branch requires", _where(c))
        p1 = p1 if p1 is not None else self.remainder(pre, p2)
        p2 = p2 if p2 is not None else self.remainder(pre, p1)
        left = self.elaborate(c.left, p1, env)
        right = self.elaborate(c.right, p2, env)
        if left_spec and left_spec.ensures is not None:
            left = self.weaken(left, left_spec.ensures)
        if right_spec and right_spec.ensures is not None:
            right = self.weaken(right, right_spec.ensures)
        par = self.node(Rule.PAR, env, Sep(p1, p2), c, Sep(left.post, right.post), [left, right])
        return self.strengthen(pre, par)

    def _lock(self, c: LockDecl, pre: Assertion, env: LockEnv) -> DerivationNode:
        if c.invariant is None:
            raise MissingAnnotation("lock invariant", _where(c))
        inv = c.invariant
        rest = self.remainder(pre, inv)
        body = self.elaborate(c.body, rest, env.extend(c.lock, inv))
        lock = self.node(Rule.LOCK, env, Sep(inv, rest), c, Sep(inv, body.post), [body])
        return self.strengthen(pre, lock)

    def _with(self, c: With, pre: Assertion, env: LockEnv) -> DerivationNode:
        inv = env.lookup(c.lock)
        body = self.elaborate(c.body, And(Sep(pre, inv), Pure(c.cond)), env.without(c.lock))
        post = self.remainder(body.post, inv)
        return self.node(Rule.WITH, env, pre, c, post, [self.weaken(body, Sep(post, inv))])

    def _spec(self, c: Command) -> ATSSpec:
        if self.ats is None:
            raise MissingAnnotation("abstract model", _where(c))
        return self.ats

    def _permission(self, ghost_inv: Assertion) -> Fraction:
        if self.rho is None:
            verdict = check_assumption1(ghost_inv, self.ats, self.domains)
            if verdict.valid:
                self.rho = verdict.permission
            else:
                logger.warning(f"No ghost permission found for the init invariant: {verdict.detail}")
                self.rho = ONE
        return self.rho

    def _init(self, c: InitBlock, pre: Assertion, env: LockEnv) -> DerivationNode:
        spec = self._spec(c)
        if c.invariant is None:
            raise MissingAnnotation("init invariant", _where(c))
        ghost_inv = c.invariant
        rho = self._permission(ghost_inv)
        rest = self.remainder(pre, ghost_inv)
        ys = [self.fresh("y") for _ in range(spec.k)]
        inner = env.extend(GHOST_LOCK, ghost_inv).extend(INIT_TOKEN, EMP)
        body = self.elaborate(c.body, rest, inner)
        init = self.node(Rule.INIT, env, init_pre(spec, ys, rho, ghost_inv, rest), c,
                         Sep(ghost_inv, body.post), [body], rho=rho)
        return self.strengthen(pre, init)

    def _next(self, c: NextBlock, pre: Assertion, env: LockEnv) -> DerivationNode:
        spec = self._spec(c)
        ghost_inv = env.lookup(GHOST_LOCK)
        rho = self._permission(ghost_inv)
        olds = [self.fresh("o") for _ in range(spec.k)]
        inner = env.without(GHOST_LOCK)
        body = self.elaborate(c.body, next_pre(spec, olds, rho, ghost_inv, pre), inner)
        post = self.remainder(body.post, ghost_inv, hide=olds)
        ys = [self.fresh("y") for _ in range(spec.k)]
        body = self.weaken(body, next_post(spec, olds, ys, rho, ghost_inv, post))
        return self.node(Rule.NEXT, env, pre, c, post, [body], fresh=tuple(olds), rho=rho)

    # Base commands

    def _base(self, c: Command, pre: Assertion, env: LockEnv) -> DerivationNode:
        states = self.normalize(pre)
        if len(states) == 1:
            return self._single(c, pre, states[0], env)
        return self.strengthen(pre, self._cases(c, states, env))

    def _cases(self, c: Command, states: List[SymState], env: LockEnv) -> DerivationNode:
        first = self._single(c, states[0].assertion(), states[0], env)
        if len(states) == 1:
            return first
        rest = self._cases(c, states[1:], env)
        return self.node(Rule.DISJ, env, or_(first.pre, rest.pre), c, or_(first.post, rest.post), [first, rest])

    def _hidden(self, state: SymState, var: str) -> SymState:
        if var in free_vars(state.assertion()):
            return state.rename(var, self.fresh(var))
        return state

    def _owned(self, c: Command, state: SymState, addr: Expr, full: bool = True) -> int:
        index = state.cell(addr)
        if index is None or (full and state.atoms[index].perm != ONE):
            raise MissingAnnotation(f"ownership of {format_expr(addr)}", _where(c))
        return index

    def _single(self, c: Command, pre: Assertion, state: SymState, env: LockEnv) -> DerivationNode:
        if isinstance(c, Assign):
            return self._assign(c, pre, state, env)
        if isinstance(c, Read):
            state = self._hidden(state, c.var)
            index = self._owned(c, state, c.addr, full=False)
            cell = state.atoms[index]
            axiom = self.node(Rule.READ, env, cell, c, And(cell, Pure(Binary("=", Var(c.var), cell.value))))
            return self._framed(c, pre, state, index, axiom)
        if isinstance(c, Alloc):
            state = self._hidden(state, c.var)
            axiom = self.node(Rule.ALLOC, env, EMP, c, PointsTo(Var(c.var), ONE, c.expr))
            return self._framed(c, pre, state, None, axiom)
        if isinstance(c, (Write, Free)):
            index = self._owned(c, state, c.addr)
            post = PointsTo(c.addr, ONE, c.value) if isinstance(c, Write) else EMP
            axiom = self.node(Rule.WRITE if isinstance(c, Write) else Rule.FREE, env, write_pre(c.addr), c, post)
            return self._framed(c, pre, state, index, axiom)
        if isinstance(c, Print):
            index = self._owned(c, state, GhostVar("stdOut"))
            cell = state.atoms[index]
            post = PointsTo(cell.addr, ONE, Binary(":", c.expr, cell.value))
            return self._framed(c, pre, state, index, self.node(Rule.PRINT, env, cell, c, post))
        index = self._owned(c, state, GhostVar(c.name))
        cell = state.atoms[index]
        post = PointsTo(cell.addr, ONE, subst_ghost_values(c.expr, {c.name: cell.value}))
        axiom = self.node(Rule.WRITE, env, cell, c, post, old=cell.value)
        return self._framed(c, pre, state, index, axiom)

    def _assign(self, c: Assign, pre: Assertion, state: SymState, env: LockEnv) -> DerivationNode:
        value = c.expr
        if c.var in free_vars(state.assertion()) or c.var in expr_vars(c.expr):
            old = self.fresh(c.var)
            state = state.rename(c.var, old)
            value = subst_expr(c.expr, {c.var: Var(old)})
        post = self.tidy(state.with_fact(Binary("=", Var(c.var), value))).assertion()
        axiom = self.node(Rule.ASSIGN, env, substitute(post, c.var, c.expr), c, post)
        return self.strengthen(pre, axiom)

    def _framed(self, c: Command, pre: Assertion, state: SymState, index: Optional[int],
                axiom: DerivationNode) -> DerivationNode:
        """Open the state's existentials, frame off everything but the footprint, then the axiom."""
        if index is None:
            foot, rest = EMP, state.atoms
        else:
            foot, rest = state.atoms[index], state.without(index)
        frame = sep_all(rest)
        inner = self.strengthen(foot, axiom)
        node = DerivationNode(Rule.FRAME.value, axiom.env, Sep(foot, frame), c, Sep(inner.post, frame),
                              [inner], {"frame": frame})
        for name in reversed(state.names):
            post = Exists(name, node.post) if name in free_vars(node.post) else node.post
            node = DerivationNode(Rule.EX.value, axiom.env, Exists(name, node.pre), c, post, [node], {"var": name})
        return self.strengthen(pre, node)


def _annotations(c: Command) -> List[Assertion]:
    found: List[Assertion] = []
    for attr in ("invariant", "mid"):
        value = getattr(c, attr, None)
        if value is not None:
            found.append(value)
    if isinstance(c, Par):
        for spec in (c.left_spec, c.right_spec):
            if spec is not None:
                found.extend(a for a in (spec.requires, spec.ensures) if a is not None)
    return found


def _where(c: Command) -> str:
    head = format_command(c).splitlines()[0].strip()
    return head if len(head) <= 48 else head[:45] + "..."


def elaborate_outline(program: Program, ats: Optional[ATSSpec] = None, env: Optional[LockEnv] = None,
                      domains: Optional[Domains] = None, rho: Optional[Fraction] = None) -> DerivationNode:
    """Build a candidate derivation of `env ⊢ {pre} C {post}` for an annotated program.

    Raises:
        MissingAnnotation: a loop, lock, init block or par lacks the annotation elaboration needs
    """
    elaborator = OutlineElaborator(program, ats, domains, rho)
    root = elaborator.elaborate(program.command, program.pre, env or LockEnv())
    if not alpha_equal(program.post, TRUE_A):
        root = elaborator.weaken(root, program.post)
    logger.info(f"Elaborated outline into {root.size()} derivation nodes")
    return root


def outline_derivation(program: Program, ats: Optional[ATSSpec] = None, domains: Optional[Domains] = None,
                       rho: Optional[Fraction] = None) -> Derivation:
    return Derivation(elaborate_outline(program, ats, None, domains, rho), tuple(program.ghosts), program.source)
