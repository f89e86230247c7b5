"""Abstract transition systems: states, transitions, traces and the ghost-permission check."""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Optional, Set, Tuple

from ..errors import BudgetExceeded, EvalError
from ..lang.assertions import (
    Assertion, Pure, acc, and_all, flatten_and, fractions, match_or, or_, sep_all,
)
from ..lang.ast import Binary, Expr, GhostVar, Var, expr_vars
from .assertion_eval import Evaluator, check_entailment, infer_type
from .domains import Budget, Domains, Verdict
from .expressions import eval_expr
from .heap import EMPTY_HEAP, Stack
from .values import STDOUT, STDOUT_NAME, GhostAddr, Value, encode_value, value_key

logger = logging.getLogger(__name__)

State = Tuple[Value, ...]
Trace = Tuple[Value, ...]


def primed(name: str) -> str:
    return name + "'"


@dataclass(frozen=True)
class ATSSpec:
    """An abstract transition system over variables x1..xk.

    Attributes:
        vars: Variable names; vars[0] is the observable x1
        init: First-order formula over vars
        next: First-order formula over vars and their primed copies
        types: Declared type per variable (None when undeclared)
        ghost_addresses: Ghost cell holding each variable; x1 lives in stdOut
        stutter_closed: Whether next already admits stuttering
        source: File the spec was read from
    """
    vars: Tuple[str, ...]
    init: Assertion
    next: Assertion
    types: Tuple[Optional[str], ...]
    ghost_addresses: Tuple[GhostAddr, ...]
    stutter_closed: bool = False
    source: Optional[str] = field(default=None, compare=False)

    @classmethod
    def build(cls, names: Iterable[str], init: Assertion, nxt: Assertion,
              types: Optional[Dict[str, Optional[str]]] = None,
              source: Optional[str] = None) -> "ATSSpec":
        """Order the variables so that stdOut, when declared, is x1."""
        ordered = list(names)
        if STDOUT_NAME in ordered:
            ordered.remove(STDOUT_NAME)
            ordered.insert(0, STDOUT_NAME)
        types = types or {}
        addresses = [STDOUT] + [GhostAddr(n) for n in ordered[1:]]
        return cls(
            vars=tuple(ordered),
            init=init,
            next=nxt,
            types=tuple(types.get(n) for n in ordered),
            ghost_addresses=tuple(addresses),
            source=source,
        )

    @property
    def k(self) -> int:
        return len(self.vars)

    @property
    def observable(self) -> str:
        return self.vars[0]

    def ghost_names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.ghost_addresses)

    def ghost_types(self) -> Dict[str, str]:
        """Content type of each ghost cell (x1 defaults to sequences)."""
        result: Dict[str, str] = {}
        for index, (addr, typ) in enumerate(zip(self.ghost_addresses, self.types)):
            guess = typ or infer_type(self.vars[index], self.init)
            if index == 0 and typ is None:
                guess = "seq"
            result[addr.name] = guess
        return result

    def var_type(self, name: str) -> str:
        base = name.rstrip("'")
        index = self.vars.index(base)
        return self.ghost_types()[self.ghost_addresses[index].name]

    def to_dict(self) -> Dict[str, Any]:
        from ..lang.pretty import format_assertion

        return {
            "vars": list(self.vars),
            "types": [t for t in self.types],
            "ghost_addresses": [str(a) for a in self.ghost_addresses],
            "init": format_assertion(self.init),
            "next": format_assertion(self.next),
            "stutter_closed": self.stutter_closed,
        }


def stutter_close(spec: ATSSpec) -> ATSSpec:
    """Next ∨ (x1' = x1 ∧ ... ∧ xk' = xk)."""
    if spec.stutter_closed:
        return spec
    stutter = and_all(Pure(Binary("=", Var(primed(x)), Var(x))) for x in spec.vars)
    return replace(spec, next=or_(spec.next, stutter), stutter_closed=True)


def bind(spec: ATSSpec, state: State, nxt: Optional[State] = None) -> Stack:
    bindings = dict(zip(spec.vars, state))
    if nxt is not None:
        bindings.update({primed(x): v for x, v in zip(spec.vars, nxt)})
    return Stack(bindings)


def _holds(formula: Assertion, s: Stack, d: Domains, evaluator: Optional[Evaluator] = None) -> bool:
    evaluator = evaluator or Evaluator(d)
    return evaluator.sat(s, EMPTY_HEAP, formula)


def is_initial(state: State, spec: ATSSpec, d: Domains) -> bool:
    if len(state) != spec.k:
        return False
    return _holds(spec.init, bind(spec, state), d)


def is_transition(state: State, nxt: State, spec: ATSSpec, d: Domains) -> bool:
    if len(state) != spec.k or len(nxt) != spec.k:
        return False
    return _holds(spec.next, bind(spec, state, nxt), d)


# Solving -------------------------------------------------------------------

def _disjuncts(a: Assertion) -> List[Assertion]:
    split = match_or(a)
    if split is None:
        return [a]
    return _disjuncts(split[0]) + _disjuncts(split[1])


def _equations(a: Assertion) -> List[Tuple[str, Expr]]:
    """(name, E) for every conjunct `name = E` or `E = name` of a."""
    found: List[Tuple[str, Expr]] = []

    def conjuncts(e: Expr) -> Iterator[Expr]:
        if isinstance(e, Binary) and e.op == "&&":
            yield from conjuncts(e.left)
            yield from conjuncts(e.right)
        else:
            yield e

    for part in flatten_and(a):
        if not isinstance(part, Pure):
            continue
        for e in conjuncts(part.expr):
            if not (isinstance(e, Binary) and e.op == "="):
                continue
            if isinstance(e.left, Var):
                found.append((e.left.name, e.right))
            if isinstance(e.right, Var):
                found.append((e.right.name, e.left))
    return found


def _solve(unknowns: List[str], formula: Assertion, s: Stack, spec: ATSSpec,
           d: Domains, budget: Budget) -> Iterator[Stack]:
    """Extend s to the unknowns: pinned by equations when possible, enumerated otherwise."""
    evaluator = Evaluator(d, budget)
    for disjunct in _disjuncts(formula):
        equations = _equations(disjunct)
        pinned = dict()
        current = s
        progress = True
        while progress:
            progress = False
            for name, e in equations:
                if name in unknowns and name not in pinned:
                    if expr_vars(e) & (set(unknowns) - set(pinned)):
                        continue
                    try:
                        value = eval_expr(e, current)
                    except EvalError:
                        continue
                    pinned[name] = value
                    current = current.assign(name, value)
                    progress = True
        free = [u for u in unknowns if u not in pinned]
        yield from _enumerate(free, current, spec, d, budget, evaluator, formula)


def _enumerate(free: List[str], s: Stack, spec: ATSSpec, d: Domains, budget: Budget,
               evaluator: Evaluator, formula: Assertion) -> Iterator[Stack]:
    if not free:
        budget.tick()
        if evaluator.sat(s, EMPTY_HEAP, formula):
            yield s
        return
    name = free[0]
    for v in d.values_of(spec.var_type(name)):
        budget.tick()
        yield from _enumerate(free[1:], s.assign(name, v), spec, d, budget, evaluator, formula)


def _state_key(state: State) -> Tuple:
    return tuple(value_key(v) for v in state)


def initial_states(spec: ATSSpec, d: Domains, budget: Optional[Budget] = None) -> List[State]:
    """States satisfying Init; equations pin variables, the rest range over d."""
    budget = budget or Budget(d.node_limit, "ats")
    found: Dict[Tuple, State] = {}
    for s in _solve(list(spec.vars), spec.init, Stack(), spec, d, budget):
        state = tuple(s[x] for x in spec.vars)
        found.setdefault(_state_key(state), state)
    return [found[k] for k in sorted(found)]


def successors(state: State, spec: ATSSpec, d: Domains, budget: Optional[Budget] = None) -> List[State]:
    """States σ' with ⊨ Next(σ, σ'); primed variables fixed by equations may leave d."""
    budget = budget or Budget(d.node_limit, "ats")
    unknowns = [primed(x) for x in spec.vars]
    found: Dict[Tuple, State] = {}
    for s in _solve(unknowns, spec.next, bind(spec, state), spec, d, budget):
        nxt = tuple(s[primed(x)] for x in spec.vars)
        found.setdefault(_state_key(nxt), nxt)
    return [found[k] for k in sorted(found)]


def trace_key(trace: Trace) -> Tuple:
    return (len(trace), tuple(value_key(v) for v in trace))


def enumerate_traces(spec: ATSSpec, max_len: int, d: Domains,
                     budget: Optional[Budget] = None) -> List[Trace]:
    """All observable traces of length ≤ max_len (ε included), sorted.

    Raises:
        BudgetExceeded: the path search ran past the budget
    """
    budget = budget or Budget(d.node_limit, "ats")
    traces: Dict[Tuple, Trace] = {trace_key(()): ()}
    if max_len <= 0:
        return [()]
    frontier = deque()
    seen: Set[Tuple] = set()
    for state in initial_states(spec, d, budget):
        trace = (state[0],)
        key = (trace_key(trace), _state_key(state))
        if key not in seen:
            seen.add(key)
            frontier.append((trace, state))
    while frontier:
        trace, state = frontier.popleft()
        budget.tick()
        traces.setdefault(trace_key(trace), trace)
        if len(trace) >= max_len:
            continue
        for nxt in successors(state, spec, d, budget):
            extended = trace + (nxt[0],)
            key = (trace_key(extended), _state_key(nxt))
            if key in seen:
                continue
            seen.add(key)
            frontier.append((extended, nxt))
    logger.debug(f"Enumerated {len(traces)} ATS traces up to length {max_len}")
    return [traces[k] for k in sorted(traces)]


def encode_trace(trace: Trace) -> List[Any]:
    return [encode_value(v) for v in trace]


# Ghost permissions ---------------------------------------------------------

def ghost_cells(spec: ATSSpec, perm: Fraction) -> Assertion:
    """acc(x̂1, ρ) ∗ ... ∗ acc(x̂k, ρ)."""
    return sep_all(acc(GhostVar(a.name), perm, f"_g{i}") for i, a in enumerate(spec.ghost_addresses, 1))


def check_assumption1(ghost_inv: Assertion, spec: ATSSpec, d: Domains) -> Verdict:
    """Find the least occurring ρ > 0 with ghost_inv ⊨ ⊛ acc(x̂i, ρ)."""
    d = d.with_ghosts(spec.ghost_names(), spec.ghost_types())
    candidates = sorted(fractions(ghost_inv) | {Fraction(1)})
    first_failure: Optional[Verdict] = None
    inconclusive: Optional[Verdict] = None
    for rho in candidates:
        verdict = check_entailment(ghost_inv, ghost_cells(spec, rho), d)
        if verdict.valid:
            logger.debug(f"Ghost invariant grants permission {rho} to every ATS cell")
            return Verdict.ok(permission=rho)
        if verdict.inconclusive:
            inconclusive = inconclusive or verdict
        elif first_failure is None:
            first_failure = verdict
    if inconclusive is not None:
        return inconclusive
    if first_failure is None:
        raise EvalError("no candidate permission was checked for the ghost invariant")
    first_failure.detail = "ghost invariant does not grant a positive permission to every ATS cell"
    return first_failure
