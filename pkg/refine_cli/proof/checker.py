"""Derivation checking against the proof rules.

Checking runs in two passes over the tree. The first pass compares every
node with the shape of its rule and checks the syntactic side conditions;
the second discharges entailments, precision and the ghost-permission
requirement with the bounded assertion semantics. A rejection therefore
names the cheapest obligation that fails.
"""

import functools
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Set, Tuple

from ..lang.assertions import (
    EMP, And, Assertion, Emp, Exists, PointsTo, Pure, Sep, all_names, alpha_equal, free_vars,
    fresh_names, or_, substitute,
)
from ..lang.ast import (
    GHOST_LOCK, INIT_TOKEN, Alloc, Assign, Binary, Free, GhostAssign, GhostVar, InitBlock,
    Ite, LockDecl, NextBlock, Par, Print, Read, Seq, Skip, Var, While, With, Write, expr_ghosts,
    expr_vars, subst_ghost_values,
)
from ..lang.derivation_io import DerivationNode
from ..semantics.assertion_eval import check_entailment, check_precise
from ..semantics.ats import ATSSpec, check_assumption1, ghost_cells
from ..semantics.domains import Domains, Verdict
from ..semantics.opsem import is_atomic
from .rules import (
    PREMISES, LockEnv, Rule, empty_token_env, fv_command, fv_env, fv_triple, init_pre, mod_set,
    negated, next_post, next_pre, reserved, write_pre,
)

logger = logging.getLogger(__name__)

ONE = Fraction(1)


class Reason(str, Enum):
    """Stable rejection codes."""
    RULE_SHAPE_MISMATCH = "RuleShapeMismatch"
    SIDE_CONDITION_VIOLATION = "SideConditionViolation"
    ENTAILMENT_FAILED = "EntailmentFailed"
    ENTAILMENT_INCONCLUSIVE = "EntailmentInconclusive"
    ATOMICITY_VIOLATION = "AtomicityViolation"
    PRECISION_VIOLATION = "PrecisionViolation"
    GHOST_LOCK_MISUSE = "GhostLockMisuse"


@dataclass
class CheckResult:
    """Outcome of checking one derivation.

    Attributes:
        accepted: Whether every node was validated
        reason: Rejection code
        path: Dotted child-index path of the rejected node ("0" is the root)
        rule: Rule label of the rejected node
        obligation: The failing obligation
        detail: Human-readable explanation
        counterexample: Stack/heap witness of a failed entailment or precision check
        nodes: Number of nodes in the derivation
        entailments: Entailment checks discharged
        permission: Ghost permission ρ used for Init/Next shapes
    """
    accepted: bool
    reason: Optional[Reason] = None
    path: str = ""
    rule: str = ""
    obligation: str = ""
    detail: str = ""
    counterexample: Dict[str, Any] = field(default_factory=dict)
    nodes: int = 0
    entailments: int = 0
    permission: Optional[Fraction] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "accepted": self.accepted,
            "nodes": self.nodes,
            "entailments": self.entailments,
        }
        if self.permission is not None:
            data["permission"] = f"{self.permission.numerator}/{self.permission.denominator}"
        if not self.accepted:
            data.update({
                "reason": self.reason.value if self.reason else None,
                "path": self.path,
                "rule": self.rule,
                "obligation": self.obligation,
                "detail": self.detail,
            })
            if self.counterexample:
                data["counterexample"] = self.counterexample
        return data


class Rejection(Exception):
    """Raised by a rule check; the walker adds the node's path."""

    def __init__(self, reason: Reason, obligation: str, detail: str = "",
                 counterexample: Optional[Dict[str, Any]] = None):
        super().__init__(detail or obligation)
        self.reason = reason
        self.obligation = obligation
        self.detail = detail
        self.counterexample = counterexample or {}


@functools.lru_cache(maxsize=1)
def _note_par_premise() -> None:
    logger.warning("Par: the right premise is checked as {P2} C2 {Q2}, not {P1} C2 {Q2}")


def _shape(ok: bool, obligation: str, detail: str = "") -> None:
    if not ok:
        raise Rejection(Reason.RULE_SHAPE_MISMATCH, obligation, detail or obligation)


def _side(ok: bool, obligation: str, detail: str = "") -> None:
    if not ok:
        raise Rejection(Reason.SIDE_CONDITION_VIOLATION, obligation, detail or obligation)


def _names(names: Set[str]) -> str:
    return ", ".join(sorted(names))


class DerivationChecker:
    """Validates derivation trees for one ATS and one set of bounded domains.

    Attributes:
        ats: Abstract model the Init/Next rules refer to (None for plain CSL proofs)
        domains: Bounds for entailment, precision and permission checks
    """

    def __init__(self, domains: Domains, ats: Optional[ATSSpec] = None):
        self.ats = ats
        self.domains = domains.with_ghosts(ats.ghost_names(), ats.ghost_types()) if ats else domains
        self.entailments = 0
        self.permission: Optional[Fraction] = None
        self._entailment_cache: Dict[Tuple[Assertion, Assertion], Verdict] = {}
        self._rho_cache: Dict[Assertion, Verdict] = {}

    # Driver ----------------------------------------------------------------

    def check(self, root: DerivationNode) -> CheckResult:
        nodes = list(root.walk())
        for check in (self._structure, self._semantics):
            for path, node in nodes:
                try:
                    check(node)
                except Rejection as r:
                    logger.info(f"Rejected node {path} ({node.rule}): {r.reason.value} {r.obligation}")
                    return CheckResult(
                        accepted=False, reason=r.reason, path=path, rule=node.rule,
                        obligation=r.obligation, detail=r.detail, counterexample=r.counterexample,
                        nodes=len(nodes), entailments=self.entailments, permission=self.permission,
                    )
        logger.info(f"Accepted derivation of {len(nodes)} nodes ({self.entailments} entailments)")
        return CheckResult(True, nodes=len(nodes), entailments=self.entailments, permission=self.permission)

    # Pass 1: shapes and side conditions ------------------------------------

    def _structure(self, node: DerivationNode) -> None:
        try:
            rule = Rule(node.rule)
        except ValueError:
            raise Rejection(Reason.RULE_SHAPE_MISMATCH, "KnownRule", f"unknown rule '{node.rule}'")
        expected = PREMISES[rule]
        _shape(len(node.children) == expected, "PremiseCount",
               f"{rule.value} takes {expected} premise(s), node has {len(node.children)}")
        getattr(self, f"_rule_{rule.name.lower()}")(node, LockEnv.of(node.env))

    def _same_env(self, node: DerivationNode, env: LockEnv, children: List[DerivationNode]) -> None:
        for child in children:
            _shape(LockEnv.of(child.env).same_as(env), "PremiseEnvironment",
                   "premise has a different lock environment")

    def _same_command(self, node: DerivationNode) -> None:
        for child in node.children:
            _shape(child.command == node.command, "PremiseCommand", "premise is about a different command")

    def _command(self, node: DerivationNode, kind) -> Any:
        _shape(isinstance(node.command, kind), "Command",
               f"rule {node.rule} does not apply to {type(node.command).__name__}")
        return node.command

    # Axioms

    def _rule_skip(self, node: DerivationNode, env: LockEnv) -> None:
        self._command(node, Skip)
        _shape(alpha_equal(node.pre, node.post), "Postcondition", "skip must keep its precondition")

    def _rule_assign(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Assign)
        clash = {c.var} & fv_env(env)
        _side(not clash, "x ∉ FV(Γ)", f"'{c.var}' is free in a lock invariant")
        _shape(alpha_equal(node.pre, substitute(node.post, c.var, c.expr)), "Precondition",
               "precondition must be the postcondition with the expression substituted")

    def _rule_write(self, node: DerivationNode, env: LockEnv) -> None:
        if isinstance(node.command, GhostAssign):
            self._ghost_write(node, node.command)
            return
        c = self._command(node, Write)
        _shape(alpha_equal(node.pre, write_pre(c.addr)), "Precondition", "precondition must be E ↦1 _")
        _shape(alpha_equal(node.post, PointsTo(c.addr, ONE, c.value)), "Postcondition",
               "postcondition must be E ↦1 E'")

    def _ghost_write(self, node: DerivationNode, c: GhostAssign) -> None:
        target = GhostVar(c.name)
        pre = node.pre
        _shape(isinstance(pre, PointsTo) and pre.addr == target and pre.perm == ONE, "Precondition",
               f"precondition must be {c.name} ↦1 E0")
        old = pre.value
        if "old" in node.witnesses:
            _shape(node.witnesses["old"] == old, "Witness", "recorded old value differs from the precondition")
        others = expr_ghosts(c.expr) - {c.name}
        _side(not others, "GhostSelfRead", f"ghost assignment reads other ghost cells: {_names(others)}")
        expected = PointsTo(target, ONE, subst_ghost_values(c.expr, {c.name: old}))
        _shape(alpha_equal(node.post, expected), "Postcondition", f"postcondition must be {c.name} ↦1 E[E0]")

    def _rule_read(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Read)
        pre = node.pre
        _shape(isinstance(pre, PointsTo) and pre.addr == c.addr, "Precondition", "precondition must be E ↦ρ E'")
        clash = {c.var} & (expr_vars(c.addr) | expr_vars(pre.value) | fv_env(env))
        _side(not clash, "x ∉ FV(E, E', Γ)", f"'{c.var}' is free in the address, the value or Γ")
        expected = And(pre, Pure(Binary("=", Var(c.var), pre.value)))
        _shape(alpha_equal(node.post, expected), "Postcondition", "postcondition must be E ↦ρ E' ∧ x = E'")

    def _rule_alloc(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Alloc)
        clash = {c.var} & (fv_env(env) | expr_vars(c.expr))
        _side(not clash, "x ∉ FV(Γ, E)", f"'{c.var}' is free in the initial value or Γ")
        _shape(isinstance(node.pre, Emp), "Precondition", "precondition must be emp")
        _shape(alpha_equal(node.post, PointsTo(Var(c.var), ONE, c.expr)), "Postcondition",
               "postcondition must be x ↦1 E")

    def _rule_free(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Free)
        _side(not expr_ghosts(c.addr), "E ∉ GhostAddrs", "ghost cells cannot be freed")
        _shape(alpha_equal(node.pre, write_pre(c.addr)), "Precondition", "precondition must be E ↦1 _")
        _shape(isinstance(node.post, Emp), "Postcondition", "postcondition must be emp")

    def _rule_print(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Print)
        if not empty_token_env(env):
            raise Rejection(Reason.GHOST_LOCK_MISUSE, "Γ(𝓘) = emp", "print outside an initialized region")
        pre = node.pre
        stdout = GhostVar("stdOut")
        _shape(isinstance(pre, PointsTo) and pre.addr == stdout and pre.perm == ONE, "Precondition",
               "precondition must be stdOut ↦1 E'")
        expected = PointsTo(stdout, ONE, Binary(":", c.expr, pre.value))
        _shape(alpha_equal(node.post, expected), "Postcondition", "postcondition must be stdOut ↦1 (E : E')")

    # Compound commands

    def _rule_seq(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Seq)
        first, second = node.children
        self._same_env(node, env, node.children)
        _shape(first.command == c.first and second.command == c.second, "PremiseCommand",
               "premises must cover the two halves of the sequence")
        _shape(alpha_equal(first.pre, node.pre), "Precondition", "first premise must start from P")
        _shape(alpha_equal(first.post, second.pre), "Midcondition", "premises must meet in the same R")
        _shape(alpha_equal(second.post, node.post), "Postcondition", "second premise must end in Q")

    def _rule_cond(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Ite)
        then, other = node.children
        self._same_env(node, env, node.children)
        _shape(then.command == c.then and other.command == c.else_, "PremiseCommand",
               "premises must cover the two branches")
        _shape(alpha_equal(then.pre, And(node.pre, Pure(c.cond))), "Precondition", "then-branch must start from P ∧ E")
        _shape(any(alpha_equal(other.pre, a) for a in negated(node.pre, c.cond)), "Precondition",
               "else-branch must start from P ∧ ¬E")
        _shape(alpha_equal(then.post, node.post) and alpha_equal(other.post, node.post), "Postcondition",
               "both branches must end in Q")

    def _rule_while(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, While)
        body = node.children[0]
        self._same_env(node, env, node.children)
        _shape(body.command == c.body, "PremiseCommand", "premise must be about the loop body")
        inv = node.pre
        _shape(alpha_equal(body.pre, And(inv, Pure(c.cond))), "Precondition", "body must start from I ∧ E")
        _shape(alpha_equal(body.post, inv), "Postcondition", "body must re-establish I")
        _shape(any(alpha_equal(node.post, a) for a in negated(inv, c.cond)), "Postcondition",
               "loop must end in I ∧ ¬E")

    def _rule_par(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, Par)
        left, right = node.children
        _note_par_premise()
        self._same_env(node, env, node.children)
        _shape(left.command == c.left and right.command == c.right, "PremiseCommand",
               "premises must cover the two branches")
        _shape(alpha_equal(node.pre, Sep(left.pre, right.pre)), "Precondition", "precondition must be P1 ∗ P2")
        _shape(alpha_equal(node.post, Sep(left.post, right.post)), "Postcondition", "postcondition must be Q1 ∗ Q2")
        clash = fv_triple(left.pre, c.left, left.post) & mod_set(c.right)
        _side(not clash, "FV(P1, C1, Q1) ∩ Mod(C2) = ∅", f"right branch modifies {_names(clash)}")
        clash = fv_triple(right.pre, c.right, right.post) & mod_set(c.left)
        _side(not clash, "FV(P2, C2, Q2) ∩ Mod(C1) = ∅", f"left branch modifies {_names(clash)}")

    def _rule_lock(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, LockDecl)
        if reserved(c.lock):
            raise Rejection(Reason.GHOST_LOCK_MISUSE, "UserLock", f"Lock cannot declare {c.lock}")
        body = node.children[0]
        child_env = LockEnv.of(body.env)
        _shape(len(child_env) == len(env) + 1 and child_env.bindings[-1][0] == c.lock, "PremiseEnvironment",
               f"premise must extend Γ with {c.lock}")
        inv = child_env.bindings[-1][1]
        _shape(child_env.same_as(env.extend(c.lock, inv)), "PremiseEnvironment", f"premise must extend Γ with {c.lock}")
        _shape(body.command == c.body, "PremiseCommand", "premise must be about the lock body")
        _shape(alpha_equal(node.pre, Sep(inv, body.pre)), "Precondition", "precondition must be R ∗ P")
        _shape(alpha_equal(node.post, Sep(inv, body.post)), "Postcondition", "postcondition must be R ∗ Q")

    def _rule_with(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, With)
        if reserved(c.lock):
            raise Rejection(Reason.GHOST_LOCK_MISUSE, "UserLock", f"With cannot acquire {c.lock}")
        body = node.children[0]
        inv = env.lookup(c.lock)
        _shape(LockEnv.of(body.env).same_as(env.without(c.lock)), "PremiseEnvironment",
               f"premise must drop {c.lock} from Γ")
        _shape(body.command == c.body, "PremiseCommand", "premise must be about the region body")
        _shape(alpha_equal(body.pre, And(Sep(node.pre, inv), Pure(c.cond))), "Precondition",
               "region must start from (P ∗ R) ∧ E")
        _shape(alpha_equal(body.post, Sep(node.post, inv)), "Postcondition", "region must end in Q ∗ R")

    # Structural rules

    def _rule_frame(self, node: DerivationNode, env: LockEnv) -> None:
        child = node.children[0]
        self._same_env(node, env, node.children)
        self._same_command(node)
        frame = node.witnesses.get("frame")
        if frame is None:
            _shape(isinstance(node.pre, Sep), "Precondition", "precondition must be P ∗ R")
            frame = node.pre.right
        _shape(alpha_equal(node.pre, Sep(child.pre, frame)), "Precondition", "precondition must be P ∗ R")
        _shape(alpha_equal(node.post, Sep(child.post, frame)), "Postcondition", "postcondition must be Q ∗ R")
        clash = free_vars(frame) & mod_set(node.command)
        _side(not clash, "FV(R) ∩ Mod(C) = ∅", f"command modifies {_names(clash)}, free in the frame")

    def _rule_cons(self, node: DerivationNode, env: LockEnv) -> None:
        self._same_env(node, env, node.children)
        self._same_command(node)

    def _rule_ex(self, node: DerivationNode, env: LockEnv) -> None:
        child = node.children[0]
        self._same_env(node, env, node.children)
        self._same_command(node)
        var = node.witnesses.get("var")
        if var is None:
            _shape(isinstance(node.pre, Exists), "Precondition", "precondition must be ∃x. P")
            var = node.pre.var
        typ = node.pre.typ if isinstance(node.pre, Exists) else None
        _shape(alpha_equal(node.pre, Exists(var, child.pre, typ)), "Precondition", "precondition must be ∃x. P")
        plain = var not in free_vars(child.post) and alpha_equal(node.post, child.post)
        _shape(plain or alpha_equal(node.post, Exists(var, child.post, typ)), "Postcondition",
               "postcondition must be Q (x not free) or ∃x. Q")
        _side(var not in fv_command(node.command), "x ∉ FV(C)", f"'{var}' is used by the command")

    def _rule_conj(self, node: DerivationNode, env: LockEnv) -> None:
        left, right = node.children
        self._same_env(node, env, node.children)
        self._same_command(node)
        _shape(alpha_equal(node.pre, And(left.pre, right.pre)), "Precondition", "precondition must be P1 ∧ P2")
        _shape(alpha_equal(node.post, And(left.post, right.post)), "Postcondition", "postcondition must be Q1 ∧ Q2")

    def _rule_disj(self, node: DerivationNode, env: LockEnv) -> None:
        left, right = node.children
        self._same_env(node, env, node.children)
        self._same_command(node)
        _shape(alpha_equal(node.pre, or_(left.pre, right.pre)), "Precondition", "precondition must be P1 ∨ P2")
        _shape(alpha_equal(node.post, or_(left.post, right.post)), "Postcondition", "postcondition must be Q1 ∨ Q2")

    # Refinement rules

    def _require_ats(self) -> ATSSpec:
        if self.ats is None:
            raise Rejection(Reason.SIDE_CONDITION_VIOLATION, "ATS", "Init and Next need an abstract model")
        return self.ats

    def _rho(self, node: DerivationNode, ghost_inv: Assertion) -> Fraction:
        rho = node.witnesses.get("rho")
        if rho is None:
            verdict = self._assumption(ghost_inv)
            if not verdict.valid:
                reason = Reason.ENTAILMENT_INCONCLUSIVE if verdict.inconclusive else Reason.SIDE_CONDITION_VIOLATION
                raise Rejection(reason, "GhostPermission", verdict.detail,
                                verdict.to_dict() if not verdict.inconclusive else None)
            rho = verdict.permission
        _side(0 < rho <= 1, "0 < ρ ≤ 1", f"ghost permission {rho} is out of range")
        self.permission = self.permission or rho
        return rho

    def _assumption(self, ghost_inv: Assertion) -> Verdict:
        if ghost_inv not in self._rho_cache:
            self._rho_cache[ghost_inv] = check_assumption1(ghost_inv, self._require_ats(), self.domains)
        return self._rho_cache[ghost_inv]

    def _bound_names(self, count: int, base: str, *parts: Assertion, extra: Set[str] = frozenset()) -> List[str]:
        avoid: Set[str] = set(extra) | set(self.domains.ghosts)
        for a in parts:
            avoid |= all_names(a)
        return fresh_names(count, base, avoid)

    def _rule_init(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, InitBlock)
        spec = self._require_ats()
        if env.binds(GHOST_LOCK) or env.binds(INIT_TOKEN):
            raise Rejection(Reason.GHOST_LOCK_MISUSE, "SingleInit", "ghost locks are already declared")
        body = node.children[0]
        child_env = LockEnv.of(body.env)
        _shape(len(child_env) == len(env) + 2 and child_env.locks()[-2:] == [GHOST_LOCK, INIT_TOKEN],
               "PremiseEnvironment", "premise must extend Γ with 𝒢 : G and 𝓘 : emp")
        ghost_inv = child_env.bindings[-2][1]
        _shape(child_env.same_as(env.extend(GHOST_LOCK, ghost_inv).extend(INIT_TOKEN, EMP)),
               "PremiseEnvironment", "premise must extend Γ with 𝒢 : G and 𝓘 : emp")
        _shape(body.command == c.body, "PremiseCommand", "premise must be about the init body")
        rho = self._rho(node, ghost_inv)
        ys = self._bound_names(spec.k, "y", ghost_inv, body.pre)
        _shape(alpha_equal(node.pre, init_pre(spec, ys, rho, ghost_inv, body.pre)), "Precondition",
               "precondition must be (∃ys. x̂ ↦ρ ys ∧ Init(ys) ∧ G) ∗ P")
        _shape(alpha_equal(node.post, Sep(ghost_inv, body.post)), "Postcondition", "postcondition must be G ∗ Q")

    def _rule_next(self, node: DerivationNode, env: LockEnv) -> None:
        c = self._command(node, NextBlock)
        spec = self._require_ats()
        if not env.binds(GHOST_LOCK):
            raise Rejection(Reason.GHOST_LOCK_MISUSE, "Γ(𝒢)", "next outside an initialized region")
        if not is_atomic(c.body):
            raise Rejection(Reason.ATOMICITY_VIOLATION, "isAtomic(C)", "next body is not atomic")
        body = node.children[0]
        ghost_inv = env.lookup(GHOST_LOCK)
        _shape(LockEnv.of(body.env).same_as(env.without(GHOST_LOCK)), "PremiseEnvironment",
               "premise must drop 𝒢 from Γ")
        _shape(body.command == c.body, "PremiseCommand", "premise must be about the next body")
        olds = node.witnesses.get("fresh")
        _shape(olds is not None and len(olds) == spec.k, "Witness", f"next needs {spec.k} fresh names")
        used = free_vars(node.pre) | free_vars(node.post) | fv_command(c) | fv_env(env)
        clash = set(olds) & used
        _side(not clash and len(set(olds)) == len(olds), "FreshNames", f"names are not fresh: {_names(clash)}")
        rho = self._rho(node, ghost_inv)
        _shape(alpha_equal(body.pre, next_pre(spec, olds, rho, ghost_inv, node.pre)), "Precondition",
               "premise must start from (x̂ ↦ρ os ∧ G) ∗ P")
        ys = self._bound_names(spec.k, "y", ghost_inv, node.post, body.post, extra=set(olds))
        _shape(alpha_equal(body.post, next_post(spec, olds, ys, rho, ghost_inv, node.post)), "Postcondition",
               "premise must end in (∃ys. x̂ ↦ρ ys ∧ Next(os, ys) ∧ G) ∗ Q")

    # Pass 2: semantic obligations ------------------------------------------

    def _semantics(self, node: DerivationNode) -> None:
        rule = Rule(node.rule)
        if rule is Rule.CONS:
            child = node.children[0]
            self._entails(node.pre, child.pre, "P' ⇒ P")
            self._entails(child.post, node.post, "Q ⇒ Q'")
        elif rule is Rule.CONJ:
            for lock, inv in node.env:
                verdict = check_precise(inv, self.domains)
                if verdict.inconclusive:
                    raise Rejection(Reason.ENTAILMENT_INCONCLUSIVE, f"precise(Γ({lock}))", verdict.detail)
                if not verdict.valid:
                    raise Rejection(Reason.PRECISION_VIOLATION, f"precise(Γ({lock}))",
                                    f"invariant of {lock} is not precise", verdict.to_dict())
        elif rule in (Rule.INIT, Rule.NEXT) and "rho" in node.witnesses:
            ghost_inv = (LockEnv.of(node.children[0].env).lookup(GHOST_LOCK) if rule is Rule.INIT
                         else LockEnv.of(node.env).lookup(GHOST_LOCK))
            self._entails(ghost_inv, ghost_cells(self._require_ats(), node.witnesses["rho"]), "GhostPermission")

    def _entails(self, p: Assertion, q: Assertion, obligation: str) -> None:
        key = (p, q)
        if key not in self._entailment_cache:
            self.entailments += 1
            self._entailment_cache[key] = check_entailment(p, q, self.domains)
        verdict = self._entailment_cache[key]
        if verdict.inconclusive:
            raise Rejection(Reason.ENTAILMENT_INCONCLUSIVE, obligation, verdict.detail)
        if not verdict.valid:
            raise Rejection(Reason.ENTAILMENT_FAILED, obligation, verdict.detail, verdict.to_dict())


def check_derivation(root: DerivationNode, d: Domains, ats: Optional[ATSSpec] = None) -> CheckResult:
    """Validate every node of a derivation against its rule."""
    return DerivationChecker(d, ats).check(root)
