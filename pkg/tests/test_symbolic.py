"""Tests for the symbolic entailment matcher and its pure prover."""

import itertools
from fractions import Fraction

import pytest

from refine_cli.errors import BudgetExceeded
from refine_cli.lang.assertions import Wand
from refine_cli.lang.ast import TRUE, IntLit
from refine_cli.lang.parser import parse_assertion, parse_expression
from refine_cli.semantics.assertion_eval import check_entailment, eval_assertion
from refine_cli.semantics.domains import Budget, Domains
from refine_cli.semantics.heap import PermHeap, Stack
from refine_cli.semantics.symbolic import PureProver, prove_entailment, simplify
from refine_cli.semantics.values import Addr

GHOSTS = ("count", "lastOdd")


def A(text):
    return parse_assertion(text, GHOSTS)


E = parse_expression


def implies(facts, goals, d=None):
    d = d or Domains()
    return PureProver(d, Budget(d.node_limit)).implies([E(f) for f in facts], [E(g) for g in goals])


class TestSimplify:
    def test_decided_implications_fold(self):
        assert simplify(E("true ==> n = 1")) == E("n = 1")
        assert simplify(E("false ==> n = 1")) == TRUE
        assert simplify(E("!true ==> n = 1")) == TRUE

    def test_closed_arithmetic_folds(self):
        assert simplify(E("2 * 3 - 1 = 5")) == TRUE
        assert simplify(E("n = 2 * 3 - 1")) == E("n = 5")
        assert simplify(E("2 * 3")) == IntLit(6)

    def test_reflexive_equations_fold(self):
        assert simplify(E("n + 1 = n + 1")) == TRUE
        assert simplify(E("s[i] = s[i]")) != TRUE


class TestPureProver:
    def test_equations_are_substituted(self):
        assert implies(["t", "n = lo", "le = lo - 1"], ["n = le + 1"])

    def test_guarded_facts_fire_once_the_guard_is_known(self):
        facts = ["t", "(t ==> n = lo && le = lo - 1)", "(!t ==> n = le && lo = le - 1)"]
        assert implies(facts, ["n = lo"])
        assert not implies(facts, ["n = le"])

    def test_remaining_arithmetic_is_searched(self):
        assert implies(["2 * c - 1 = lo - 1"], ["lo = 2 * c"])
        assert not implies(["2 * c - 1 <= lo"], ["lo = 2 * c"])

    def test_contradictory_facts_prove_anything(self):
        assert implies(["t", "!t"], ["n = 7"])

    def test_sequences_are_searched(self):
        assert implies(["o = lo", "2 * c = lo"], ["(2 * c) : s = s ++ [o]"])
        assert not implies(["o = lo + 1", "2 * c = lo"], ["(2 * c) : s = s ++ [o]"])

    def test_exhausted_budget_raises(self):
        d = Domains(node_limit=3)
        prover = PureProver(d, Budget(d.node_limit))
        with pytest.raises(BudgetExceeded):
            prover.implies([E("a < b"), E("b < c")], [E("a < c")])


class TestProveEntailment:
    def test_existentials_are_instantiated_from_cells(self):
        assert prove_entailment(A("x |-> 1 ** y |-> 2"), A("exists a, b. y |-> b ** x |-> a"), Domains())

    def test_existentials_unify_through_arithmetic(self):
        assert prove_entailment(A("exists o. c |->[1/3] o + 1"), A("exists p. c |->[1/3] p + 1"), Domains())

    def test_leftover_cells_need_an_absorbing_goal(self):
        p = A("x |-> 1 ** y |-> 2")
        assert not prove_entailment(p, A("x |-> 1"), Domains())
        assert prove_entailment(p, A("x |-> 1 ** true"), Domains())
        assert prove_entailment(p, A("x |->[1/2] 1 ** true"), Domains())
        assert not prove_entailment(p, A("x |->[1/2] 1 ** y |-> 2"), Domains())

    def test_halves_merge_with_equal_values(self):
        assert prove_entailment(A("x |->[1/2] v ** x |->[1/2] w"), A("x |-> v && v = w"), Domains())

    def test_overflowing_permissions_are_vacuous(self):
        assert prove_entailment(A("x |-> 1 ** x |-> 2"), A("y |-> 3"), Domains())

    def test_cell_view_in_the_hypothesis(self):
        assert prove_entailment(A("(x |->[1/2] o ** true) && (x |-> v)"), A("x |-> o"), Domains())

    def test_cell_view_in_the_goal(self):
        goal = A("exists y. (x |->[1/2] y ** true) && (x |-> 3)")
        assert prove_entailment(A("x |-> 3"), goal, Domains())
        assert not prove_entailment(A("x |->[1/4] 3"), A("(x |->[1/2] 3 ** true) && (x |->[1/4] 3)"), Domains())

    def test_disjunctions(self):
        assert prove_entailment(A("x |-> 1"), A("x |-> 2 || x |-> 1"), Domains())
        assert prove_entailment(A("x |-> 1 || x |-> 2"), A("exists v. x |-> v && v > 0"), Domains())
        assert not prove_entailment(A("x |-> 1 || x |-> 2"), A("x |-> 1"), Domains())

    def test_wrong_values_are_not_proved(self):
        assert not prove_entailment(A("x |-> 1"), A("x |-> 2"), Domains())
        assert not prove_entailment(A("x |-> v"), A("x |-> v + 1"), Domains())

    def test_opaque_parts_must_match(self):
        wand = Wand(A("x |-> 1"), A("y |-> 2"))
        assert prove_entailment(wand, wand, Domains())
        assert not prove_entailment(A("x |-> 1"), wand, Domains())

    def test_exhausted_budget_is_not_a_proof(self):
        assert not prove_entailment(A("exists y. x |-> y"), A("exists z. x |-> z"), Domains(node_limit=1))

    def test_ghost_step_postcondition(self):
        p = A("(count |-> o2 + 1 ** stdOut |-> (2 * c) : o1 ** lastOdd |->[1/2] lo)"
              " && o2 = lo && 2 * c - 1 = lo - 1")
        q = A("(exists ys, yc. (stdOut |->[2/3] ys ** true) && (count |->[2/3] yc ** true)"
              " && ys = o1 ++ [o2] && yc = o2 + 1 && (stdOut |-> _ ** count |->[2/3] _))"
              " ** (exists n. (count |->[1/3] n + 1 ** lastOdd |->[1/2] lo) && n = lo)")
        d = Domains().with_ghosts(("stdOut",) + GHOSTS)
        assert prove_entailment(p, q, d)
        wrong = A("(count |-> o2 + 1 ** stdOut |-> (2 * c + 1) : o1 ** lastOdd |->[1/2] lo)"
                  " && o2 = lo && 2 * c - 1 = lo - 1")
        assert not prove_entailment(wrong, q, d)

    def test_check_entailment_reports_the_symbolic_proof(self):
        verdict = check_entailment(A("exists a. x |-> a ** y |-> 2"), A("exists b. y |-> 2 ** x |-> b"), Domains())
        assert verdict.valid
        assert verdict.detail == "proved symbolically"


POOL = [
    "emp", "x |-> 0", "x |-> v", "x |->[1/2] v ** x |->[1/2] v", "x |->[1/2] 1 ** true",
    "exists a. x |-> a", "exists a. x |-> a ** y |-> a", "x |-> v ** v = 1",
    "(x |->[1/2] v ** true) && (exists a. x |-> a)", "x |-> 0 || x |-> 1", "true", "v = 1",
    "x |-> v && v = 1", "y |->[1/2] 0 ** x |-> 1",
]
SMALL = Domains(int_lo=0, int_hi=1, addr_count=2, max_seq_len=0, max_heap_cells=1)


def universe():
    slots = [None] + [(perm, value) for perm in (Fraction(1, 2), Fraction(1)) for value in (0, 1)]
    heaps = []
    for first, second in itertools.product(slots, repeat=2):
        cells = [(Addr(i), *slot) for i, slot in enumerate((first, second)) if slot is not None]
        heaps.append(PermHeap.of(*cells))
    stacks = [Stack({"x": x, "y": y, "v": v})
              for x in (Addr(0), Addr(1)) for y in (Addr(0), Addr(1)) for v in (0, 1)]
    return stacks, heaps


class TestAgreement:
    @pytest.mark.parametrize("p_text,q_text", list(itertools.product(POOL, POOL)))
    def test_symbolic_proofs_hold_on_every_small_model(self, p_text, q_text):
        p, q = A(p_text), A(q_text)
        if not prove_entailment(p, q, SMALL):
            return
        stacks, heaps = universe()
        for s, h in itertools.product(stacks, heaps):
            if eval_assertion(s, h, p, SMALL):
                assert eval_assertion(s, h, q, SMALL), (s, h)

    def test_the_pool_has_symbolic_proofs_beyond_identity(self):
        proved = [(p, q) for p, q in itertools.product(POOL, POOL)
                  if p != q and prove_entailment(A(p), A(q), SMALL)]
        assert ("x |-> 0", "exists a. x |-> a") in proved
        assert ("x |->[1/2] v ** x |->[1/2] v", "x |-> v") in proved
