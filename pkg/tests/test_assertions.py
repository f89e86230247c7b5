"""Tests for bounded assertion evaluation, entailment, validity and precision."""

import itertools
from fractions import Fraction

import pytest

from refine_cli.lang.assertions import EMP, TRUE_A, Sep, Wand
from refine_cli.lang.parser import parse_assertion
from refine_cli.semantics.assertion_eval import (
    check_entailment, check_precise, check_validity, eval_assertion,
)
from refine_cli.semantics.domains import Domains, parse_int_range
from refine_cli.semantics.heap import EMPTY_HEAP, PermHeap, Stack
from refine_cli.semantics.values import Addr

A = parse_assertion


class TestEvaluation:
    def test_points_to_is_exact(self, small_domains):
        s = Stack({"x": Addr(0)})
        one_cell = PermHeap.of((Addr(0), 1, 5))
        two_cells = PermHeap.of((Addr(0), 1, 5), (Addr(1), 1, 0))
        assert eval_assertion(s, one_cell, A("x |-> 5"), small_domains)
        assert not eval_assertion(s, two_cells, A("x |-> 5"), small_domains)
        assert eval_assertion(s, two_cells, A("x |-> 5 ** true"), small_domains)

    def test_fractional_points_to(self, small_domains):
        s = Stack({"x": Addr(0)})
        half = PermHeap.of((Addr(0), Fraction(1, 2), 5))
        assert eval_assertion(s, half, A("x |->[1/2] 5"), small_domains)
        assert not eval_assertion(s, half, A("x |-> 5"), small_domains)

    def test_emp_and_pure(self, small_domains):
        assert eval_assertion(Stack(), EMPTY_HEAP, EMP, small_domains)
        assert eval_assertion(Stack({"n": 2}), PermHeap.of((Addr(0), 1, 0)), A("n > 1"), small_domains)

    def test_existential_over_int_range(self, small_domains):
        s = Stack({"x": Addr(0)})
        assert eval_assertion(s, PermHeap.of((Addr(0), 1, 3)), A("exists v. x |-> v && v > 2"), small_domains)
        assert not eval_assertion(s, PermHeap.of((Addr(0), 1, 2)), A("exists v. x |-> v && v > 2"), small_domains)


class TestEntailment:
    def test_emp_is_a_unit_for_separation(self, tiny_domains):
        p = A("x |-> 1")
        assert check_entailment(Sep(p, EMP), p, tiny_domains).valid
        assert check_entailment(p, Sep(p, EMP), tiny_domains).valid

    def test_separation_commutes(self, tiny_domains):
        assert check_entailment(A("x |-> 1 ** y |-> 2"), A("y |-> 2 ** x |-> 1"), tiny_domains).valid

    def test_halves_combine(self, tiny_domains):
        assert check_entailment(A("x |->[1/2] 1 ** x |->[1/2] 1"), A("x |-> 1"), tiny_domains).valid

    def test_wrong_value_is_a_counterexample(self, tiny_domains):
        verdict = check_entailment(A("x |-> 1"), A("x |-> 2"), tiny_domains)
        assert not verdict.valid and not verdict.inconclusive
        assert verdict.stack is not None and verdict.heap is not None

    def test_wand_modus_ponens(self, tiny_domains):
        p = A("x |-> 1 ** (x |-> 1 -* y |-> 2)")
        assert check_entailment(p, A("y |-> 2"), tiny_domains).valid

    def test_disjunctive_premise(self, tiny_domains):
        assert check_entailment(A("n = 1 || n = 2"), A("n > 0"), tiny_domains).valid
        assert not check_entailment(A("n = 1 || n = 2"), A("n > 1"), tiny_domains).valid

    def test_budget_exhaustion_is_inconclusive(self):
        d = Domains(int_lo=-4, int_hi=8, addr_count=2, max_seq_len=1, node_limit=10)
        verdict = check_entailment(A("exists a, b. x |-> a ** y |-> b"), A("x |-> 1"), d)
        assert verdict.inconclusive


class TestValidity:
    def test_tautology(self, tiny_domains):
        assert check_validity(A("n = n"), tiny_domains).valid

    def test_falsifiable(self, tiny_domains):
        verdict = check_validity(A("n < 2"), tiny_domains)
        assert not verdict.valid
        assert verdict.stack["n"] >= 2

    def test_implication_is_checked_as_entailment(self, tiny_domains):
        assert check_validity(A("x |-> 1 ==> x |-> 1 ** true"), tiny_domains).valid


class TestPrecision:
    def test_points_to_with_unknown_value_is_precise(self, tiny_domains):
        assert check_precise(A("exists v. x |-> v"), tiny_domains).valid

    def test_true_is_not_precise(self, tiny_domains):
        verdict = check_precise(TRUE_A, tiny_domains)
        assert not verdict.valid
        assert "first" in verdict.extra and "second" in verdict.extra

    def test_disjunction_of_nested_heaps_is_not_precise(self, tiny_domains):
        assert not check_precise(A("emp || x |-> 1"), tiny_domains).valid


class TestIntRange:
    @pytest.mark.parametrize("text, expected", [("-2..8", (-2, 8)), ("0..0", (0, 0)), ("-5..-1", (-5, -1))])
    def test_parse(self, text, expected):
        assert parse_int_range(text) == expected

    @pytest.mark.parametrize("text", ["3..1", "1-3", "a..b"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_int_range(text)


# Algebraic laws over a small universe: two addresses, halves and wholes, values 0 and 1.

CELL_VALUES = (0, 1)
ADDRS = (Addr(0), Addr(1))

EXACT = [
    "emp", "x |-> 0", "x |-> 1", "x |->[1/2] v", "y |-> v", "y |->[1/2] 0",
    "x |->[1/2] 1 ** y |->[1/2] 1",
]
ANY = EXACT + ["true", "v = 1", "x |-> _", "y |->[1/2] _", "x |-> v ** true", "acc(y, 1/2)"]


def universe_heaps():
    options = [[None] + [(a, p, v) for p in (Fraction(1, 2), 1) for v in CELL_VALUES] for a in ADDRS]
    for cells in itertools.product(*options):
        yield PermHeap.of(*(c for c in cells if c is not None))


def universe_stacks():
    for x, y, v in itertools.product(ADDRS, ADDRS, CELL_VALUES):
        yield Stack({"x": x, "y": y, "v": v})


def equivalent(a, b, d):
    for s in universe_stacks():
        for h in universe_heaps():
            if eval_assertion(s, h, a, d) != eval_assertion(s, h, b, d):
                return s, h
    return None


class TestSeparationLaws:
    def test_associative_and_commutative(self, rng, tiny_domains):
        for _ in range(12):
            p, q, r = (A(rng.choice(ANY)) for _ in range(3))
            assert equivalent(Sep(Sep(p, q), r), Sep(p, Sep(q, r)), tiny_domains) is None
            assert equivalent(Sep(p, q), Sep(q, p), tiny_domains) is None

    def test_emp_is_a_unit(self, rng, tiny_domains):
        for text in rng.sample(ANY, 6):
            p = A(text)
            assert equivalent(Sep(p, EMP), p, tiny_domains) is None
            assert equivalent(Sep(EMP, p), p, tiny_domains) is None

    def test_empty_iterated_separation_is_emp(self, tiny_domains):
        empty = A("sep[]")
        assert equivalent(empty, EMP, tiny_domains) is None
        assert check_entailment(empty, EMP, tiny_domains).valid
        assert check_entailment(EMP, empty, tiny_domains).valid

    def test_iterated_separation_unfolds(self, tiny_domains):
        assert equivalent(A("sep[x |-> 0, y |-> v]"), A("x |-> 0 ** y |-> v"), tiny_domains) is None

    def test_wand_adjunction(self, rng, tiny_domains):
        for _ in range(15):
            p, q = A(rng.choice(EXACT)), A(rng.choice(EXACT))
            r = A(rng.choice(ANY))
            curried = check_entailment(p, Wand(q, r), tiny_domains)
            uncurried = check_entailment(Sep(p, q), r, tiny_domains)
            assert not curried.inconclusive and not uncurried.inconclusive
            assert curried.valid == uncurried.valid, (p, q, r)


class TestSugar:
    EXPANSIONS = [
        ("x |-> _", "exists w. x |-> w"),
        ("y |->[1/2] _", "exists w. y |->[1/2] w"),
        ("acc(x, 1/2)", "exists w. x |->[1/2] w ** true"),
        ("apt(y, 1, v)", "y |-> v ** true"),
        ("exists w. x |-> w && w >= 0", "x |-> 0 || x |-> 1"),
        ("x |-> 0 ==> v = 1", "!(x |-> 0 && !(v = 1))"),
    ]

    @pytest.mark.parametrize("sugar, core", EXPANSIONS)
    def test_agrees_with_its_expansion(self, sugar, core, tiny_domains):
        assert equivalent(A(sugar), A(core), tiny_domains) is None

    def test_agrees_inside_a_separating_context(self, rng, tiny_domains):
        for sugar, core in rng.sample(self.EXPANSIONS, 4):
            context = A(rng.choice(EXACT))
            assert equivalent(Sep(A(sugar), context), Sep(A(core), context), tiny_domains) is None


class TestCoupledLockInvariant:
    """The turn-taking invariant fixes how far the shared counter has got."""

    INVARIANT = "(t ==> n = lo && le = lo - 1) && (!t ==> n = le && lo = le - 1)"
    RANGE = Domains(int_lo=-2, int_hi=8, addr_count=0, max_heap_cells=0)

    def test_even_turn_implies_the_count(self):
        claim = A(f"{self.INVARIANT} && t && le = 2 * c - 1 ==> n = 2 * c")
        assert check_validity(claim, self.RANGE).valid

    def test_odd_turn_does_not(self):
        claim = A(f"{self.INVARIANT} && !t && le = 2 * c - 1 ==> n = 2 * c")
        verdict = check_validity(claim, self.RANGE)
        assert not verdict.valid and not verdict.inconclusive
