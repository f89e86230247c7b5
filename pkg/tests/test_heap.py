"""Tests for permission heaps, heap composition and stacks."""

import random
from fractions import Fraction

import pytest

from refine_cli.errors import HeapInvariantError
from refine_cli.semantics.heap import (
    EMPTY_HEAP, UNDEFINED, Cell, PermHeap, Stack, fresh_address, get_state, heap_add,
    heap_delete, heap_difference, heap_update, normal_completion, parse_perm,
)
from refine_cli.semantics.values import STDOUT, Addr, GhostAddr

from conftest import load_ats

PERMS = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)]
ADDRESSES = [Addr(0), Addr(1), GhostAddr("count")]


def random_heap(rng: random.Random) -> PermHeap:
    cells = {}
    for addr in ADDRESSES:
        if rng.random() < 0.5:
            cells[addr] = Cell(rng.choice(PERMS), rng.choice([0, 1]))
    return PermHeap(cells)


def add(h1, h2):
    if h1 is UNDEFINED or h2 is UNDEFINED:
        return UNDEFINED
    return heap_add(h1, h2)


class TestComposition:
    CASES = 10_000

    def test_commutative(self, rng):
        for _ in range(self.CASES):
            h1, h2 = random_heap(rng), random_heap(rng)
            assert heap_add(h1, h2) == heap_add(h2, h1)

    def test_associative(self, rng):
        for _ in range(self.CASES):
            h1, h2, h3 = random_heap(rng), random_heap(rng), random_heap(rng)
            assert add(add(h1, h2), h3) == add(h1, add(h2, h3))

    def test_empty_is_unit(self, rng):
        for _ in range(1000):
            h = random_heap(rng)
            assert heap_add(h, EMPTY_HEAP) == h

    def test_difference_cancels_addition(self, rng):
        for _ in range(self.CASES):
            h1, h2 = random_heap(rng), random_heap(rng)
            total = heap_add(h1, h2)
            if total is UNDEFINED:
                continue
            assert heap_difference(total, h2) == h1

    def test_permissions_sum(self):
        half = PermHeap.of((Addr(0), Fraction(1, 2), 7))
        assert heap_add(half, half) == PermHeap.of((Addr(0), 1, 7))

    def test_overflowing_permission_is_undefined(self):
        h = PermHeap.of((Addr(0), Fraction(3, 4), 7))
        assert heap_add(h, h) is UNDEFINED

    def test_disagreeing_values_are_undefined(self):
        h1 = PermHeap.of((Addr(0), Fraction(1, 2), 1))
        h2 = PermHeap.of((Addr(0), Fraction(1, 2), 2))
        assert heap_add(h1, h2) is UNDEFINED

    def test_booleans_and_integers_do_not_merge(self):
        h1 = PermHeap.of((Addr(0), Fraction(1, 2), True))
        h2 = PermHeap.of((Addr(0), Fraction(1, 2), 1))
        assert heap_add(h1, h2) is UNDEFINED


class TestHeapOperations:
    def test_update_takes_full_permission(self):
        h = PermHeap.of((Addr(0), Fraction(1, 2), 1))
        updated = heap_update(h, Addr(0), 5)
        assert updated.get(Addr(0)) == Cell(Fraction(1), 5)
        assert h.get(Addr(0)).value == 1

    def test_delete(self):
        h = PermHeap.of((Addr(0), 1, 1), (Addr(1), 1, 2))
        assert heap_delete(h, Addr(0)).addresses() == [Addr(1)]

    def test_normal_completion_tops_up(self):
        h = PermHeap.of((Addr(0), Fraction(1, 3), 4), (Addr(1), 1, 0))
        completed = heap_add(h, normal_completion(h))
        assert completed.is_normal()
        assert completed.value(Addr(0)) == 4

    def test_fresh_address_skips_used(self):
        h = PermHeap.of((Addr(0), 1, 0), (Addr(2), 1, 0))
        assert fresh_address(h) == Addr(1)

    def test_permission_outside_range(self):
        with pytest.raises(HeapInvariantError):
            Cell(Fraction(3, 2), 0)
        with pytest.raises(HeapInvariantError):
            parse_perm("0")

    def test_dict_encoding(self):
        h = PermHeap.of((Addr(0), Fraction(1, 2), (1, 2)), (STDOUT, 1, ()))
        assert PermHeap.from_dict(h.to_dict()) == h
        assert h.to_dict()["@0"] == {"perm": "1/2", "value": [1, 2]}


class TestGetState:
    def test_reads_ghost_cells_in_variable_order(self):
        spec = load_ats()
        h = PermHeap.of((STDOUT, Fraction(1, 3), (0,)), (GhostAddr("count"), 1, 1))
        assert get_state(h, spec) == ((0,), 1)

    def test_missing_cell_is_undefined(self):
        spec = load_ats()
        h = PermHeap.of((STDOUT, 1, ()))
        assert get_state(h, spec) is UNDEFINED


class TestStack:
    def test_unbound_reads_default(self):
        assert Stack()["x"] == 0

    def test_default_bindings_do_not_distinguish(self):
        assert Stack({"x": 0}) == Stack()
        assert Stack({"x": 1}) != Stack()

    def test_assign_is_persistent(self):
        s = Stack({"x": 1})
        t = s.assign("x", 2)
        assert s["x"] == 1 and t["x"] == 2

    def test_restrict(self):
        s = Stack({"x": 1, "y": 2})
        assert s.restrict(["y"]).names() == ["y"]
