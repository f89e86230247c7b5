"""Tests for abstract transition systems: steps, traces and ghost permissions."""

from collections import deque
from dataclasses import replace
from fractions import Fraction

import pytest

from refine_cli.errors import BudgetExceeded
from refine_cli.lang.assertions import EMP
from refine_cli.lang.parser import parse_assertion
from refine_cli.semantics.ats import (
    check_assumption1, encode_trace, enumerate_traces, initial_states, is_initial,
    is_transition, stutter_close, successors, trace_key,
)
from refine_cli.semantics.domains import Budget, Domains, VerdictKind

from conftest import load_ats

COUNTER_DOMAINS = Domains(int_lo=0, int_hi=3, addr_count=1, max_seq_len=3)


def oracle_traces(max_len, stutter):
    """Observable counter traces by direct search over concrete states."""
    found = {()}
    frontier = deque((((),), ((), c)) for c in range(4))
    while frontier:
        trace, (out, count) = frontier.popleft()
        found.add(trace)
        if len(trace) >= max_len:
            continue
        moves = [(out + (count,), count + 1)]
        if stutter:
            moves.append((out, count))
        for nxt in moves:
            frontier.append((trace + (nxt[0],), nxt))
    return found


class TestCounter:
    def test_initial_states(self):
        spec = load_ats(closed=False)
        assert initial_states(spec, COUNTER_DOMAINS) == [((), 0), ((), 1), ((), 2), ((), 3)]

    def test_transition(self):
        spec = load_ats(closed=False)
        assert is_transition(((0,), 1), ((0, 1), 2), spec, COUNTER_DOMAINS)
        assert not is_transition(((0,), 1), ((0,), 1), spec, COUNTER_DOMAINS)
        assert is_transition(((0,), 1), ((0,), 1), stutter_close(spec), COUNTER_DOMAINS)

    def test_successor_may_leave_the_int_range(self):
        spec = load_ats(closed=False)
        assert successors(((), 3), spec, COUNTER_DOMAINS) == [((3,), 4)]

    def test_is_initial(self):
        spec = load_ats(closed=False)
        assert is_initial(((), 0), spec, COUNTER_DOMAINS)
        assert not is_initial(((0,), 0), spec, COUNTER_DOMAINS)
        assert not is_initial(((),), spec, COUNTER_DOMAINS)

    @pytest.mark.parametrize("stutter", [False, True])
    def test_traces_match_direct_search(self, stutter):
        spec = load_ats(closed=stutter)
        traces = enumerate_traces(spec, 3, COUNTER_DOMAINS)
        assert {tuple(t) for t in traces} == oracle_traces(3, stutter)

    def test_traces_are_sorted_and_start_empty(self):
        traces = enumerate_traces(load_ats(), 3, COUNTER_DOMAINS)
        assert traces[0] == ()
        assert traces == sorted(traces, key=trace_key)

    def test_counting_trace_is_listed(self):
        traces = [encode_trace(t) for t in enumerate_traces(load_ats(), 3, COUNTER_DOMAINS)]
        assert [[], [0], [0, 1]] in traces

    def test_zero_length(self):
        assert enumerate_traces(load_ats(), 0, COUNTER_DOMAINS) == [()]

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            enumerate_traces(load_ats(), 6, COUNTER_DOMAINS, Budget(5, "ats"))

    def test_stutter_close_is_idempotent(self):
        closed = load_ats()
        assert stutter_close(closed) is closed


class TestGhostPermission:
    GHOSTS = ["stdOut", "count"]

    def test_least_permission_is_found(self, small_domains):
        inv = parse_assertion("stdOut |-> _ ** count |->[2/3] _", self.GHOSTS)
        verdict = check_assumption1(inv, load_ats(), small_domains)
        assert verdict.valid
        assert verdict.permission == Fraction(2, 3)

    def test_missing_cell_fails(self, small_domains):
        inv = parse_assertion("stdOut |-> _", self.GHOSTS)
        verdict = check_assumption1(inv, load_ats(), small_domains)
        assert not verdict.valid
        assert "positive permission" in verdict.detail

    def test_empty_invariant_is_a_counterexample(self, small_domains):
        verdict = check_assumption1(EMP, load_ats(), small_domains)
        assert verdict.kind == VerdictKind.COUNTEREXAMPLE
        assert "positive permission" in verdict.detail

    def test_exhausted_budget_is_inconclusive(self, small_domains):
        inv = parse_assertion("stdOut |-> _", self.GHOSTS)
        verdict = check_assumption1(inv, load_ats(), replace(small_domains, node_limit=1))
        assert verdict.inconclusive
