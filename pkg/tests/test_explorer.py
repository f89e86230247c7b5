"""Tests for exploration, initial configurations and the audits."""

import pytest

from refine_cli.api.models import Status
from refine_cli.api.workbench import Workbench
from refine_cli.errors import BudgetExceeded
from refine_cli.explorer.audits import AuditStatus, audit_mutual_exclusion, printed_outputs
from refine_cli.explorer.forest import explore, replay
from refine_cli.explorer.initial import initial_configs, small_frames
from refine_cli.lang.assertions import EMP
from refine_cli.lang.ast import Assign, IntLit, Par, Within
from refine_cli.lang.parser import parse_assertion, parse_command, parse_program
from refine_cli.semantics.heap import EMPTY_HEAP, Stack
from refine_cli.semantics.opsem import Config

from conftest import fixture, small_config


def workbench(program, ats=None, **overrides):
    config = small_config(program=fixture(program), ats=fixture(ats) if ats else None, **overrides)
    return Workbench(config)


def load(bench):
    program = bench.load_program()
    ats = bench.load_ats() if bench.config.ats else None
    return program, ats


class TestInitialConfigs:
    def test_one_configuration_per_model(self, small_domains):
        p = parse_assertion("x |-> v && 0 <= v")
        inits = initial_configs(parse_command("skip"), p, (), small_domains)
        assert len(inits) == small_domains.addr_count * 4
        assert all(cfg.heap.is_normal() for cfg in inits)

    def test_lock_invariants_are_added(self, small_domains):
        env = [("L", parse_assertion("y |-> 1"))]
        inits = initial_configs(parse_command("skip"), EMP, env, small_domains)
        assert all(len(cfg.heap) == 1 for cfg in inits)

    def test_unsatisfiable_precondition_warns(self, small_domains):
        inits = initial_configs(parse_command("skip"), parse_assertion("1 = 2"), (), small_domains)
        assert len(inits) == 0
        assert inits.warnings

    def test_frames_extend_the_heap(self, small_domains):
        frames = small_frames(small_domains)
        inits = initial_configs(parse_command("skip"), EMP, (), small_domains, frames)
        assert len(inits) == len(frames)


class TestExplore:
    def racy_inits(self):
        bench = workbench("racy_counter.rimp")
        program, _ = load(bench)
        d = bench.domains(program)
        return bench.initial(program, d).configs

    def test_race_is_reached_and_replays(self):
        forest = explore(self.racy_inits(), 12)
        aborts = forest.aborts()
        assert aborts
        races = [e for e in forest.edges if e.label.rule == "Race"]
        assert races
        assert replay(forest, races[0].dst)

    def test_depth_bound_truncates(self):
        forest = explore(self.racy_inits(), 0)
        assert forest.stats.states == 1
        assert forest.stats.truncated == 1

    def test_state_cap(self):
        with pytest.raises(BudgetExceeded):
            explore(self.racy_inits(), 12, state_cap=3)

    def test_worker_count_does_not_change_the_forest(self):
        one = explore(self.racy_inits(), 12, workers=1)
        eight = explore(self.racy_inits(), 12, workers=8)
        assert [str(e.label) for e in one.edges] == [str(e.label) for e in eight.edges]
        assert one.stats.to_dict() == eight.stats.to_dict()

    def test_path_to_starts_at_a_root(self):
        forest = explore(self.racy_inits(), 12)
        last = forest.nodes[-1]
        path = forest.path_to(last.id)
        assert path[0].id in forest.roots
        assert path[-1] is last
        assert [n.depth for n in path] == list(range(len(path)))


class TestRefinement:
    def test_echo_loop_refines_the_counter(self):
        bench = workbench("echo_loop.rimp", "counter.rats")
        report = bench.check_refinement(*load(bench))
        assert report.status == Status.PASS
        assert report.refsucc.data["edges_checked"] > 0
        assert report.theorem_consistent

    def test_wrong_print_fails_next(self):
        bench = workbench("wrong_print.rimp", "counter.rats", int_lo=-2, int_hi=4, max_steps=30)
        report = bench.check_refinement(*load(bench))
        assert report.status == Status.FAIL
        assert report.refsucc.obligation == "Next"
        assert "Next" in report.counterexample[-1]["label"]

    @pytest.mark.slow
    def test_alternating_refines_the_counter(self):
        bench = workbench("alternating.rimp", "counter.rats", int_lo=-2, int_hi=8, max_steps=40)
        report = bench.check_refinement(*load(bench))
        assert report.status == Status.PASS

    def test_state_cap_is_inconclusive(self):
        bench = workbench("echo_loop.rimp", "counter.rats", state_cap=5)
        report = bench.check_refinement(*load(bench))
        assert report.status == Status.INCONCLUSIVE


class TestAudits:
    def audit(self, program, name, ats=None, **overrides):
        bench = workbench(program, ats, audits=(name,), **overrides)
        report = bench.explore_report(*load(bench))
        [result] = report.audits
        return result

    def test_race_fails_safety(self):
        result = self.audit("racy_counter.rimp", "safety")
        assert result.status == AuditStatus.FAIL
        assert result.obligation == "NoAbort"
        assert "Race" in result.detail

    def test_broken_lock_invariant(self):
        result = self.audit("lock_break.rimp", "lock_invariants")
        assert result.status == AuditStatus.FAIL
        assert result.obligation == "Invariant(M)"

    def test_print_before_init(self):
        result = self.audit("print_before_init.rimp", "print_before_init")
        assert result.status == AuditStatus.FAIL
        assert result.obligation == "PrintBeforeInit"
        assert result.counterexample

    def test_refsucc_without_ats_is_skipped(self):
        result = self.audit("echo_loop.rimp", "refsucc")
        assert result.status == AuditStatus.SKIPPED

    def test_echo_loop_passes_every_audit(self):
        bench = workbench("echo_loop.rimp", "counter.rats")
        report = bench.explore_report(*load(bench))
        assert report.status == Status.PASS
        assert {a.name for a in report.audits} == {
            "refsucc", "trace_inclusion", "safety", "lock_invariants", "erasure",
            "print_before_init", "mutual_exclusion",
        }

    def test_printed_outputs_are_per_schedule_prefixes(self):
        bench = workbench("echo_loop.rimp", "counter.rats")
        program, _ = load(bench)
        forest, _ = bench.explore(program, bench.domains(program))
        outputs = set(printed_outputs(forest).values())
        assert () in outputs
        assert (0, 1) in outputs
        assert all(seq[:-1] in outputs for seq in outputs if seq)
        assert all(seq == tuple(range(len(seq))) for seq in outputs)

    def test_lock_held_twice(self):
        both = Par(Within("L", Assign("x", IntLit(1))), Within("L", Assign("y", IntLit(1))))
        forest = explore([Config(both, Stack(), EMPTY_HEAP)], 1)
        result = audit_mutual_exclusion(forest)
        assert result.status == AuditStatus.FAIL
        assert result.obligation == "MutualExclusion"

    def test_report_is_independent_of_workers(self):
        reports = []
        for workers in (1, 8):
            bench = workbench("racy_counter.rimp", workers=workers)
            reports.append(bench.explore_report(*load(bench)).to_dict())
        assert reports[0] == reports[1]


class TestCaseStudies:
    SAFETY = ("safety", "lock_invariants", "mutual_exclusion", "erasure", "print_before_init")

    def test_barrier_orders_the_two_phases(self):
        bench = workbench("barrier.rimp", audits=self.SAFETY, max_steps=60)
        report = bench.explore_report(*load(bench))
        assert report.status == Status.PASS
        safety = next(a for a in report.audits if a.name == "safety")
        assert safety.data["terminals"] > 0
        assert safety.data["postcondition"] == "pass"

    def test_skipping_the_barrier_races(self):
        program = parse_program("new(x, 0); new(y, 0); par { [x] := 1; v1 := [y] } { [y] := 1; v2 := [x] }")
        bench = workbench("barrier.rimp", audits=("safety",))
        report = bench.explore_report(program)
        [result] = report.audits
        assert result.status == AuditStatus.FAIL
        assert result.obligation == "NoAbort"

    def test_echo_server_echoes_standard_input(self):
        bench = workbench("echo_server.rimp", "counter.rats", max_steps=60)
        report = bench.explore_report(*load(bench))
        assert report.status == Status.PASS
        safety = next(a for a in report.audits if a.name == "safety")
        assert safety.data["postcondition"] == "pass"
        refinement = bench.check_refinement(*load(bench))
        assert refinement.status == Status.PASS
        assert refinement.theorem_consistent

    def test_echo_server_output_is_its_input(self):
        bench = workbench("echo_server.rimp", "counter.rats", max_steps=60)
        program, _ = load(bench)
        forest, _ = bench.explore(program, bench.domains(program))
        assert max(printed_outputs(forest).values(), key=len) == (0, 1, 2)

    @pytest.mark.slow
    def test_cons_producer_refines_the_counter(self):
        bench = workbench("cons_producer.rimp", "counter.rats", max_steps=60)
        report = bench.explore_report(*load(bench))
        assert report.status == Status.PASS
        refinement = bench.check_refinement(*load(bench))
        assert refinement.status == Status.PASS
        assert refinement.refsucc.data["edges_checked"] > 0

    def test_consumer_never_overtakes_the_producer(self):
        bench = workbench("cons_producer.rimp", "counter.rats", audits=("lock_invariants",), max_steps=30)
        [result] = bench.explore_report(*load(bench)).audits
        assert result.status == AuditStatus.PASS
        assert result.data["releases_checked"] > 0
