"""Tests for the small-step semantics and ghost erasure."""

from refine_cli.lang.ast import (
    SKIP, TRUE, Assign, GhostAssign, InitBlock, IntLit, LockDecl, NextBlock, Par, Print, With,
    Within, walk_command,
)
from refine_cli.lang.parser import parse_command
from refine_cli.semantics.heap import EMPTY_HEAP, PermHeap, Stack
from refine_cli.semantics.opsem import (
    ABORT, Config, StepLabel, StepOptions, erase_ghost, is_atomic, mod_vars, reads, step, writes,
)
from refine_cli.semantics.values import STDOUT, Addr, GhostAddr

from conftest import load_program

GHOSTS = ["count"]


def successors(text, stack=None, heap=EMPTY_HEAP, options=None, ghosts=()):
    cfg = Config(parse_command(text, ghosts), stack or Stack(), heap)
    return step(cfg, options) if options else step(cfg)


class TestBaseCommands:
    def test_assign(self):
        [(label, cfg)] = successors("x := 2 + 3")
        assert str(label) == "Assign"
        assert cfg.command == SKIP and cfg.stack["x"] == 5

    def test_alloc_takes_least_free_address(self):
        [(label, cfg)] = successors("new(x, 7)", heap=PermHeap.of((Addr(1), 1, 0)))
        assert cfg.stack["x"] == Addr(0)
        assert cfg.heap.value(Addr(0)) == 7
        assert label.detail == "@0"

    def test_alloc_all_offers_every_free_address(self):
        result = successors("new(x, 7)", options=StepOptions(alloc_all=True, addr_count=3))
        assert [cfg.stack["x"] for _, cfg in result] == [Addr(0), Addr(1), Addr(2)]

    def test_read_and_write(self):
        s = Stack({"x": Addr(0)})
        h = PermHeap.of((Addr(0), 1, 4))
        [(_, after_write)] = successors("[x] := 9", s, h)
        assert after_write.heap.value(Addr(0)) == 9
        [(_, after_read)] = successors("y := [x]", s, h)
        assert after_read.stack["y"] == 4

    def test_read_outside_heap_aborts(self):
        [(label, outcome)] = successors("y := [x]", Stack({"x": Addr(1)}), PermHeap.of((Addr(0), 1, 0)))
        assert label.rule == "ReadA" and label.aborts
        assert outcome is ABORT

    def test_free_removes_cell(self):
        [(_, cfg)] = successors("free(x)", Stack({"x": Addr(0)}), PermHeap.of((Addr(0), 1, 0)))
        assert Addr(0) not in cfg.heap

    def test_freeing_a_ghost_aborts(self):
        h = PermHeap.of((GhostAddr("count"), 1, 0))
        [(label, outcome)] = successors("free(count)", heap=h, ghosts=GHOSTS)
        assert (label.rule, label.detail) == ("FreeA", "ghost")
        assert outcome is ABORT

    def test_print_appends_to_stdout(self):
        h = PermHeap.of((STDOUT, 1, (1,)))
        [(label, cfg)] = successors("print(2)", heap=h)
        assert label.rule == "Print"
        assert cfg.heap.value(STDOUT) == (1, 2)

    def test_print_without_stdout_aborts(self):
        [(label, outcome)] = successors("print(2)")
        assert label.rule == "PrintA" and outcome is ABORT

    def test_ghost_assignment_reads_ghost_cells(self):
        h = PermHeap.of((GhostAddr("count"), 1, 3))
        [(label, cfg)] = successors("ghost count := count + 1", heap=h, ghosts=GHOSTS)
        assert str(label) == "Write[ghost]"
        assert cfg.heap.value(GhostAddr("count")) == 4

    def test_ghost_assignment_without_cell_aborts(self):
        [(label, outcome)] = successors("ghost count := 1", ghosts=GHOSTS)
        assert (label.rule, label.detail) == ("WriteA", "ghost")
        assert outcome is ABORT


class TestCompositeCommands:
    def test_sequence_lifts_and_skips(self):
        [(label, cfg)] = successors("x := 1; y := 2")
        assert str(label) == "Seq/Assign"
        [(label, _)] = step(cfg)
        assert label.rule == "SeqS"

    def test_while_unfolds(self):
        [(label, cfg)] = successors("while x < 1 { x := x + 1 }")
        assert label.rule == "While"
        [(label, _)] = step(cfg)
        assert label.rule == "Ite1"

    def test_parallel_interleaves(self):
        labels = [str(label) for label, _ in successors("par { x := 1 } { y := 2 }")]
        assert labels == ["Par1/Assign", "Par2/Assign"]

    def test_race_aborts(self):
        s = Stack({"x": Addr(0)})
        h = PermHeap.of((Addr(0), 1, 0))
        result = successors("par { [x] := 1 } { y := [x] }", s, h)
        races = [(label, outcome) for label, outcome in result if label.rule == "Race"]
        assert len(races) == 1
        label, outcome = races[0]
        assert str(label) == "Race[@0]" and outcome is ABORT

    def test_disjoint_accesses_do_not_race(self):
        s = Stack({"x": Addr(0), "z": Addr(1)})
        h = PermHeap.of((Addr(0), 1, 0), (Addr(1), 1, 0))
        result = successors("par { [x] := 1 } { y := [z] }", s, h)
        assert all(label.rule != "Race" for label, _ in result)

    def test_with_blocks_on_false_condition(self):
        assert successors("lock L { with L when false { skip } }") == []

    def test_lock_held_by_other_branch_blocks(self):
        c = Par(Within("L", Assign("x", IntLit(1))), With("L", TRUE, SKIP))
        labels = [label.name for label, _ in step(Config(c, Stack(), EMPTY_HEAP))]
        assert labels == ["Par1"]

    def test_reentering_a_held_lock_aborts(self):
        [(label, outcome)] = step(Config(Within("L", Within("L", SKIP)), Stack(), EMPTY_HEAP))
        assert label.rule == "WithinL" and outcome is ABORT

    def test_init_declares_the_ghost_lock(self):
        [(label, cfg)] = successors("init { skip }")
        assert label.rule == "Init"
        assert isinstance(cfg.command, LockDecl) and cfg.command.lock == "@G"

    def test_next_runs_its_body_as_one_step(self):
        h = PermHeap.of((STDOUT, 1, ()), (GhostAddr("count"), 1, 0))
        text = "next { print(c); ghost count := count + 1 }"
        [(label, cfg)] = successors(text, Stack({"c": 5}), h, ghosts=GHOSTS)
        assert str(label) == "Next"
        assert cfg.command == SKIP
        assert cfg.heap.value(STDOUT) == (5,)
        assert cfg.heap.value(GhostAddr("count")) == 1

    def test_next_with_non_atomic_body_is_stuck(self):
        assert successors("next { x := 1; y := 2 }") == []


class TestStaticPredicates:
    def test_is_atomic(self):
        assert is_atomic(parse_command("print(1); ghost count := count + 1", GHOSTS))
        assert is_atomic(parse_command("ghost count := 0", GHOSTS))
        assert not is_atomic(parse_command("x := 1; y := 2"))
        assert not is_atomic(parse_command("if true { skip }"))

    def test_reads_and_writes(self):
        s = Stack({"x": Addr(0)})
        read = parse_command("y := [x]")
        assert reads(read, s) == {Addr(0)}
        assert writes(read, s) == set()
        assert writes(parse_command("print(1)"), s) == {STDOUT}

    def test_mod_vars(self):
        assert mod_vars(parse_command("x := 1; y := [x]; new(z, 0); [x] := 2")) == {"x", "y", "z"}

    def test_label_text(self):
        label = StepLabel("Assign").within("Seq").within("Par1")
        assert str(label) == "Par1/Seq/Assign"
        assert label.name == "Par1"
        assert not label.aborts


class TestErasure:
    def test_removes_ghost_code(self):
        erased = erase_ghost(load_program("echo_loop.rimp").command)
        kinds = {type(n) for n in walk_command(erased)}
        assert not kinds & {GhostAssign, NextBlock, InitBlock}
        assert Print in kinds
        assert all(n.lock != "@G" for n in walk_command(erased) if isinstance(n, LockDecl))

    def test_keeps_ordinary_commands(self):
        c = parse_command("x := 1; y := 2")
        assert erase_ghost(c) == c
