"""Tests for the program, ATS and assertion parsers and the pretty printer."""

from fractions import Fraction

import pytest

from refine_cli.errors import ParseError, WellFormednessError
from refine_cli.lang.assertions import Exists, PointsTo, Sep, alpha_equal, flatten_sep
from refine_cli.lang.ast import GhostVar, InitBlock, IntLit, LockDecl, NextBlock, Par, Var, walk_command
from refine_cli.lang.parser import parse_assertion, parse_ats, parse_command, parse_program
from refine_cli.lang.pretty import format_assertion, format_ats, format_program
from refine_cli.lang.wellformed import (
    InitShape, check_continuously_initialized, ghost_flows, require_continuously_initialized,
)

from conftest import FIXTURES, load_program

PROGRAMS = sorted(p.name for p in FIXTURES.glob("*.rimp"))


def parse_error(text: str, parser=parse_program) -> ParseError:
    with pytest.raises(ParseError) as info:
        parser(text)
    return info.value


class TestPrograms:
    @pytest.mark.parametrize("name", PROGRAMS)
    def test_fixture_round_trips_through_pretty_printer(self, name):
        program = load_program(name)
        again = parse_program(format_program(program))
        assert again.command == program.command
        assert again.ghosts == program.ghosts
        assert alpha_equal(again.pre, program.pre)
        assert alpha_equal(again.post, program.post)

    def test_ghost_names_resolve_to_ghost_variables(self):
        program = load_program("echo_loop.rimp")
        assert program.ghosts == ("stdOut", "count")
        first = flatten_pre(program.pre)
        assert GhostVar("stdOut") in [cell.addr for cell in first]

    def test_annotations_are_kept(self):
        program = load_program("alternating.rimp")
        invariants = program.lock_invariants()
        assert set(invariants) == {"L", "@G"}
        pars = [n for n in walk_command(program.command) if isinstance(n, Par)]
        assert pars[0].left_spec.requires is not None

    def test_init_shape(self):
        assert check_continuously_initialized(load_program("echo_loop.rimp").command).shape == InitShape.INIT_SUFFIX
        assert check_continuously_initialized(load_program("racy_counter.rimp").command).shape == InitShape.NO_INIT

    def test_init_must_come_last(self):
        program = parse_program("ghost g; init { skip }; skip")
        with pytest.raises(WellFormednessError):
            require_continuously_initialized(program.command)

    def test_ghost_read_outside_ghost_code_is_flagged(self):
        program = parse_program("ghost g; x := g")
        flows = ghost_flows(program.command)
        assert [f.ghosts for f in flows] == [("g",)]

    def test_next_and_init_blocks(self):
        c = parse_command("init { next { print(1) } }")
        kinds = {type(n) for n in walk_command(c)}
        assert InitBlock in kinds and NextBlock in kinds

    def test_with_outside_lock_is_rejected(self):
        error = parse_error("with L when true { skip }")
        assert error.code == "UnknownIdentifier"

    def test_with_inside_lock(self):
        c = parse_program("lock L inv emp { with L when true { skip } }").command
        assert isinstance(c, LockDecl)

    def test_within_is_internal(self):
        assert parse_error("within L { skip }").code == "InternalFormInSource"

    def test_ghost_declared_twice(self):
        assert parse_error("ghost g, g; skip").code == "RepeatedVar"

    def test_undeclared_ghost_assignment(self):
        assert parse_error("ghost h := 1").code == "UnknownIdentifier"

    def test_error_position(self):
        error = parse_error("x := 1;\ny := $")
        assert (error.line, error.column) == (2, 6)


class TestAssertions:
    def test_wildcard_value_is_existential(self):
        a = parse_assertion("x |-> _")
        assert isinstance(a, Exists) and isinstance(a.body, PointsTo)

    def test_permission_bracket(self):
        a = parse_assertion("x |->[2/3] 5")
        assert a == PointsTo(Var("x"), Fraction(2, 3), IntLit(5))

    def test_permission_out_of_range(self):
        with pytest.raises(ParseError):
            parse_assertion("x |->[3/2] 1")

    def test_separating_conjunction_binds_tighter_than_and(self):
        a = parse_assertion("x |-> 1 ** y |-> 2 && true")
        assert not isinstance(a, Sep)

    def test_formatted_assertion_parses_back(self):
        text = "exists v. x |->[1/2] v ** (y |-> 1 -* y |-> 2) && (v = 0 || v > 2)"
        a = parse_assertion(text)
        assert alpha_equal(parse_assertion(format_assertion(a)), a)


class TestATS:
    def test_counter(self):
        spec = parse_ats((FIXTURES / "counter.rats").read_text())
        assert spec.vars == ("stdOut", "count")
        assert spec.types == ("seq", "int")
        assert spec.ghost_names() == ("stdOut", "count")

    def test_stdout_is_moved_first(self):
        spec = parse_ats("vars n, stdOut; init stdOut = [] && n = 0; next stdOut' = stdOut && n' = n;")
        assert spec.vars[0] == "stdOut"

    def test_round_trip(self):
        spec = parse_ats((FIXTURES / "counter.rats").read_text())
        again = parse_ats(format_ats(spec))
        assert again.vars == spec.vars
        assert alpha_equal(again.next, spec.next)

    def test_primed_variable_in_init(self):
        error = parse_error("vars x; init x' = 0; next x' = x;", parse_ats)
        assert error.code == "PrimedVarInInit"

    def test_heap_formula(self):
        error = parse_error("vars x; init x |-> 0; next x' = x;", parse_ats)
        assert error.code == "NonFOLFormula"

    def test_unknown_variable(self):
        error = parse_error("vars x; init y = 0; next x' = x;", parse_ats)
        assert error.code == "UnknownIdentifier"

    def test_missing_next(self):
        with pytest.raises(ParseError):
            parse_ats("vars x; init x = 0;")


def flatten_pre(a):
    cells = []
    for part in flatten_sep(a):
        while isinstance(part, Exists):
            part = part.body
        if isinstance(part, PointsTo):
            cells.append(part)
    return cells
