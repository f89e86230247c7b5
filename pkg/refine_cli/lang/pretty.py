"""Pretty printer whose output parses back to the same AST."""

from typing import List, Optional

from .assertions import (
    And, Assertion, Binder, Emp, Exists, IterSep, Not, PointsTo, Pure, Sep, Wand,
    match_implies, match_or,
)
from .ast import (
    Alloc, Assign, Binary, BoolLit, Command, Expr, Free, GhostAssign, GhostVar,
    InitBlock, IntLit, Ite, LockDecl, NextBlock, Par, Print, Program, Read, Seq,
    SeqLit, Skip, Unary, Var, While, With, Within, Write,
)
from .parser import BINARY_PRECEDENCE, COMPARISON_LEVEL

INDENT = "  "
ATOM_LEVEL = 9
UNARY_LEVEL = 8


# Expressions ---------------------------------------------------------------

def expr_level(e: Expr) -> int:
    if isinstance(e, Binary):
        if e.op == "index":
            return ATOM_LEVEL
        return BINARY_PRECEDENCE[e.op][0]
    if isinstance(e, Unary):
        return ATOM_LEVEL if e.op == "len" else UNARY_LEVEL
    if isinstance(e, IntLit) and e.value < 0:
        return UNARY_LEVEL
    return ATOM_LEVEL


def format_expr(e: Expr, min_level: int = 0) -> str:
    text = _expr(e)
    if expr_level(e) < min_level:
        return f"({text})"
    return text


def _expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, SeqLit):
        return "[" + ", ".join(format_expr(i) for i in e.items) + "]"
    if isinstance(e, (Var, GhostVar)):
        return e.name
    if isinstance(e, Unary):
        if e.op == "len":
            return f"len({format_expr(e.operand)})"
        if isinstance(e.operand, IntLit):
            return f"{e.op}({_expr(e.operand)})"
        return e.op + format_expr(e.operand, UNARY_LEVEL)
    if isinstance(e, Binary):
        if e.op == "index":
            return f"{format_expr(e.left, ATOM_LEVEL)}[{format_expr(e.right)}]"
        level, right_assoc = BINARY_PRECEDENCE[e.op]
        left = format_expr(e.left, level + 1 if right_assoc else level)
        right = format_expr(e.right, level if right_assoc else level + 1)
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


# Assertions ----------------------------------------------------------------

A_WAND, A_IMPLIES, A_OR, A_AND, A_SEP, A_NOT, A_ATOM = range(7)


def format_assertion(a: Assertion, min_level: int = 0) -> str:
    text, level = _assertion(a)
    if level < min_level:
        return f"({text})"
    return text


def _pure_text(e: Expr) -> str:
    text = format_expr(e)
    if expr_level(e) < COMPARISON_LEVEL or text.startswith(("(", "!")):
        return f"pure({text})"
    return text


def _points_to_text(a: PointsTo) -> str:
    addr = format_expr(a.addr, COMPARISON_LEVEL + 1)
    value = format_expr(a.value, COMPARISON_LEVEL + 1)
    if a.perm == 1 and not value.startswith("["):
        return f"{addr} |-> {value}"
    perm = str(a.perm.numerator) if a.perm.denominator == 1 else f"{a.perm.numerator}/{a.perm.denominator}"
    return f"{addr} |->[{perm}] {value}"


def _assertion(a: Assertion):
    if isinstance(a, Pure):
        return _pure_text(a.expr), A_ATOM
    if isinstance(a, Emp):
        return "emp", A_ATOM
    if isinstance(a, PointsTo):
        return _points_to_text(a), A_ATOM
    if isinstance(a, IterSep):
        return "sep[" + ", ".join(format_assertion(p) for p in a.parts) + "]", A_ATOM
    if isinstance(a, Binder):
        kind = "exists" if isinstance(a, Exists) else "forall"
        binder = a.var if a.typ is None else f"{a.var}:{a.typ}"
        # The body extends as far right as possible, so binders only sit unparenthesized last.
        return f"{kind} {binder}. {format_assertion(a.body)}", A_WAND
    disjuncts = match_or(a)
    if disjuncts is not None:
        left, right = disjuncts
        return f"{format_assertion(left, A_OR)} || {format_assertion(right, A_AND)}", A_OR
    implication = match_implies(a)
    if implication is not None:
        left, right = implication
        return f"{format_assertion(left, A_OR)} ==> {format_assertion(right, A_IMPLIES)}", A_IMPLIES
    if isinstance(a, Wand):
        return f"{format_assertion(a.left, A_IMPLIES)} -* {format_assertion(a.right, A_WAND)}", A_WAND
    if isinstance(a, And):
        return f"{format_assertion(a.left, A_AND)} && {format_assertion(a.right, A_SEP)}", A_AND
    if isinstance(a, Sep):
        return f"{format_assertion(a.left, A_SEP)} ** {format_assertion(a.right, A_NOT)}", A_SEP
    if isinstance(a, Not):
        return f"!{format_assertion(a.body, A_NOT)}", A_NOT
    raise TypeError(f"not an assertion: {a!r}")


# Commands ------------------------------------------------------------------

def format_command(c: Command, depth: int = 0) -> str:
    return "\n".join(_command_lines(c, depth))


def _block(body: Command, depth: int, head: Optional[List[str]] = None) -> List[str]:
    lines = ["{"]
    pad = INDENT * (depth + 1)
    for extra in head or []:
        lines.append(pad + extra)
    lines.extend(_command_lines(body, depth + 1))
    lines.append(INDENT * depth + "}")
    return lines


def _join(prefix: str, block: List[str]) -> List[str]:
    return [prefix + block[0]] + block[1:]


def _simple(c: Command) -> Optional[str]:
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Assign):
        rhs = format_expr(c.expr)
        if isinstance(c.expr, SeqLit) and len(c.expr.items) == 1:
            rhs = f"({rhs})"
        return f"{c.var} := {rhs}"
    if isinstance(c, Write):
        return f"[{format_expr(c.addr)}] := {format_expr(c.value)}"
    if isinstance(c, Read):
        return f"{c.var} := [{format_expr(c.addr)}]"
    if isinstance(c, Free):
        return f"free({format_expr(c.addr)})"
    if isinstance(c, Alloc):
        return f"new({c.var}, {format_expr(c.expr)})"
    if isinstance(c, Print):
        return f"print({format_expr(c.expr)})"
    if isinstance(c, GhostAssign):
        return f"ghost {c.name} := {format_expr(c.expr)}"
    return None


def _command_lines(c: Command, depth: int) -> List[str]:
    pad = INDENT * depth
    simple = _simple(c)
    if simple is not None:
        return [pad + simple]
    if isinstance(c, Seq):
        if isinstance(c.first, Seq):
            first = _join(pad, _block(c.first, depth))
        else:
            first = _command_lines(c.first, depth)
        first[-1] += ";"
        if c.mid is not None:
            first.append(f"{pad}assert {format_assertion(c.mid)};")
        return first + _command_lines(c.second, depth)
    if isinstance(c, Ite):
        lines = _join(f"{pad}if {format_expr(c.cond)} ", _block(c.then, depth))
        if not isinstance(c.else_, Skip):
            else_block = _block(c.else_, depth)
            lines[-1] += " else " + else_block[0]
            lines.extend(else_block[1:])
        return lines
    if isinstance(c, While):
        inv = f" inv {format_assertion(c.invariant)}" if c.invariant is not None else ""
        return _join(f"{pad}while {format_expr(c.cond)}{inv} ", _block(c.body, depth))
    if isinstance(c, Par):
        lines = _join(f"{pad}par ", _block(c.left, depth, _spec_lines(c.left_spec)))
        right = _block(c.right, depth, _spec_lines(c.right_spec))
        lines[-1] += " " + right[0]
        return lines + right[1:]
    if isinstance(c, LockDecl):
        inv = f" inv {format_assertion(c.invariant)}" if c.invariant is not None else ""
        return _join(f"{pad}lock {c.lock}{inv} ", _block(c.body, depth))
    if isinstance(c, With):
        return _join(f"{pad}with {c.lock} when {format_expr(c.cond)} ", _block(c.body, depth))
    if isinstance(c, Within):
        return _join(f"{pad}within {c.lock} ", _block(c.body, depth))
    if isinstance(c, InitBlock):
        inv = f" inv {format_assertion(c.invariant)}" if c.invariant is not None else ""
        return _join(f"{pad}init{inv} ", _block(c.body, depth))
    if isinstance(c, NextBlock):
        return _join(f"{pad}next ", _block(c.body, depth))
    raise TypeError(f"not a command: {c!r}")


def _spec_lines(spec) -> List[str]:
    if spec is None:
        return []
    lines = []
    if spec.requires is not None:
        lines.append(f"requires {format_assertion(spec.requires)};")
    if spec.ensures is not None:
        lines.append(f"ensures {format_assertion(spec.ensures)};")
    return lines


def format_program(program: Program) -> str:
    lines: List[str] = []
    extra_ghosts = [g for g in program.ghosts if g != "stdOut"]
    if extra_ghosts:
        lines.append(f"ghost {', '.join(extra_ghosts)};")
    lines.append(f"pre {format_assertion(program.pre)};")
    lines.append(f"post {format_assertion(program.post)};")
    lines.append(format_command(program.command))
    return "\n".join(lines) + "\n"


def format_ats(spec) -> str:
    decls = ", ".join(
        name if typ is None else f"{name}: {typ}" for name, typ in zip(spec.vars, spec.types)
    )
    return (
        f"vars {decls};\n"
        f"init {format_assertion(spec.init)};\n"
        f"next {format_assertion(spec.next)};\n"
    )
