"""Recursive-descent parser for `.rimp` programs, `.rats` files and assertions."""

import logging
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Set, Tuple

from ..errors import ParseError
from .assertions import (
    EMP, Assertion, And, Exists, Forall, IterSep, Not, PointsTo, Pure, Sep, Wand,
    acc, apt, fresh_name, free_vars, implies, is_fol, or_,
)
from .ast import (
    SKIP, Alloc, Assign, Binary, BoolLit, BranchSpec, Command, Expr, Free,
    GhostAssign, GhostVar, InitBlock, IntLit, Ite, LockDecl, NextBlock, Par,
    Print, Program, Read, Seq, SeqLit, Unary, Var, While, With, Write,
    expr_vars,
)
from .lexer import Token, tokenize
from ..semantics.values import STDOUT_NAME

logger = logging.getLogger(__name__)

# (precedence, right-associative)
BINARY_PRECEDENCE: Dict[str, Tuple[int, bool]] = {
    "==>": (1, True),
    "||": (2, False),
    "&&": (3, False),
    "=": (4, False), "!=": (4, False), "<": (4, False), "<=": (4, False),
    ">": (4, False), ">=": (4, False),
    "++": (5, False), ":": (5, True),
    "+": (6, False), "-": (6, False),
    "*": (7, False),
}
COMPARISON_LEVEL = 4
TYPE_NAMES = ("int", "bool", "seq", "addr")
EXPR_START_KW = ("true", "false", "len")


class Parser:
    """Token-stream parser shared by every entry point.

    Attributes:
        tokens: Token list ending in eof
        ghosts: Names resolved to ghost addresses
        check_locks: Whether `with L` must sit inside `lock L`
    """

    def __init__(self, text: str, ghosts: Iterable[str] = (), check_locks: bool = True):
        self.tokens: List[Token] = tokenize(text)
        self.pos = 0
        self.ghosts: Set[str] = set(ghosts) | {STDOUT_NAME}
        self.check_locks = check_locks
        self.lock_scope: List[str] = []

    # Token helpers ---------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        index = min(self.pos + k, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().is_(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not tok.is_(text):
            self.fail(f"expected '{text}' but found {describe(tok)}", tok)
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected identifier but found {describe(tok)}", tok)
        return self.advance()

    def fail(self, message: str, tok: Optional[Token] = None, code: str = "SyntaxError"):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column, code)

    def at_end(self) -> bool:
        return self.peek().kind == "eof"

    def expect_end(self) -> None:
        if not self.at_end():
            self.fail(f"unexpected {describe(self.peek())}")

    # Expressions -----------------------------------------------------------

    def expression(self, min_level: int = 1, lhs: Optional[Expr] = None) -> Expr:
        """Precedence climbing; an already-parsed left operand may be supplied."""
        left = lhs if lhs is not None else self.unary_expr()
        while True:
            tok = self.peek()
            if tok.kind != "sym" or tok.text not in BINARY_PRECEDENCE:
                return left
            level, right_assoc = BINARY_PRECEDENCE[tok.text]
            if level < min_level:
                return left
            self.advance()
            right = self.expression(level if right_assoc else level + 1)
            left = Binary(tok.text, left, right)

    def unary_expr(self) -> Expr:
        tok = self.peek()
        if tok.is_("-"):
            self.advance()
            if self.peek().kind == "num" and not self.peek(1).is_("["):
                return IntLit(-int(self.advance().text))
            return Unary("-", self.unary_expr())
        if tok.is_("!"):
            self.advance()
            return Unary("!", self.unary_expr())
        return self.postfix_expr(self.atom_expr())

    def postfix_expr(self, e: Expr) -> Expr:
        while self.peek().is_("["):
            self.advance()
            index = self.expression()
            self.expect("]")
            e = Binary("index", e, index)
        return e

    def atom_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return IntLit(int(tok.text))
        if tok.is_("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true")
        if tok.is_("len"):
            self.advance()
            self.expect("(")
            inner = self.expression()
            self.expect(")")
            return Unary("len", inner)
        if tok.is_("["):
            self.advance()
            items: List[Expr] = []
            if not self.peek().is_("]"):
                items.append(self.expression())
                while self.accept(","):
                    items.append(self.expression())
            self.expect("]")
            return SeqLit(tuple(items))
        if tok.is_("("):
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.advance()
            if tok.text == "_":
                self.fail("'_' is only allowed as a points-to value", tok)
            return self.name_ref(tok.text)
        self.fail(f"expected expression but found {describe(tok)}", tok)
        raise AssertionError("unreachable")

    def name_ref(self, name: str) -> Expr:
        if name in self.ghosts:
            return GhostVar(name)
        return Var(name)

    def starts_expression(self, tok: Token) -> bool:
        if tok.kind in ("num", "ident"):
            return True
        return tok.is_("(", "[", "-", "!", *EXPR_START_KW)

    # Assertions ------------------------------------------------------------

    def assertion(self) -> Assertion:
        left = self.implication()
        if self.accept("-*"):
            return Wand(left, self.assertion())
        return left

    def implication(self) -> Assertion:
        left = self.disjunction()
        if self.accept("==>"):
            return implies(left, self.implication())
        return left

    def disjunction(self) -> Assertion:
        left = self.conjunction()
        while self.accept("||"):
            left = or_(left, self.conjunction())
        return left

    def conjunction(self) -> Assertion:
        left = self.separation()
        while self.accept("&&"):
            left = And(left, self.separation())
        return left

    def separation(self) -> Assertion:
        left = self.negation()
        while self.accept("**"):
            left = Sep(left, self.negation())
        return left

    def negation(self) -> Assertion:
        if self.accept("!"):
            return Not(self.negation())
        return self.assertion_atom()

    def assertion_atom(self) -> Assertion:
        tok = self.peek()
        if tok.is_("emp"):
            self.advance()
            return EMP
        if tok.is_("exists", "forall"):
            return self.quantified()
        if tok.is_("sep"):
            self.advance()
            self.expect("[")
            parts: List[Assertion] = []
            if not self.peek().is_("]"):
                parts.append(self.assertion())
                while self.accept(","):
                    parts.append(self.assertion())
            self.expect("]")
            return IterSep(tuple(parts))
        if tok.is_("acc", "alloc"):
            self.advance()
            self.expect("(")
            addr = self.expression()
            self.expect(",")
            perm = self.permission()
            self.expect(")")
            return acc(addr, perm, fresh_name("_y", expr_vars(addr)))
        if tok.is_("apt"):
            self.advance()
            self.expect("(")
            addr = self.expression()
            self.expect(",")
            perm = self.permission()
            self.expect(",")
            value = self.expression()
            self.expect(")")
            return apt(addr, perm, value)
        if tok.is_("pure"):
            self.advance()
            self.expect("(")
            e = self.expression()
            self.expect(")")
            return Pure(e)
        if tok.is_("("):
            self.advance()
            inner = self.assertion()
            self.expect(")")
            if isinstance(inner, Pure):
                return self.continue_expression(inner.expr)
            return inner
        e = self.expression(COMPARISON_LEVEL)
        return self.points_to_or_pure(e)

    def continue_expression(self, e: Expr) -> Assertion:
        """After `( pure )`, keep reading if an expression operator follows."""
        e = self.postfix_expr(e)
        tok = self.peek()
        if tok.kind == "sym" and tok.text in BINARY_PRECEDENCE:
            if BINARY_PRECEDENCE[tok.text][0] >= COMPARISON_LEVEL:
                e = self.expression(COMPARISON_LEVEL, lhs=e)
        return self.points_to_or_pure(e)

    def points_to_or_pure(self, e: Expr) -> Assertion:
        if not self.accept("|->"):
            return Pure(e)
        perm = Fraction(1)
        if self.permission_bracket_follows():
            self.expect("[")
            perm = self.permission()
            self.expect("]")
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "_":
            self.advance()
            var = fresh_name("_y", expr_vars(e))
            return Exists(var, PointsTo(e, perm, Var(var)))
        value = self.expression(COMPARISON_LEVEL)
        return PointsTo(e, perm, value)

    def permission_bracket_follows(self) -> bool:
        if not self.peek().is_("[") or self.peek(1).kind != "num":
            return False
        k = 2
        if self.peek(k).is_("/"):
            if self.peek(k + 1).kind != "num":
                return False
            k += 2
        if not self.peek(k).is_("]"):
            return False
        return self.starts_expression(self.peek(k + 1))

    def permission(self) -> Fraction:
        tok = self.peek()
        if tok.kind != "num":
            self.fail("expected permission literal", tok)
        self.advance()
        num = int(tok.text)
        den = 1
        if self.accept("/"):
            den_tok = self.peek()
            if den_tok.kind != "num":
                self.fail("expected permission denominator", den_tok)
            self.advance()
            den = int(den_tok.text)
        if den == 0:
            self.fail("zero denominator", tok)
        perm = Fraction(num, den)
        if perm <= 0 or perm > 1:
            self.fail(f"permission {perm} outside (0, 1]", tok)
        return perm

    def quantified(self) -> Assertion:
        kind = self.advance().text
        binders: List[Tuple[str, Optional[str]]] = []
        while True:
            name = self.expect_ident().text
            typ = None
            if self.accept(":"):
                typ_tok = self.expect_ident()
                if typ_tok.text not in TYPE_NAMES:
                    self.fail(f"unknown type '{typ_tok.text}'", typ_tok)
                typ = typ_tok.text
            binders.append((name, typ))
            if not self.accept(","):
                break
        self.expect(".")
        shadowed = {n for n, _ in binders if n in self.ghosts}
        saved = set(self.ghosts)
        self.ghosts -= shadowed
        try:
            body = self.assertion()
        finally:
            self.ghosts = saved
        binder = Forall if kind == "forall" else Exists
        for name, typ in reversed(binders):
            body = binder(name, body, typ)
        return body

    # Commands --------------------------------------------------------------

    def statements(self, closing: str) -> Command:
        items: List[Command] = []
        mids: List[Optional[Assertion]] = []
        pending_mid: Optional[Assertion] = None
        while not (self.peek().is_(closing) or (closing == "" and self.at_end())):
            tok = self.peek()
            if tok.is_("assert"):
                self.advance()
                if not items:
                    self.fail("'assert' needs a preceding statement", tok)
                pending_mid = self.assertion()
                self.expect(";")
                continue
            mids.append(pending_mid)
            pending_mid = None
            command, compound = self.statement()
            items.append(command)
            if compound:
                self.accept(";")
            elif not (self.peek().is_(closing) or (closing == "" and self.at_end())):
                self.expect(";")
        if pending_mid is not None:
            self.fail("'assert' needs a following statement")
        if not items:
            return SKIP
        result = items[-1]
        for index in range(len(items) - 2, -1, -1):
            result = Seq(items[index], result, mid=mids[index + 1])
        return result

    def block(self) -> Tuple[Command, Optional[BranchSpec]]:
        self.expect("{")
        requires = ensures = None
        if self.accept("requires"):
            requires = self.assertion()
            self.expect(";")
        if self.accept("ensures"):
            ensures = self.assertion()
            self.expect(";")
        body = self.statements("}")
        self.expect("}")
        spec = BranchSpec(requires, ensures) if (requires or ensures) else None
        return body, spec

    def body_block(self) -> Command:
        tok = self.peek()
        body, spec = self.block()
        if spec is not None:
            self.fail("'requires'/'ensures' only annotate par branches", tok)
        return body

    def statement(self) -> Tuple[Command, bool]:
        """Parse one statement; the flag says whether it ended with a block."""
        tok = self.peek()
        if tok.is_("skip"):
            self.advance()
            return SKIP, False
        if tok.is_("if"):
            return self.if_statement(), True
        if tok.is_("while"):
            self.advance()
            cond = self.expression()
            invariant = self.assertion() if self.accept("inv") else None
            return While(cond, self.body_block(), invariant), True
        if tok.is_("par"):
            self.advance()
            left, left_spec = self.block()
            right, right_spec = self.block()
            return Par(left, right, left_spec, right_spec), True
        if tok.is_("lock"):
            self.advance()
            name_tok = self.expect_ident()
            invariant = self.assertion() if self.accept("inv") else None
            self.lock_scope.append(name_tok.text)
            try:
                body = self.body_block()
            finally:
                self.lock_scope.pop()
            return LockDecl(name_tok.text, body, invariant), True
        if tok.is_("with"):
            self.advance()
            name_tok = self.expect_ident()
            if self.check_locks and name_tok.text not in self.lock_scope:
                self.fail(f"lock '{name_tok.text}' is not declared", name_tok, "UnknownIdentifier")
            self.expect("when")
            cond = self.expression()
            return With(name_tok.text, cond, self.body_block()), True
        if tok.is_("within"):
            self.fail("'within' is internal and cannot appear in source", tok, "InternalFormInSource")
        if tok.is_("init"):
            self.advance()
            invariant = self.assertion() if self.accept("inv") else None
            return InitBlock(self.body_block(), invariant), True
        if tok.is_("next"):
            self.advance()
            return NextBlock(self.body_block()), True
        if tok.is_("print"):
            self.advance()
            self.expect("(")
            e = self.expression()
            self.expect(")")
            return Print(e), False
        if tok.is_("ghost"):
            self.advance()
            name_tok = self.expect_ident()
            if name_tok.text not in self.ghosts:
                self.fail(f"'{name_tok.text}' is not a declared ghost", name_tok, "UnknownIdentifier")
            self.expect(":=")
            return GhostAssign(name_tok.text, self.expression()), False
        if tok.is_("new"):
            self.advance()
            self.expect("(")
            var = self.assignable()
            self.expect(",")
            e = self.expression()
            self.expect(")")
            return Alloc(var, e), False
        if tok.is_("free"):
            self.advance()
            self.expect("(")
            e = self.expression()
            self.expect(")")
            return Free(e), False
        if tok.is_("["):
            self.advance()
            addr = self.expression()
            self.expect("]")
            self.expect(":=")
            return Write(addr, self.expression()), False
        if tok.is_("{"):
            return self.body_block(), True
        if tok.kind == "ident":
            var = self.assignable()
            self.expect(":=")
            if self.heap_read_follows():
                self.expect("[")
                addr = self.expression()
                self.expect("]")
                return Read(var, addr), False
            return Assign(var, self.expression()), False
        self.fail(f"expected statement but found {describe(tok)}", tok)
        raise AssertionError("unreachable")

    def assignable(self) -> str:
        tok = self.expect_ident()
        if tok.text in self.ghosts:
            self.fail(f"ghost '{tok.text}' can only change through 'ghost {tok.text} := ...'", tok)
        return tok.text

    def heap_read_follows(self) -> bool:
        """`x := [E]` reads the heap when the bracket is the whole right-hand side."""
        if not self.peek().is_("["):
            return False
        depth = 0
        k = 0
        while True:
            tok = self.peek(k)
            if tok.kind == "eof":
                return False
            if tok.is_("[", "(", "{"):
                depth += 1
            elif tok.is_("]", ")", "}"):
                depth -= 1
                if depth == 0:
                    break
            elif tok.is_(",") and depth == 1:
                return False
            k += 1
        if k == 1:
            return False
        after = self.peek(k + 1)
        return after.kind == "eof" or after.is_(";", "}")

    def if_statement(self) -> Command:
        self.expect("if")
        cond = self.expression()
        then = self.body_block()
        else_: Command = SKIP
        if self.accept("else"):
            if self.peek().is_("if"):
                else_ = self.if_statement()
            else:
                else_ = self.body_block()
        return Ite(cond, then, else_)


def describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else f"'{tok.text}'"


def parse_program(text: str, source: Optional[str] = None) -> Program:
    """Parse a `.rimp` program: ghost header, pre/post, then the body."""
    from .assertions import TRUE_A

    parser = Parser(text)
    ghosts: List[str] = [STDOUT_NAME]
    pre: Assertion = EMP
    post: Assertion = TRUE_A
    while True:
        tok = parser.peek()
        if tok.is_("ghost") and parser.peek(1).kind == "ident" and parser.peek(2).is_(",", ";"):
            parser.advance()
            while True:
                name_tok = parser.expect_ident()
                if name_tok.text in ghosts:
                    parser.fail(f"ghost '{name_tok.text}' declared twice", name_tok, "RepeatedVar")
                ghosts.append(name_tok.text)
                parser.ghosts.add(name_tok.text)
                if not parser.accept(","):
                    break
            parser.expect(";")
        elif tok.is_("pre"):
            parser.advance()
            pre = parser.assertion()
            parser.expect(";")
        elif tok.is_("post"):
            parser.advance()
            post = parser.assertion()
            parser.expect(";")
        else:
            break
    command = parser.statements("")
    parser.expect_end()
    logger.debug(f"Parsed program with ghosts {ghosts}")
    return Program(command=command, ghosts=tuple(ghosts), pre=pre, post=post, source=source)


def parse_command(text: str, ghosts: Iterable[str] = (), check_locks: bool = False) -> Command:
    parser = Parser(text, ghosts, check_locks=check_locks)
    command = parser.statements("")
    parser.expect_end()
    return command


def parse_assertion(text: str, ghosts: Iterable[str] = ()) -> Assertion:
    parser = Parser(text, ghosts)
    a = parser.assertion()
    parser.expect_end()
    return a


def parse_expression(text: str, ghosts: Iterable[str] = ()) -> Expr:
    parser = Parser(text, ghosts)
    e = parser.expression()
    parser.expect_end()
    return e


def parse_ats(text: str, source: Optional[str] = None):
    """Parse a `.rats` file into an ATSSpec (stutter closure is applied by the caller)."""
    from ..semantics.ats import ATSSpec

    parser = Parser(text, ghosts=())
    parser.ghosts = set()
    names: List[str] = []
    types: Dict[str, Optional[str]] = {}
    init: Optional[Assertion] = None
    nxt: Optional[Assertion] = None
    while not parser.at_end():
        tok = parser.peek()
        if tok.is_("vars"):
            parser.advance()
            while True:
                name_tok = parser.expect_ident()
                name = name_tok.text
                if name.endswith("'"):
                    parser.fail(f"variable '{name}' may not be primed", name_tok)
                if name in names:
                    parser.fail(f"variable '{name}' declared twice", name_tok, "RepeatedVar")
                typ = None
                if parser.accept(":"):
                    typ_tok = parser.expect_ident()
                    if typ_tok.text not in TYPE_NAMES:
                        parser.fail(f"unknown type '{typ_tok.text}'", typ_tok)
                    typ = typ_tok.text
                names.append(name)
                types[name] = typ
                if not parser.accept(","):
                    break
            parser.expect(";")
        elif tok.is_("init", "next"):
            parser.advance()
            formula = parser.assertion()
            parser.expect(";")
            if not is_fol(formula):
                parser.fail(f"{tok.text} formula must be first-order (no heap assertions)", tok, "NonFOLFormula")
            if tok.text == "init":
                primed = sorted(v for v in free_vars(formula) if v.endswith("'"))
                if primed:
                    parser.fail(f"primed variable {primed[0]} in init formula", tok, "PrimedVarInInit")
                init = formula
            else:
                nxt = formula
            unknown = sorted(v for v in free_vars(formula) if v.rstrip("'") not in names)
            if unknown:
                parser.fail(f"unknown variable '{unknown[0]}'", tok, "UnknownIdentifier")
        else:
            parser.fail(f"expected 'vars', 'init' or 'next' but found {describe(tok)}", tok)
    if not names:
        raise ParseError("no variables declared", 1, 1)
    if init is None or nxt is None:
        missing = "init" if init is None else "next"
        raise ParseError(f"missing {missing} section", parser.peek().line, parser.peek().column)
    return ATSSpec.build(names, init, nxt, types=types, source=source)
