"""Expression evaluation over a stack (and, inside ghost code, a heap)."""

import logging
from typing import Optional

from ..errors import EvalError
from ..lang.ast import Binary, BoolLit, Expr, GhostVar, IntLit, SeqLit, Unary, Var
from .heap import PermHeap, Stack
from .values import GhostAddr, Value, append, format_value, same_value

logger = logging.getLogger(__name__)


class GhostReadError(EvalError):
    """Ghost code read a ghost cell that is not in the heap."""

    def __init__(self, addr: GhostAddr):
        self.addr = addr
        super().__init__(f"ghost cell {addr} is not allocated")


def _int(v: Value, op: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"operator '{op}' expects an integer, got {format_value(v)}")
    return v


def _bool(v: Value, op: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"operator '{op}' expects a boolean, got {format_value(v)}")
    return v


def _seq(v: Value, op: str) -> tuple:
    if not isinstance(v, tuple):
        raise EvalError(f"operator '{op}' expects a sequence, got {format_value(v)}")
    return v


def eval_expr(e: Expr, s: Stack, ghost_heap: Optional[PermHeap] = None) -> Value:
    """Evaluate e under s.

    Ghost names denote their ghost addresses, except when `ghost_heap` is
    given (right-hand sides of ghost assignments): then they denote the
    current contents of their cells.

    Raises:
        EvalError: operands of the wrong type or an index out of range
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return s[e.name]
    if isinstance(e, GhostVar):
        addr = GhostAddr(e.name)
        if ghost_heap is None:
            return addr
        cell = ghost_heap.get(addr)
        if cell is None:
            raise GhostReadError(addr)
        return cell.value
    if isinstance(e, SeqLit):
        return tuple(eval_expr(i, s, ghost_heap) for i in e.items)
    if isinstance(e, Unary):
        v = eval_expr(e.operand, s, ghost_heap)
        if e.op == "-":
            return -_int(v, "-")
        if e.op == "!":
            return not _bool(v, "!")
        if e.op == "len":
            return len(_seq(v, "len"))
        raise EvalError(f"unknown unary operator '{e.op}'")
    if isinstance(e, Binary):
        return _eval_binary(e, s, ghost_heap)
    raise EvalError(f"not an expression: {e!r}")


def _eval_binary(e: Binary, s: Stack, ghost_heap: Optional[PermHeap]) -> Value:
    op = e.op
    left = eval_expr(e.left, s, ghost_heap)
    if op in ("&&", "||", "==>"):
        lb = _bool(left, op)
        if op == "&&" and not lb:
            return False
        if op == "||" and lb:
            return True
        if op == "==>" and not lb:
            return True
        return _bool(eval_expr(e.right, s, ghost_heap), op)
    right = eval_expr(e.right, s, ghost_heap)
    if op == "=":
        return same_value(left, right)
    if op == "!=":
        return not same_value(left, right)
    if op in ("+", "-", "*", "<", "<=", ">", ">="):
        a, b = _int(left, op), _int(right, op)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    if op == "++":
        return _seq(left, op) + _seq(right, op)
    if op == ":":
        return append(left, _seq(right, op))
    if op == "index":
        items = _seq(left, "index")
        i = _int(right, "index")
        if not 0 <= i < len(items):
            raise EvalError(f"index {i} out of range for sequence of length {len(items)}")
        return items[i]
    raise EvalError(f"unknown binary operator '{op}'")


def eval_bool(e: Expr, s: Stack, ghost_heap: Optional[PermHeap] = None) -> bool:
    return _bool(eval_expr(e, s, ghost_heap), "condition")
