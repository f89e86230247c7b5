"""Runtime values: integers, booleans, sequences and (ghost) addresses."""

import logging
from dataclasses import dataclass
from typing import Any, Tuple, Union

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Addr:
    """Ordinary heap address, allocated by `new`."""
    index: int

    def __str__(self) -> str:
        return f"@{self.index}"


@dataclass(frozen=True, order=True)
class GhostAddr:
    """Address in the reserved ghost namespace; never allocated or freed."""
    name: str

    def __str__(self) -> str:
        return f"^{self.name}"


Address = Union[Addr, GhostAddr]
Value = Union[bool, int, Tuple[Any, ...], Addr, GhostAddr]

STDOUT_NAME = "stdOut"
STDOUT = GhostAddr(STDOUT_NAME)


def is_address(v: Any) -> bool:
    return isinstance(v, (Addr, GhostAddr))


def value_type(v: Value) -> str:
    """Name of the monomorphic type of a value."""
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, tuple):
        return "seq"
    if is_address(v):
        return "addr"
    raise TypeError(f"not a value: {v!r}")


def value_key(v: Value) -> Tuple:
    """Total, type-tagged ordering key.

    Python treats True == 1; keys keep booleans and integers apart so that
    dedup and sorting never conflate them.
    """
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, tuple):
        return (2, len(v), tuple(value_key(x) for x in v))
    if isinstance(v, Addr):
        return (3, v.index)
    if isinstance(v, GhostAddr):
        return (4, v.name)
    raise TypeError(f"not a value: {v!r}")


def same_value(a: Value, b: Value) -> bool:
    return value_key(a) == value_key(b)


def append(v: Value, seq: Value) -> Tuple:
    """`Append(v, seq)`: the sequence with v added at the end."""
    if not isinstance(seq, tuple):
        raise TypeError(f"append target is not a sequence: {seq!r}")
    return seq + (v,)


def encode_value(v: Value) -> Any:
    """Canonical JSON form: addresses become "@n" / "^name" strings."""
    if isinstance(v, tuple):
        return [encode_value(x) for x in v]
    if is_address(v):
        return str(v)
    return v


def decode_value(obj: Any) -> Value:
    if isinstance(obj, list):
        return tuple(decode_value(x) for x in obj)
    if isinstance(obj, str):
        if obj.startswith("@"):
            return Addr(int(obj[1:]))
        if obj.startswith("^"):
            return GhostAddr(obj[1:])
        raise ValueError(f"unrecognised value encoding: {obj}")
    if isinstance(obj, (bool, int)):
        return obj
    raise ValueError(f"unrecognised value encoding: {obj!r}")


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)
