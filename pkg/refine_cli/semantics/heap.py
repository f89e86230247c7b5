"""Stacks, permission heaps and heap composition.

A heap maps addresses to (permission, value) cells. Permissions are exact
rationals in (0, 1]; a heap is *normal* when every permission is 1.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import (
    TYPE_CHECKING, Any, Dict, Iterable, Iterator, List, Mapping,
    Optional, Sequence, Tuple, Union,
)

from ..errors import HeapInvariantError
from .values import (
    Addr, Address, Value, decode_value, encode_value,
    format_value, is_address, same_value, value_key,
)

if TYPE_CHECKING:
    from .ats import ATSSpec

logger = logging.getLogger(__name__)

FULL = Fraction(1)
ZERO = Fraction(0)


class _Undefined:
    """Marker for a partial operation with no result."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "Undefined"


UNDEFINED = _Undefined()


def parse_perm(text: Union[str, int, Fraction]) -> Fraction:
    """Read a permission from "num/den" text (or an int/Fraction)."""
    perm = Fraction(text)
    if perm <= 0 or perm > 1:
        raise HeapInvariantError(f"permission {perm} outside (0, 1]")
    return perm


def format_perm(perm: Fraction) -> str:
    return f"{perm.numerator}/{perm.denominator}"


def address_key(a: Address) -> Tuple:
    return value_key(a)


@dataclass(frozen=True)
class Cell:
    """One heap cell.

    Attributes:
        perm: Fractional permission in (0, 1]
        value: Stored value
    """
    perm: Fraction
    value: Value

    def __post_init__(self):
        if not isinstance(self.perm, Fraction):
            object.__setattr__(self, "perm", Fraction(self.perm))
        if self.perm <= 0 or self.perm > 1:
            raise HeapInvariantError(f"stored permission {self.perm} outside (0, 1]")


class PermHeap:
    """Immutable finite partial map from addresses to cells."""

    __slots__ = ("_cells", "_key")

    def __init__(self, cells: Optional[Mapping[Address, Cell]] = None):
        self._cells: Dict[Address, Cell] = {}
        for addr, cell in (cells or {}).items():
            if not is_address(addr):
                raise HeapInvariantError(f"not an address: {addr!r}")
            if not isinstance(cell, Cell):
                cell = Cell(*cell)
            self._cells[addr] = cell
        self._key = None

    @classmethod
    def of(cls, *entries: Tuple[Address, Any, Value]) -> "PermHeap":
        """Build from (address, perm, value) triples."""
        return cls({a: Cell(Fraction(p), v) for a, p, v in entries})

    def __contains__(self, addr: object) -> bool:
        return addr in self._cells

    def __len__(self) -> int:
        return len(self._cells)

    def __iter__(self) -> Iterator[Address]:
        return iter(self.addresses())

    def get(self, addr: Address) -> Optional[Cell]:
        return self._cells.get(addr)

    def addresses(self) -> List[Address]:
        return sorted(self._cells, key=address_key)

    def items(self) -> List[Tuple[Address, Cell]]:
        return [(a, self._cells[a]) for a in self.addresses()]

    def value(self, addr: Address) -> Value:
        return self._cells[addr].value

    def key(self) -> Tuple:
        """Hashable canonical identity (permission and type-tagged value)."""
        if self._key is None:
            self._key = tuple(
                (address_key(a), c.perm, value_key(c.value)) for a, c in self.items()
            )
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PermHeap) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def is_empty(self) -> bool:
        return not self._cells

    def is_normal(self) -> bool:
        return all(c.perm == FULL for c in self._cells.values())

    def with_cell(self, addr: Address, perm: Fraction, value: Value) -> "PermHeap":
        cells = dict(self._cells)
        cells[addr] = Cell(perm, value)
        return PermHeap(cells)

    def without(self, addr: Address) -> "PermHeap":
        cells = dict(self._cells)
        cells.pop(addr, None)
        return PermHeap(cells)

    def __repr__(self) -> str:
        body = ", ".join(
            f"{a} ↦({format_perm(c.perm)}, {format_value(c.value)})" for a, c in self.items()
        )
        return "{" + body + "}"

    def to_dict(self) -> Dict[str, Any]:
        """Canonical JSON encoding."""
        return {
            str(a): {"perm": format_perm(c.perm), "value": encode_value(c.value)}
            for a, c in self.items()
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PermHeap":
        cells = {}
        for addr_text, cell in data.items():
            addr = decode_value(addr_text)
            cells[addr] = Cell(Fraction(cell["perm"]), decode_value(cell["value"]))
        return cls(cells)


EMPTY_HEAP = PermHeap()


def heap_add(h1: PermHeap, h2: PermHeap) -> Union[PermHeap, _Undefined]:
    """h1 ⊕ h2: shared cells need equal values and a summed permission ≤ 1."""
    if len(h1) < len(h2):
        h1, h2 = h2, h1
    cells = dict(h1._cells)
    for addr, cell in h2._cells.items():
        mine = cells.get(addr)
        if mine is None:
            cells[addr] = cell
            continue
        if not same_value(mine.value, cell.value):
            return UNDEFINED
        total = mine.perm + cell.perm
        if total > FULL:
            return UNDEFINED
        cells[addr] = Cell(total, mine.value)
    return PermHeap(cells)


def heap_sum(heaps: Iterable[PermHeap]) -> Union[PermHeap, _Undefined]:
    total: Union[PermHeap, _Undefined] = EMPTY_HEAP
    for h in heaps:
        if total is UNDEFINED:
            return UNDEFINED
        total = heap_add(total, h)  # type: ignore[arg-type]
    return total


def heap_update(h: PermHeap, a: Address, v: Value) -> PermHeap:
    """h[a ↦ v]: a holds v with full permission."""
    return h.with_cell(a, FULL, v)


def heap_delete(h: PermHeap, a: Address) -> PermHeap:
    return h.without(a)


def heap_subtract(h: PermHeap, a: Address, perm: Fraction) -> Optional[PermHeap]:
    """Remove `perm` of cell a; None if h holds less than that."""
    cell = h.get(a)
    if cell is None or cell.perm < perm:
        return None
    rest = cell.perm - perm
    if rest == ZERO:
        return h.without(a)
    return h.with_cell(a, rest, cell.value)


def heap_difference(h: PermHeap, part: PermHeap) -> Optional[PermHeap]:
    """The h2 with part ⊕ h2 = h, if any."""
    result = h
    for addr, cell in part.items():
        mine = result.get(addr)
        if mine is None or not same_value(mine.value, cell.value):
            return None
        result = heap_subtract(result, addr, cell.perm)
        if result is None:
            return None
    return result


def normal_completion(h: PermHeap) -> PermHeap:
    """The heap h' that tops every cell of h up to permission 1."""
    return PermHeap({a: Cell(FULL - c.perm, c.value) for a, c in h.items() if c.perm < FULL})


def fresh_address(h: PermHeap) -> Addr:
    """Least ordinary address not in dom(h)."""
    index = 0
    while Addr(index) in h:
        index += 1
    return Addr(index)


def get_state(h: PermHeap, ats: "ATSSpec") -> Union[Tuple[Value, ...], _Undefined]:
    """Read the ATS state (v1..vk) out of the ghost cells of h."""
    state = []
    for addr in ats.ghost_addresses:
        cell = h.get(addr)
        if cell is None:
            return UNDEFINED
        state.append(cell.value)
    return tuple(state)


class Stack:
    """Total map from variables to values; unassigned variables read `default`."""

    __slots__ = ("_vars", "default", "_key")

    def __init__(self, bindings: Optional[Mapping[str, Value]] = None, default: Value = 0):
        self._vars: Dict[str, Value] = dict(bindings or {})
        self.default = default
        self._key = None

    def __getitem__(self, name: str) -> Value:
        return self._vars.get(name, self.default)

    def __contains__(self, name: object) -> bool:
        return name in self._vars

    def assign(self, name: str, value: Value) -> "Stack":
        bindings = dict(self._vars)
        bindings[name] = value
        return Stack(bindings, self.default)

    def update(self, bindings: Mapping[str, Value]) -> "Stack":
        merged = dict(self._vars)
        merged.update(bindings)
        return Stack(merged, self.default)

    def restrict(self, names: Iterable[str]) -> "Stack":
        wanted = set(names)
        return Stack({k: v for k, v in self._vars.items() if k in wanted}, self.default)

    def names(self) -> List[str]:
        return sorted(self._vars)

    def key(self) -> Tuple:
        # Variables bound to the default are indistinguishable from unbound ones.
        if self._key is None:
            dkey = value_key(self.default)
            self._key = tuple(
                (k, value_key(v)) for k, v in sorted(self._vars.items())
                if value_key(v) != dkey
            )
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Stack) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{k}={format_value(v)}" for k, v in sorted(self._vars.items())) + "}"

    def to_dict(self) -> Dict[str, Any]:
        return {k: encode_value(v) for k, v in sorted(self._vars.items())}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Stack":
        return cls({k: decode_value(v) for k, v in data.items()})


def heap_from_values(entries: Sequence[Tuple[Address, Value]]) -> PermHeap:
    """Normal heap from (address, value) pairs."""
    return PermHeap({a: Cell(FULL, v) for a, v in entries})
