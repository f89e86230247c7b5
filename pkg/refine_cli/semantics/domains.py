"""Bounded domains, enumeration budgets and three-valued verdicts."""

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Tuple

from ..errors import BudgetExceeded
from .heap import PermHeap, Stack
from .values import Addr, GhostAddr, Value

logger = logging.getLogger(__name__)

TYPES = ("int", "bool", "seq", "addr")


@dataclass(frozen=True)
class Domains:
    """Finite universes used by every bounded enumeration.

    Attributes:
        int_lo: Least integer considered
        int_hi: Greatest integer considered
        addr_count: Number of ordinary addresses (@0 .. @addr_count-1)
        max_seq_len: Longest sequence enumerated
        max_heap_cells: Largest frame heap enumerated for wands and precision
        seq_alphabet: Integers sequences are built from when enumerated
        ghosts: Ghost names whose addresses join the address universe
        node_limit: Evaluation steps allowed per query before giving up
    """
    int_lo: int = -4
    int_hi: int = 8
    addr_count: int = 4
    max_seq_len: int = 6
    max_heap_cells: int = 2
    seq_alphabet: Tuple[int, ...] = (0, 1)
    ghosts: Tuple[str, ...] = ()
    ghost_types: Tuple[Tuple[str, str], ...] = ()
    node_limit: int = 2_000_000

    def __post_init__(self):
        if self.int_lo > self.int_hi:
            raise ValueError(f"empty int range {self.int_lo}..{self.int_hi}")
        for name in ("addr_count", "max_seq_len", "max_heap_cells", "node_limit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def with_ghosts(self, names, types: Optional[Dict[str, str]] = None) -> "Domains":
        merged = tuple(sorted(set(self.ghosts) | set(names)))
        known = dict(self.ghost_types)
        known.update({k: v for k, v in (types or {}).items() if v})
        return replace(self, ghosts=merged, ghost_types=tuple(sorted(known.items())))

    def ghost_type(self, name: str) -> Optional[str]:
        """Declared type of a ghost cell's contents; stdOut always holds a sequence."""
        found = dict(self.ghost_types).get(name)
        if found is None and name == "stdOut":
            return "seq"
        return found

    def ints(self) -> List[int]:
        return list(range(self.int_lo, self.int_hi + 1))

    def addresses(self) -> List[Value]:
        return [Addr(i) for i in range(self.addr_count)] + [GhostAddr(g) for g in self.ghosts]

    def seqs(self) -> Iterator[Tuple[int, ...]]:
        for length in range(self.max_seq_len + 1):
            for items in itertools.product(self.seq_alphabet, repeat=length):
                yield tuple(items)

    def values_of(self, typ: Optional[str]) -> Iterator[Value]:
        """Enumerate a typed universe; untyped means int."""
        if typ == "bool":
            yield from (False, True)
        elif typ == "seq":
            yield from self.seqs()
        elif typ == "addr":
            yield from self.addresses()
        else:
            yield from self.ints()

    def frame_values(self) -> List[Value]:
        """Small value set stored in enumerated frame heaps."""
        ints = [i for i in (0, 1) if self.int_lo <= i <= self.int_hi] or [self.int_lo]
        return ints + [True, ()]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "int_range": [self.int_lo, self.int_hi],
            "addr_count": self.addr_count,
            "max_seq_len": self.max_seq_len,
            "max_heap_cells": self.max_heap_cells,
            "seq_alphabet": list(self.seq_alphabet),
        }


def parse_int_range(text: str) -> Tuple[int, int]:
    """Read "LO..HI" (either bound may be negative)."""
    lo_text, sep, hi_text = text.partition("..")
    if not sep:
        raise ValueError(f"expected LO..HI, got '{text}'")
    lo, hi = int(lo_text), int(hi_text)
    if lo > hi:
        raise ValueError(f"empty range {text}")
    return lo, hi


class Budget:
    """Counts enumeration steps and raises once the limit is passed."""

    def __init__(self, limit: int, name: str = "nodes"):
        self.limit = limit
        self.name = name
        self.used = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(self.name, self.limit)


class VerdictKind(str, Enum):
    """Outcome of a bounded check."""
    VALID = "valid"
    COUNTEREXAMPLE = "counterexample"
    INCONCLUSIVE = "inconclusive"


@dataclass
class Verdict:
    """Three-valued result of validity, entailment and precision checks.

    Attributes:
        kind: valid / counterexample / inconclusive
        stack: Counterexample stack
        heap: Counterexample heap
        detail: Human-readable note
        permission: Witness permission (ghost-lock permission checks)
        extra: Additional witness data (e.g. the second heap of a precision witness)
    """
    kind: VerdictKind
    stack: Optional[Stack] = None
    heap: Optional[PermHeap] = None
    detail: str = ""
    permission: Optional[Fraction] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.kind == VerdictKind.VALID

    @property
    def inconclusive(self) -> bool:
        return self.kind == VerdictKind.INCONCLUSIVE

    @classmethod
    def ok(cls, detail: str = "", permission: Optional[Fraction] = None) -> "Verdict":
        return cls(VerdictKind.VALID, detail=detail, permission=permission)

    @classmethod
    def counterexample(cls, stack: Stack, heap: PermHeap, detail: str = "", **extra) -> "Verdict":
        return cls(VerdictKind.COUNTEREXAMPLE, stack=stack, heap=heap, detail=detail, extra=extra)

    @classmethod
    def unknown(cls, detail: str) -> "Verdict":
        return cls(VerdictKind.INCONCLUSIVE, detail=detail)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"verdict": self.kind.value}
        if self.stack is not None:
            data["stack"] = self.stack.to_dict()
        if self.heap is not None:
            data["heap"] = self.heap.to_dict()
        if self.detail:
            data["detail"] = self.detail
        if self.permission is not None:
            data["permission"] = f"{self.permission.numerator}/{self.permission.denominator}"
        for k, v in self.extra.items():
            data[k] = v.to_dict() if hasattr(v, "to_dict") else v
        return data
