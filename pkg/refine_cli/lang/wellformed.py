"""Static checks on parsed programs."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

from ..errors import WellFormednessError
from .ast import Command, GhostAssign, InitBlock, command_exprs, contains, expr_ghosts, flatten_seq, walk_command

logger = logging.getLogger(__name__)


class InitShape(str, Enum):
    """Which case of the continuously-initialized check applied."""
    NO_INIT = "no-init"
    INIT_SUFFIX = "init-suffix"
    VIOLATED = "violated"


@dataclass(frozen=True)
class InitCheck:
    shape: InitShape

    @property
    def ok(self) -> bool:
        return self.shape != InitShape.VIOLATED

    def __bool__(self) -> bool:
        return self.ok


def check_continuously_initialized(c: Command) -> InitCheck:
    """c = C1 ; init{C2} with no init in C1, or c has no init at all."""
    if not contains(c, InitBlock):
        return InitCheck(InitShape.NO_INIT)
    parts = flatten_seq(c)
    last = parts[-1]
    if isinstance(last, InitBlock) and not any(contains(p, InitBlock) for p in parts[:-1]):
        return InitCheck(InitShape.INIT_SUFFIX)
    return InitCheck(InitShape.VIOLATED)


def require_continuously_initialized(c: Command) -> InitShape:
    result = check_continuously_initialized(c)
    if not result.ok:
        raise WellFormednessError("program must have the shape C1; init { C2 } with no earlier init")
    return result.shape


@dataclass(frozen=True)
class GhostFlow:
    """A non-ghost command whose expressions name ghost state.

    Attributes:
        command: The offending command node
        ghosts: Ghost names it mentions
    """
    command: Command
    ghosts: Tuple[str, ...]

    code = "GhostFlowsToControl"


def ghost_flows(c: Command) -> List[GhostFlow]:
    """Ghost names used outside `ghost g := E`; erasure is unsound when any exist."""
    flows: List[GhostFlow] = []
    for node in walk_command(c):
        if isinstance(node, GhostAssign):
            continue
        names = set()
        for e in command_exprs(node):
            names |= expr_ghosts(e)
        if names:
            flows.append(GhostFlow(node, tuple(sorted(names))))
    if flows:
        logger.warning(f"{len(flows)} command(s) read ghost state outside ghost code")
    return flows
