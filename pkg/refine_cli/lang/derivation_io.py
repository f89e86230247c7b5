"""Derivation trees and their `.rderiv` JSON representation.

A derivation file stores every assertion and command in concrete syntax, so
it can be read and edited by hand:

    {"format": "rderiv", "version": 1, "ghosts": ["stdOut", "count"],
     "root": {"rule": "Seq", "env": [["l", "x |-> _"]], "pre": "...",
              "command": "...", "post": "...", "witnesses": {},
              "children": [...]}}
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from ..errors import DerivationFormatError, ParseError
from .assertions import Assertion
from .ast import Command, Expr
from .parser import parse_assertion, parse_command, parse_expression
from .pretty import format_assertion, format_command, format_expr

logger = logging.getLogger(__name__)

FORMAT = "rderiv"
VERSION = 1

ASSERTION_WITNESSES = ("frame",)
EXPR_WITNESSES = ("old",)
FRACTION_WITNESSES = ("rho",)
NAME_LIST_WITNESSES = ("fresh", "ys")

Env = Tuple[Tuple[str, Assertion], ...]


@dataclass
class DerivationNode:
    """One judgment `env ⊢ {pre} command {post}` and the rule that concludes it.

    Attributes:
        rule: Rule label (Skip, Assign, ..., Init, Next, Print)
        env: Lock environment, oldest binding first
        pre: Precondition
        command: Command the judgment is about
        post: Postcondition
        children: Premise judgments, in the rule's order
        witnesses: Rule instantiation (frame, existential variable, fresh names, ...)
    """
    rule: str
    env: Env
    pre: Assertion
    command: Command
    post: Assertion
    children: List["DerivationNode"] = field(default_factory=list)
    witnesses: Dict[str, Any] = field(default_factory=dict)

    def walk(self, path: str = "0") -> Iterator[Tuple[str, "DerivationNode"]]:
        """Pre-order (path, node) pairs; a child's path extends its parent's."""
        yield path, self
        for index, child in enumerate(self.children):
            yield from child.walk(f"{path}.{index}")

    def size(self) -> int:
        return sum(1 for _ in self.walk())


@dataclass
class Derivation:
    """A derivation together with the ghost names its syntax refers to."""
    root: DerivationNode
    ghosts: Tuple[str, ...] = ("stdOut",)
    source: Optional[str] = None


# Writing -------------------------------------------------------------------

def _encode_witness(key: str, value: Any) -> Any:
    if key in ASSERTION_WITNESSES:
        return format_assertion(value)
    if key in EXPR_WITNESSES:
        return format_expr(value)
    if key in FRACTION_WITNESSES:
        return f"{value.numerator}/{value.denominator}"
    if key in NAME_LIST_WITNESSES:
        return list(value)
    return value


def node_to_dict(node: DerivationNode) -> Dict[str, Any]:
    return {
        "rule": node.rule,
        "env": [[lock, format_assertion(inv)] for lock, inv in node.env],
        "pre": format_assertion(node.pre),
        "command": format_command(node.command),
        "post": format_assertion(node.post),
        "witnesses": {k: _encode_witness(k, v) for k, v in sorted(node.witnesses.items())},
        "children": [node_to_dict(child) for child in node.children],
    }


def derivation_to_dict(derivation: Derivation) -> Dict[str, Any]:
    return {
        "format": FORMAT,
        "version": VERSION,
        "ghosts": list(derivation.ghosts),
        "root": node_to_dict(derivation.root),
    }


def dumps_derivation(derivation: Derivation) -> str:
    return json.dumps(derivation_to_dict(derivation), indent=2, ensure_ascii=False)


def save_derivation(derivation: Derivation, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps_derivation(derivation) + "\n", encoding="utf-8")
    logger.info(f"Wrote derivation with {derivation.root.size()} nodes to {target}")
    return target


# Reading -------------------------------------------------------------------

class _Reader:
    """Decodes nodes, reporting the path of the first malformed one."""

    def __init__(self, ghosts: Tuple[str, ...]):
        self.ghosts = ghosts

    def assertion(self, text: Any, path: str, what: str) -> Assertion:
        if not isinstance(text, str):
            raise DerivationFormatError(f"'{what}' must be a string", path)
        try:
            return parse_assertion(text, self.ghosts)
        except ParseError as e:
            raise DerivationFormatError(f"'{what}' does not parse: {e}", path) from e

    def command(self, text: Any, path: str) -> Command:
        if not isinstance(text, str):
            raise DerivationFormatError("'command' must be a string", path)
        try:
            return parse_command(text, self.ghosts)
        except ParseError as e:
            raise DerivationFormatError(f"'command' does not parse: {e}", path) from e

    def expression(self, text: Any, path: str, what: str) -> Expr:
        if not isinstance(text, str):
            raise DerivationFormatError(f"'{what}' must be a string", path)
        try:
            return parse_expression(text, self.ghosts)
        except ParseError as e:
            raise DerivationFormatError(f"'{what}' does not parse: {e}", path) from e

    def witness(self, key: str, value: Any, path: str) -> Any:
        if key in ASSERTION_WITNESSES:
            return self.assertion(value, path, f"witnesses.{key}")
        if key in EXPR_WITNESSES:
            return self.expression(value, path, f"witnesses.{key}")
        if key in FRACTION_WITNESSES:
            try:
                return Fraction(str(value))
            except (ValueError, ZeroDivisionError) as e:
                raise DerivationFormatError(f"'witnesses.{key}' is not a fraction", path) from e
        if key in NAME_LIST_WITNESSES:
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise DerivationFormatError(f"'witnesses.{key}' must be a list of names", path)
            return tuple(value)
        return value

    def node(self, data: Any, path: str) -> DerivationNode:
        if not isinstance(data, dict):
            raise DerivationFormatError("node must be an object", path)
        missing = [k for k in ("rule", "pre", "command", "post") if k not in data]
        if missing:
            raise DerivationFormatError(f"node lacks {', '.join(missing)}", path)
        env_data = data.get("env", [])
        if not isinstance(env_data, list):
            raise DerivationFormatError("'env' must be a list", path)
        env: List[Tuple[str, Assertion]] = []
        for entry in env_data:
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
                raise DerivationFormatError("env entries are [lock, assertion] pairs", path)
            env.append((entry[0], self.assertion(entry[1], path, f"env[{entry[0]}]")))
        witnesses_data = data.get("witnesses", {})
        if not isinstance(witnesses_data, dict):
            raise DerivationFormatError("'witnesses' must be an object", path)
        children_data = data.get("children", [])
        if not isinstance(children_data, list):
            raise DerivationFormatError("'children' must be a list", path)
        return DerivationNode(
            rule=str(data["rule"]),
            env=tuple(env),
            pre=self.assertion(data["pre"], path, "pre"),
            command=self.command(data["command"], path),
            post=self.assertion(data["post"], path, "post"),
            children=[self.node(child, f"{path}.{i}") for i, child in enumerate(children_data)],
            witnesses={k: self.witness(k, v, path) for k, v in witnesses_data.items()},
        )


def derivation_from_dict(data: Any, source: Optional[str] = None) -> Derivation:
    """Decode a parsed `.rderiv` document.

    Raises:
        DerivationFormatError: the document is not a well-formed derivation
    """
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise DerivationFormatError(f"not a '{FORMAT}' document")
    if data.get("version") != VERSION:
        raise DerivationFormatError(f"unsupported version {data.get('version')!r}")
    ghosts = data.get("ghosts", ["stdOut"])
    if not isinstance(ghosts, list) or not all(isinstance(g, str) for g in ghosts):
        raise DerivationFormatError("'ghosts' must be a list of names")
    if "stdOut" not in ghosts:
        ghosts = ["stdOut"] + ghosts
    if "root" not in data:
        raise DerivationFormatError("document has no 'root'")
    names = tuple(ghosts)
    return Derivation(_Reader(names).node(data["root"], "0"), names, source)


def loads_derivation(text: str, source: Optional[str] = None) -> Derivation:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DerivationFormatError(f"invalid JSON: {e.msg} at line {e.lineno}") from e
    return derivation_from_dict(data, source)


def load_derivation(path: Union[str, Path]) -> Derivation:
    source = Path(path)
    logger.info(f"Reading derivation {source}")
    return loads_derivation(source.read_text(encoding="utf-8"), str(source))
