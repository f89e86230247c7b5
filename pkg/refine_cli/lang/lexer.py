"""Tokenizer for programs, ATS files and assertions."""

import logging
from dataclasses import dataclass
from typing import List

from ..errors import ParseError

logger = logging.getLogger(__name__)

KEYWORDS = {
    "skip", "if", "else", "while", "inv", "par", "lock", "with", "when", "within",
    "init", "next", "print", "ghost", "new", "free", "true", "false", "emp",
    "exists", "forall", "sep", "acc", "apt", "alloc", "pure", "len", "pre", "post",
    "vars", "assert", "requires", "ensures",
}

# Longest first.
SYMBOLS = [
    "|->", "==>", "-*", "**", ":=", "++", "&&", "||", "!=", "<=", ">=", "==",
    "(", ")", "{", "}", "[", "]", ",", ";", ".", ":", "+", "-", "*", "/",
    "<", ">", "=", "!",
]

UNICODE = {
    "↦": "|->", "∗": "**", "−∗": "-*", "-∗": "-*", "∧": "&&", "∨": "||", "¬": "!",
    "⇒": "==>", "≠": "!=", "≤": "<=", "≥": ">=", "∃": "exists", "∀": "forall",
    "⊛": "sep", "−": "-",
}


@dataclass(frozen=True)
class Token:
    """One lexeme.

    Attributes:
        kind: "num", "ident", "kw", "sym" or "eof"
        text: Normalized text (unicode aliases mapped to ASCII)
        line: 1-based line
        column: 1-based column
    """
    kind: str
    text: str
    line: int
    column: int

    def is_(self, *texts: str) -> bool:
        return self.kind in ("kw", "sym") and self.text in texts


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(count: int) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("num", text[i:j], start_line, start_col))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j < n and text[j] == "'":
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, start_line, start_col))
            advance(j - i)
            continue
        matched = False
        for alias in sorted(UNICODE, key=len, reverse=True):
            if text.startswith(alias, i):
                mapped = UNICODE[alias]
                kind = "kw" if mapped in KEYWORDS else "sym"
                tokens.append(Token(kind, mapped, start_line, start_col))
                advance(len(alias))
                matched = True
                break
        if matched:
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", "=" if sym == "==" else sym, start_line, start_col))
                advance(len(sym))
                matched = True
                break
        if not matched:
            raise ParseError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(Token("eof", "", line, col))
    return tokens
