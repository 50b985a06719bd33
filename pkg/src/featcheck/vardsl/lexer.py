"""Tokenizer for ``.fdsl`` files."""

from __future__ import annotations

import re
import typing as t
from dataclasses import dataclass

from .ast import DslSyntaxError


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "number" | "string" | "op" | "eof"
    text: str
    line: int
    col: int


_SPEC = [
    ("ws", r"[ \t\r]+"),
    ("newline", r"\n"),
    ("comment", r"//[^\n]*"),
    ("block", r"/\*(?:.|\n)*?\*/"),
    ("number", r"\d+(?:\.\d+)?"),
    ("ident", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("string", r'"[^"\n]*"'),
    ("op", r"<=>|=>|->|<=|>=|!=|\.\.|[\[\]{}();,:+\-*/<>=!&|?']"),
]
_RX = re.compile("|".join(f"(?P<{k}>{p})" for k, p in _SPEC))


def tokenize(text: str) -> t.List[Token]:
    out: t.List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _RX.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("number", "ident", "string", "op"):
            out.append(Token(kind, chunk, line, pos - line_start + 1))
        if kind in ("newline", "block"):
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out
