"""Word tokenization matching the consuming library's rules exactly.

Whitespace separates chunks; leading/trailing punctuation and symbols are
peeled off one character at a time; hyphens, slashes, parentheses and the
unicode dash family inside a chunk become separate tokens.  Digits stay
attached to letters so chemical formulae survive whole.  Parity with the
consumer's tokenizer is enforced by the test suite.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

__all__ = ["Token", "tokenize"]

_INTERNAL_SPLIT = frozenset("-/()‐‑‒–—")
_CHUNK_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


def _is_edge_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    for match in _CHUNK_RE.finditer(text):
        tokens.extend(_split_chunk(match.group(), match.start()))
    return tokens


def _split_chunk(chunk: str, offset: int) -> list[Token]:
    lo, hi = 0, len(chunk)
    lead: list[Token] = []
    trail: list[Token] = []
    while lo < hi and _is_edge_punct(chunk[lo]):
        lead.append(Token(chunk[lo], offset + lo, offset + lo + 1))
        lo += 1
    while hi > lo and _is_edge_punct(chunk[hi - 1]):
        trail.append(Token(chunk[hi - 1], offset + hi - 1, offset + hi))
        hi -= 1
    parts = lead
    run = lo
    for i in range(lo, hi):
        if chunk[i] in _INTERNAL_SPLIT:
            if run < i:
                parts.append(Token(chunk[run:i], offset + run, offset + i))
            parts.append(Token(chunk[i], offset + i, offset + i + 1))
            run = i + 1
    if run < hi:
        parts.append(Token(chunk[run:hi], offset + run, offset + hi))
    parts.extend(reversed(trail))
    return parts
