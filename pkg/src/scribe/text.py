"""Shared tokenization and term normalization.

A word token is a maximal run of alphanumerics plus "/", so clinical
shorthand like "h/o", "w/" and "b/l" survives as a single unit. Any other
non-space character is its own punctuation token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

WORD_RE = re.compile(r"[A-Za-z0-9/]+")
TOKEN_RE = re.compile(r"[A-Za-z0-9/]+|[^\sA-Za-z0-9/]")

_STRIP_PUNCT = ".,;:!?()[]{}<>\"'`"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    is_word: bool


def tokenize(text: str) -> list[Token]:
    """Split text into word and punctuation tokens with character spans."""
    out = []
    for m in TOKEN_RE.finditer(text):
        t = m.group(0)
        out.append(Token(t.lower(), m.start(), m.end(), bool(WORD_RE.fullmatch(t))))
    return out


def normalize_term(term: str) -> str:
    """Canonical form for synonyms and queries.

    Lowercase, collapse internal whitespace to single spaces, strip
    leading/trailing punctuation. Deterministic so that ontology files,
    typed queries, and note text all meet in the same space.
    """
    s = " ".join(term.lower().split())
    return s.strip(_STRIP_PUNCT + " ")


def word_tokens(text: str) -> list[str]:
    """Lowercased word tokens only (no punctuation, no spans)."""
    return [m.group(0).lower() for m in WORD_RE.finditer(text)]
