"""Linear-time extraction of ontology concepts from free text.

Two scanners share one normalization scheme (lowercase, whitespace runs
folded to a single space):

* a character trie drives greedy leftmost-longest extraction of
  non-overlapping mentions, with negation polarity attached afterwards;
* an Aho-Corasick automaton surfaces every word-boundary-aligned synonym
  occurrence as a retroactive tag candidate, overlaps included.
"""

from __future__ import annotations

import bisect
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .ontology import ConceptType, Ontology
from .text import TOKEN_RE

_WORD_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789/")

_TYPE_PRIORITY = {
    ConceptType.CONDITION: 0,
    ConceptType.SYMPTOM: 1,
    ConceptType.LAB: 2,
    ConceptType.MEDICATION: 3,
}


class Polarity(str, Enum):
    POSITIVE = "POSITIVE"
    NEGATED = "NEGATED"


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    matched_synonym: str
    entry_id: str
    polarity: Polarity


@dataclass(frozen=True)
class NegationLexicon:
    pre_triggers: tuple[str, ...]
    terminators: tuple[str, ...]
    window: int

    @classmethod
    def from_file(cls, path: str | Path) -> "NegationLexicon":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            pre_triggers=tuple(t.lower() for t in raw["pre_triggers"]),
            terminators=tuple(t.lower() for t in raw["terminators"]),
            window=int(raw.get("window", 6)),
        )


def _fold(text: str) -> tuple[list[str], list[int], list[int]]:
    """Lowercase text with whitespace runs folded to single spaces.

    Returns parallel arrays (chars, original start offsets, original end
    offsets) so folded-space matches map back to source spans.
    """
    chars: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            j = i
            while j < n and text[j].isspace():
                j += 1
            if chars and i > 0 and j < n:
                chars.append(" ")
                starts.append(i)
                ends.append(j)
            i = j
        else:
            chars.append(c.lower())
            starts.append(i)
            ends.append(i + 1)
            i += 1
    # Drop a trailing folded space (no non-space ever followed it).
    while chars and chars[-1] == " ":
        chars.pop()
        starts.pop()
        ends.pop()
    return chars, starts, ends


class _TrieNode:
    __slots__ = ("children", "entries", "synonym")

    def __init__(self) -> None:
        self.children: dict[str, _TrieNode] = {}
        self.entries: list[str] | None = None
        self.synonym: str | None = None


class ConceptMatcher:
    """Synonym trie plus Aho-Corasick automaton for one ontology.

    Build once per ontology; all scans are read-only and reentrant.
    """

    def __init__(self, ontology: Ontology):
        self.ontology = ontology
        self._root = _TrieNode()
        syn_entries: dict[str, list[str]] = {}
        for e in ontology.entries.values():
            for syn in e.synonyms:
                syn_entries.setdefault(syn, []).append(e.entry_id)
        for syn, eids in syn_entries.items():
            eids.sort(
                key=lambda eid: (
                    -ontology.entries[eid].empirical_frequency,
                    _TYPE_PRIORITY[ontology.entries[eid].concept_type],
                    eid,
                )
            )
            node = self._root
            for ch in syn:
                node = node.children.setdefault(ch, _TrieNode())
            node.entries = eids
            node.synonym = syn
        self._build_automaton(syn_entries)

    def _build_automaton(self, syn_entries: dict[str, list[str]]) -> None:
        # Flat-array Aho-Corasick over the same normalized space.
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[list[str]] = [[]]
        for syn in syn_entries:
            state = 0
            for ch in syn:
                nxt = self._goto[state].get(ch)
                if nxt is None:
                    nxt = len(self._goto)
                    self._goto[state][ch] = nxt
                    self._goto.append({})
                    self._fail.append(0)
                    self._out.append([])
                state = nxt
            self._out[state].append(syn)
        queue = deque(self._goto[0].values())
        while queue:
            r = queue.popleft()
            for ch, s in self._goto[r].items():
                queue.append(s)
                f = self._fail[r]
                while ch not in self._goto[f] and f != 0:
                    f = self._fail[f]
                target = self._goto[f].get(ch, 0)
                self._fail[s] = target if target != s else 0
                self._out[s] = self._out[s] + self._out[self._fail[s]]
        self._syn_entries = syn_entries

    def scan(self, text: str) -> list[tuple[int, int, str, str]]:
        """Greedy leftmost-longest matches: (start, end, synonym, entry_id).

        Matches begin and end at word boundaries; when several entries share
        the winning synonym, the highest-frequency entry wins (then concept
        type order, then entry id).
        """
        chars, starts, ends = _fold(text)
        n = len(chars)
        root_children = self._root.children
        out: list[tuple[int, int, str, str]] = []
        p = 0
        while p < n:
            c = chars[p]
            if c not in _WORD_CHARS or (p > 0 and chars[p - 1] in _WORD_CHARS):
                p += 1
                continue
            node = root_children.get(c)
            if node is None:
                p += 1
                continue
            best: tuple[int, _TrieNode] | None = None
            i = p + 1
            if node.entries is not None and (i >= n or chars[i] not in _WORD_CHARS):
                best = (i, node)
            while i < n:
                node = node.children.get(chars[i])
                if node is None:
                    break
                i += 1
                if node.entries is not None and (i >= n or chars[i] not in _WORD_CHARS):
                    best = (i, node)
            if best is None:
                p += 1
                continue
            stop, hit = best
            assert hit.synonym is not None and hit.entries is not None
            out.append((starts[p], ends[stop - 1], hit.synonym, hit.entries[0]))
            p = stop
        return out

    def scan_all(self, text: str) -> list[tuple[int, int, str, str]]:
        """Every word-boundary-aligned synonym occurrence, overlaps included."""
        chars, starts, ends = _fold(text)
        n = len(chars)
        state = 0
        found: set[tuple[int, int, str, str]] = set()
        for i, ch in enumerate(chars):
            while ch not in self._goto[state] and state != 0:
                state = self._fail[state]
            state = self._goto[state].get(ch, 0)
            for syn in self._out[state]:
                s = i - len(syn) + 1
                if s > 0 and chars[s - 1] in _WORD_CHARS:
                    continue
                if i + 1 < n and chars[i + 1] in _WORD_CHARS:
                    continue
                for eid in self._syn_entries[syn]:
                    found.add((starts[s], ends[i], syn, eid))
        return sorted(found)


_matcher_cache: dict[int, ConceptMatcher] = {}


def _matcher_for(ontology: Ontology) -> ConceptMatcher:
    m = _matcher_cache.get(id(ontology))
    if m is None or m.ontology is not ontology:
        m = ConceptMatcher(ontology)
        _matcher_cache[id(ontology)] = m
    return m


def detect_negation(
    tokens: list[str], mention_positions: list[int], lexicon: NegationLexicon
) -> list[Polarity]:
    """Polarity per mention, given lowercased tokens and mention start indices.

    A mention is NEGATED iff a pre-trigger phrase ends within ``window``
    tokens before it with no terminator in between. Distance counts word and
    punctuation tokens alike; continuation tokens simply are not terminators.
    """
    trigger_seqs = sorted((t.split() for t in lexicon.pre_triggers), key=len, reverse=True)
    term_seqs = [t.split() if " " in t else [t] for t in lexicon.terminators]

    trigger_ends: list[int] = []
    term_starts: list[int] = []
    n = len(tokens)
    i = 0
    while i < n:
        matched = 0
        for seq in trigger_seqs:
            if tokens[i : i + len(seq)] == seq:
                matched = len(seq)
                break
        if matched:
            trigger_ends.append(i + matched - 1)
            i += matched
            continue
        for seq in term_seqs:
            if tokens[i : i + len(seq)] == seq:
                term_starts.append(i)
                break
        i += 1

    polarities: list[Polarity] = []
    for m in mention_positions:
        k = bisect.bisect_left(trigger_ends, m)
        if k == 0:
            polarities.append(Polarity.POSITIVE)
            continue
        e = trigger_ends[k - 1]
        if m - e > lexicon.window:
            polarities.append(Polarity.POSITIVE)
            continue
        j = bisect.bisect_right(term_starts, e)
        blocked = j < len(term_starts) and term_starts[j] < m
        polarities.append(Polarity.POSITIVE if blocked else Polarity.NEGATED)
    return polarities


def extract_concepts(text: str, ontology: Ontology, lexicon: NegationLexicon) -> list[Mention]:
    """Non-overlapping concept mentions in document order, with polarity."""
    matcher = _matcher_for(ontology)
    raw = matcher.scan(text)
    if not raw:
        return []
    tokens = TOKEN_RE.findall(text.lower())
    token_starts = [m.start() for m in TOKEN_RE.finditer(text)]
    positions = [bisect.bisect_right(token_starts, s) - 1 for s, _, _, _ in raw]
    polarities = detect_negation(tokens, positions, lexicon)
    return [
        Mention(start=s, end=e, matched_synonym=syn, entry_id=eid, polarity=pol)
        for (s, e, syn, eid), pol in zip(raw, polarities)
    ]


def retroactive_candidates(text: str, ontology: Ontology) -> list[Mention]:
    """Unconfirmed full-synonym matches anywhere in already-typed text."""
    matcher = _matcher_for(ontology)
    return [
        Mention(start=s, end=e, matched_synonym=syn, entry_id=eid, polarity=Polarity.POSITIVE)
        for s, e, syn, eid in matcher.scan_all(text)
    ]


def polarity_at(text: str, starts: list[int], lexicon: NegationLexicon) -> list[Polarity]:
    """Polarity of the text at the given character offsets (e.g. tag starts)."""
    if not starts:
        return []
    tokens = TOKEN_RE.findall(text.lower())
    token_starts = [m.start() for m in TOKEN_RE.finditer(text)]
    positions = [bisect.bisect_right(token_starts, s) - 1 for s in starts]
    return detect_negation(tokens, positions, lexicon)
