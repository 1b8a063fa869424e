"""Per-note autocomplete state machine.

Scope detection walks the completed tokens between the section start and the
cursor, left to right: a trigger phrase activates the scope and promotes its
concept type, a continuation token carries the previous state forward, a
token inside a tagged concept re-activates with that concept's type, and any
other token closes the scope. The token still being typed is never processed
as a word; it is the query. A partial token starting with the manual trigger
character forces the scope open regardless of what came before.

Suggestions never touch a model: they filter the session's cached per-type
rankings by typed prefix and stack the filtered lists in type order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .extraction import Mention, retroactive_candidates
from .ontology import ConceptType, Ontology
from .ranking.base import RankedList
from .text import TOKEN_RE

WORD_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789/")


class NoteSection(str, Enum):
    HPI = "HPI"
    PMH = "PMH"
    MEDICATIONS = "MEDICATIONS"
    ROS = "ROS"
    PHYSICAL_EXAM = "PHYSICAL_EXAM"
    MDM = "MDM"
    OTHER = "OTHER"


SECTION_HEADERS: dict[str, NoteSection] = {
    "HPI:": NoteSection.HPI,
    "PMH:": NoteSection.PMH,
    "MEDICATIONS:": NoteSection.MEDICATIONS,
    "ROS:": NoteSection.ROS,
    "PHYSICAL EXAM:": NoteSection.PHYSICAL_EXAM,
    "MDM:": NoteSection.MDM,
}

_C, _S, _L, _M = (ConceptType.CONDITION, ConceptType.SYMPTOM,
                  ConceptType.LAB, ConceptType.MEDICATION)

DEFAULT_TYPE_ORDER: dict[NoteSection, tuple[ConceptType, ...]] = {
    NoteSection.HPI: (_C, _S, _M, _L),
    NoteSection.PMH: (_C, _S, _M, _L),
    NoteSection.MEDICATIONS: (_M, _C, _S, _L),
    NoteSection.ROS: (_S, _C, _M, _L),
    NoteSection.PHYSICAL_EXAM: (_S, _C, _M, _L),
    NoteSection.MDM: (_C, _S, _L, _M),
    NoteSection.OTHER: (_C, _S, _M, _L),
}


class ScopeOrigin(str, Enum):
    TRIGGER_PHRASE = "TRIGGER_PHRASE"
    CONTINUATION = "CONTINUATION"
    TAGGED_CONCEPT = "TAGGED_CONCEPT"
    MANUAL = "MANUAL"
    NONE = "NONE"


@dataclass(frozen=True)
class ScopeState:
    active: bool
    type_order: tuple[ConceptType, ...]
    origin: ScopeOrigin

    def __post_init__(self) -> None:
        if not self.active and self.origin is not ScopeOrigin.NONE:
            raise ValueError("inactive scope must carry origin NONE")


@dataclass(frozen=True)
class TriggerLexicon:
    triggers: dict[str, ConceptType]
    continuations: frozenset[str]
    manual: str
    # phrase token sequences grouped by first token, longest first
    _by_head: dict[str, list[tuple[tuple[str, ...], ConceptType]]] = field(
        default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        by_head: dict[str, list[tuple[tuple[str, ...], ConceptType]]] = {}
        for phrase, ctype in self.triggers.items():
            toks = tuple(TOKEN_RE.findall(phrase.lower()))
            if not toks:
                continue
            by_head.setdefault(toks[0], []).append((toks, ctype))
        for seqs in by_head.values():
            seqs.sort(key=lambda sc: -len(sc[0]))
        object.__setattr__(self, "_by_head", by_head)
        if len(self.manual) != 1:
            raise ValueError("manual trigger must be a single character")

    @classmethod
    def from_file(cls, path: str | Path) -> "TriggerLexicon":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            triggers={p.lower(): ConceptType(t) for p, t in raw["triggers"].items()},
            continuations=frozenset(raw["continuations"]),
            manual=raw.get("manual", "/"),
        )

    def match_trigger(self, tokens: list[str], i: int) -> tuple[int, ConceptType] | None:
        """Longest trigger phrase starting at token i; returns (length, type)."""
        for seq, ctype in self._by_head.get(tokens[i], ()):
            if tuple(tokens[i:i + len(seq)]) == seq:
                return len(seq), ctype
        return None


@dataclass(frozen=True)
class TagSpan:
    start: int
    end: int
    entry_id: str
    concept_type: ConceptType
    synonym: str


@dataclass(frozen=True)
class Suggestion:
    entry_id: str
    matched_synonym: str
    canonical_name: str
    concept_type: ConceptType


@dataclass
class NoteState:
    text: str = ""
    cursor: int = 0
    tags: list[TagSpan] = field(default_factory=list)
    rankings: dict[ConceptType, RankedList] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)
    last_shown: list[Suggestion] = field(default_factory=list)
    last_prefix_span: tuple[int, int] = (0, 0)

    def record(self, kind: str, **payload) -> None:
        self.log.append({"t": time.monotonic(), "event": kind, **payload})


def _promote(order: tuple[ConceptType, ...], head: ConceptType) -> tuple[ConceptType, ...]:
    return (head,) + tuple(t for t in order if t is not head)


def locate_section(text: str, cursor: int) -> tuple[NoteSection, int]:
    """Section containing the cursor and the character offset of its body."""
    section = NoteSection.OTHER
    start = 0
    pos = 0
    for line in text.split("\n"):
        if pos > cursor:
            break
        for header, sec in SECTION_HEADERS.items():
            if line.startswith(header):
                section = sec
                start = pos
                break
        pos += len(line) + 1
    return section, start


def typed_prefix(text: str, cursor: int) -> tuple[int, str]:
    """(start offset, content) of the word token still being typed at cursor."""
    i = cursor
    while i > 0 and text[i - 1].lower() in WORD_CHARS:
        i -= 1
    return i, text[i:cursor].lower()


def update_scope(note: NoteState, lexicon: TriggerLexicon) -> ScopeState:
    """Recompute suggestion scope from the words before the cursor.

    Greedy left-to-right walk over the current section's tokens: a trigger
    phrase activates the scope and promotes its mapped type; a continuation
    token preserves whatever state is in force; a token inside a tagged span
    re-activates with the tag's type; any other word closes the scope. The
    manual trigger character overrides everything.

    Worked examples::

        "HPI: patient presents with "      -> active, head type SYMPTOM
        "HPI: history of htn[tagged], "    -> active, head type CONDITION
        "HPI: gave the patient "           -> inactive
    """
    section, section_start = locate_section(note.text, note.cursor)
    default_order = DEFAULT_TYPE_ORDER[section]
    prefix_start, prefix = typed_prefix(note.text, note.cursor)

    if prefix.startswith(lexicon.manual):
        return ScopeState(active=True, type_order=default_order,
                          origin=ScopeOrigin.MANUAL)

    body = note.text[section_start:prefix_start]
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for m in TOKEN_RE.finditer(body):
        tokens.append(m.group().lower())
        spans.append((section_start + m.start(), section_start + m.end()))

    tag_bounds = sorted((t.start, t.end, t.concept_type) for t in note.tags)

    def tag_type_at(lo: int, hi: int) -> ConceptType | None:
        for s, e, ctype in tag_bounds:
            if s <= lo and hi <= e:
                return ctype
        return None

    active = False
    order = default_order
    origin = ScopeOrigin.NONE
    i = 0
    n = len(tokens)
    while i < n:
        hit = lexicon.match_trigger(tokens, i)
        if hit is not None:
            length, ctype = hit
            active = True
            order = _promote(default_order, ctype)
            origin = ScopeOrigin.TRIGGER_PHRASE
            i += length
            continue
        tok = tokens[i]
        tag_type = tag_type_at(*spans[i])
        if tag_type is not None:
            active = True
            order = _promote(default_order, tag_type)
            origin = ScopeOrigin.TAGGED_CONCEPT
            i += 1
            continue
        if tok in lexicon.continuations:
            if active:
                origin = ScopeOrigin.CONTINUATION
            i += 1
            continue
        active = False
        order = default_order
        origin = ScopeOrigin.NONE
        i += 1
    return ScopeState(active=active, type_order=order, origin=origin)


def suggest(
    note: NoteState,
    scope: ScopeState,
    prefix: str,
    ontology: Ontology,
    k: int = 5,
) -> list[Suggestion]:
    """Stacked per-type prefix filtering of the cached rankings."""
    if not scope.active:
        return []
    out: list[Suggestion] = []
    for ctype in scope.type_order:
        ranking = note.rankings.get(ctype)
        if ranking is None:
            continue
        matches = ontology.prefix_entry_map(prefix, ctype)
        if not matches:
            continue
        for eid in ranking.entries:
            syn = matches.get(eid)
            if syn is None:
                continue
            out.append(Suggestion(
                entry_id=eid,
                matched_synonym=syn,
                canonical_name=ontology.entries[eid].canonical_name,
                concept_type=ctype,
            ))
            if len(out) >= k:
                return out
    return out


def query(note: NoteState, lexicon: TriggerLexicon, ontology: Ontology,
          k: int = 5) -> tuple[ScopeState, list[Suggestion]]:
    """update_scope + suggest in one step, recording what was shown."""
    scope = update_scope(note, lexicon)
    start, prefix = typed_prefix(note.text, note.cursor)
    if prefix.startswith(lexicon.manual):
        prefix = prefix[len(lexicon.manual):]
    shown = suggest(note, scope, prefix, ontology, k=k)
    note.last_shown = shown
    note.last_prefix_span = (start, note.cursor)
    note.record("SUGGEST", prefix=prefix, shown=[s.entry_id for s in shown],
                active=scope.active)
    return scope, shown


class StaleSuggestionError(ValueError):
    pass


class TagOverlapError(ValueError):
    pass


def accept(note: NoteState, suggestion: Suggestion) -> NoteState:
    """Replace the typed prefix with the suggestion's synonym as a tagged span."""
    if suggestion not in note.last_shown:
        raise StaleSuggestionError("suggestion was not in the last shown list")
    start, end = note.last_prefix_span
    if end != note.cursor or end < start or end > len(note.text):
        raise StaleSuggestionError("note changed since the suggestion was shown")
    syn = suggestion.matched_synonym
    prefix_len = end - start
    note.text = note.text[:start] + syn + note.text[end:]
    delta = len(syn) - (end - start)
    note.cursor = start + len(syn)
    moved: list[TagSpan] = []
    for t in note.tags:
        if t.start >= end:
            moved.append(TagSpan(t.start + delta, t.end + delta,
                                 t.entry_id, t.concept_type, t.synonym))
        else:
            moved.append(t)
    moved.append(TagSpan(start, start + len(syn), suggestion.entry_id,
                         suggestion.concept_type, syn))
    moved.sort(key=lambda t: t.start)
    note.tags = moved
    note.last_shown = []
    note.record("ACCEPT", entry=suggestion.entry_id,
                typed_prefix_len=prefix_len, synonym=syn)
    return note


def retro_candidates(note: NoteState, ontology: Ontology) -> list[Mention]:
    """Full-synonym matches not already covered by a confirmed tag."""
    covered = [(t.start, t.end) for t in note.tags]

    def overlaps(m: Mention) -> bool:
        return any(m.start < e and s < m.end for s, e in covered)

    return [m for m in retroactive_candidates(note.text, ontology)
            if not overlaps(m)]


def retro_confirm(note: NoteState, mention: Mention, ontology: Ontology) -> NoteState:
    for t in note.tags:
        if mention.start < t.end and t.start < mention.end:
            raise TagOverlapError(
                f"candidate [{mention.start},{mention.end}) overlaps tag "
                f"[{t.start},{t.end})"
            )
    entry = ontology.entries[mention.entry_id]
    note.tags.append(TagSpan(mention.start, mention.end, mention.entry_id,
                             entry.concept_type, mention.matched_synonym))
    note.tags.sort(key=lambda t: t.start)
    note.record("RETRO_ACCEPT", entry=mention.entry_id,
                span=[mention.start, mention.end])
    return note
