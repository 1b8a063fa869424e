"""Concept vocabulary: entries, synonyms, and the entry-to-bucket hierarchy.

An ontology file declares relevancy buckets and concept entries. Entries of
type CONDITION and SYMPTOM must name their bucket; LAB and MEDICATION
entries may omit it, in which case a singleton bucket is generated at load
time so every entry has a bucket and feature vectors stay uniform.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .text import normalize_term


class ConceptType(str, Enum):
    CONDITION = "CONDITION"
    SYMPTOM = "SYMPTOM"
    LAB = "LAB"
    MEDICATION = "MEDICATION"


CONCEPT_TYPES = (
    ConceptType.CONDITION,
    ConceptType.SYMPTOM,
    ConceptType.LAB,
    ConceptType.MEDICATION,
)


class OntologyError(ValueError):
    """An ontology file violates a structural invariant."""


@dataclass(frozen=True)
class ConceptEntry:
    entry_id: str
    canonical_name: str
    synonyms: tuple[str, ...]
    cui_set: frozenset[str]
    concept_type: ConceptType
    bucket_id: str
    empirical_frequency: int


@dataclass(frozen=True)
class RelevancyBucket:
    bucket_id: str
    name: str
    member_entry_ids: tuple[str, ...]
    bucket_index: int


class Ontology:
    """Immutable, fully indexed concept vocabulary.

    Safe to share across threads: every lookup is read-only.
    """

    def __init__(self, entries: dict[str, ConceptEntry], buckets: dict[str, RelevancyBucket]):
        self.entries = entries
        self.buckets = buckets
        self.bucket_count = len(buckets)
        # Sorted (synonym, entry_id) arrays, one per concept type plus one
        # combined, support prefix lookups via bisect on the range
        # [prefix, prefix + U+10FFFF).
        self._by_type: dict[ConceptType, list[tuple[str, str]]] = {t: [] for t in CONCEPT_TYPES}
        self._all: list[tuple[str, str]] = []
        for e in entries.values():
            for syn in e.synonyms:
                self._by_type[e.concept_type].append((syn, e.entry_id))
                self._all.append((syn, e.entry_id))
        for arr in self._by_type.values():
            arr.sort()
        self._all.sort()
        self._type_entries: dict[ConceptType, list[ConceptEntry]] = {
            t: [entries[eid] for eid in sorted(
                eid for eid, e in entries.items() if e.concept_type is t)]
            for t in CONCEPT_TYPES
        }

    def entries_of_type(self, concept_type: ConceptType) -> list[ConceptEntry]:
        return self._type_entries[concept_type]

    def buckets_in_order(self) -> list[RelevancyBucket]:
        """All buckets ordered by their dense index."""
        return sorted(self.buckets.values(), key=lambda b: b.bucket_index)

    def bucket_of(self, entry_id: str) -> int:
        """Dense index of the bucket owning ``entry_id``."""
        entry = self.entries.get(entry_id)
        if entry is None:
            raise KeyError(f"unknown entry: {entry_id}")
        return self.buckets[entry.bucket_id].bucket_index

    def _prefix_range(self, arr: list[tuple[str, str]], prefix: str) -> list[tuple[str, str]]:
        if not prefix:
            return arr
        lo = bisect.bisect_left(arr, (prefix, ""))
        hi = bisect.bisect_left(arr, (prefix + "\U0010ffff", ""))
        return arr[lo:hi]

    def prefix_entry_map(self, prefix: str, type_filter: ConceptType | None = None) -> dict[str, str]:
        """Map entry_id -> shortest matching synonym for a typed prefix.

        Ties between equally short synonyms break lexicographically.
        """
        arr = self._by_type[type_filter] if type_filter is not None else self._all
        best: dict[str, str] = {}
        for syn, eid in self._prefix_range(arr, prefix):
            cur = best.get(eid)
            if cur is None or (len(syn), syn) < (len(cur), cur):
                best[eid] = syn
        return best

    def lookup_prefix(
        self, prefix: str, type_filter: ConceptType | None = None
    ) -> list[tuple[str, str]]:
        """All (entry_id, matched_synonym) pairs whose synonym starts with prefix.

        Each entry appears once, represented by its shortest matching synonym.
        Output is ordered by empirical frequency descending, then entry id.
        """
        best = self.prefix_entry_map(prefix, type_filter)
        return sorted(
            best.items(),
            key=lambda kv: (-self.entries[kv[0]].empirical_frequency, kv[0]),
        )

    def serialize(self) -> str:
        """Canonical JSON: buckets and entries ordered by id ascending."""
        buckets = [
            {"id": b.bucket_id, "name": b.name}
            for b in sorted(self.buckets.values(), key=lambda b: b.bucket_id)
        ]
        entries = [
            {
                "id": e.entry_id,
                "name": e.canonical_name,
                "synonyms": list(e.synonyms),
                "cuis": sorted(e.cui_set),
                "type": e.concept_type.value,
                "bucket": e.bucket_id,
                "frequency": e.empirical_frequency,
            }
            for e in sorted(self.entries.values(), key=lambda e: e.entry_id)
        ]
        return json.dumps({"buckets": buckets, "entries": entries}, indent=1)


def _auto_bucket_id(entry_id: str) -> str:
    return f"auto:{entry_id}"


def build_ontology(raw: dict) -> Ontology:
    """Validate a parsed ontology document and index it."""
    declared: dict[str, str] = {}
    for b in raw.get("buckets", []):
        bid = b["id"]
        if bid in declared:
            raise OntologyError(f"duplicate bucket id: {bid}")
        declared[bid] = b.get("name", bid)

    entries: dict[str, ConceptEntry] = {}
    seen_synonyms: dict[tuple[ConceptType, str], str] = {}
    seen_cuis: dict[str, str] = {}
    members: dict[str, list[str]] = {bid: [] for bid in declared}

    for item in raw.get("entries", []):
        eid = item["id"]
        if eid in entries:
            raise OntologyError(f"duplicate entry id: {eid}")
        ctype = ConceptType(item["type"])
        name = item["name"]
        syns = [normalize_term(s) for s in item.get("synonyms", [])]
        syns = [s for s in syns if s]
        norm_name = normalize_term(name)
        if norm_name and norm_name not in syns:
            syns.append(norm_name)
        # Dedupe after normalization, preserving first occurrence.
        uniq: list[str] = []
        for s in syns:
            if s not in uniq:
                uniq.append(s)
        if not uniq:
            raise OntologyError(f"entry {eid} has no usable synonyms")
        cuis = frozenset(item.get("cuis", []))
        if not cuis:
            raise OntologyError(f"entry {eid} has an empty cui set")
        for cui in cuis:
            owner = seen_cuis.get(cui)
            if owner is not None:
                raise OntologyError(f"cui {cui} claimed by both {owner} and {eid}")
            seen_cuis[cui] = eid
        for s in uniq:
            key = (ctype, s)
            owner = seen_synonyms.get(key)
            if owner is not None:
                raise OntologyError(
                    f"synonym {s!r} claimed by two {ctype.value} entries: {owner} and {eid}"
                )
            seen_synonyms[key] = eid

        bucket_id = item.get("bucket")
        if bucket_id is None:
            if ctype in (ConceptType.CONDITION, ConceptType.SYMPTOM):
                raise OntologyError(f"{ctype.value} entry {eid} must declare a bucket")
            bucket_id = _auto_bucket_id(eid)
            if bucket_id not in declared:
                declared[bucket_id] = name
                members[bucket_id] = []
        elif bucket_id not in declared:
            raise OntologyError(f"entry {eid} references missing bucket {bucket_id}")

        freq = int(item.get("frequency", 0))
        if freq < 0:
            raise OntologyError(f"entry {eid} has negative frequency")
        members[bucket_id].append(eid)
        entries[eid] = ConceptEntry(
            entry_id=eid,
            canonical_name=name,
            synonyms=tuple(uniq),
            cui_set=cuis,
            concept_type=ctype,
            bucket_id=bucket_id,
            empirical_frequency=freq,
        )

    empty = sorted(bid for bid, m in members.items() if not m)
    if empty:
        raise OntologyError(f"buckets with no member entries: {', '.join(empty)}")

    buckets: dict[str, RelevancyBucket] = {}
    for idx, bid in enumerate(sorted(declared)):
        buckets[bid] = RelevancyBucket(
            bucket_id=bid,
            name=declared[bid],
            member_entry_ids=tuple(members[bid]),
            bucket_index=idx,
        )
    return Ontology(entries, buckets)


def load_ontology(path: str | Path) -> Ontology:
    """Load, validate, and index an ontology file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return build_ontology(raw)


def loads_ontology(text: str) -> Ontology:
    return build_ontology(json.loads(text))
