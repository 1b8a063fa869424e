"""Shared ranking artifacts: ranked lists and the condition term ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import PatientContext
from ..ontology import ConceptType, Ontology


@dataclass(frozen=True)
class RankedList:
    concept_type: ConceptType
    entries: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.entries) != len(self.scores):
            raise ValueError("entries and scores must align")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("duplicate entries in ranking")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError("scores must be nonincreasing")

    @classmethod
    def from_ordered(cls, concept_type: ConceptType, entry_ids: list[str]) -> "RankedList":
        # Ordinal scores: position carries the information, not magnitude.
        return cls(
            concept_type=concept_type,
            entries=tuple(entry_ids),
            scores=tuple(1.0 / (1 + i) for i in range(len(entry_ids))),
        )

    def position(self, entry_id: str) -> int | None:
        try:
            return self.entries.index(entry_id)
        except ValueError:
            return None


def rank_buckets(scores: np.ndarray) -> list[tuple[int, float]]:
    """Bucket indices sorted by score descending, ties by index ascending."""
    order = sorted(range(len(scores)), key=lambda b: (-scores[b], b))
    return [(b, float(scores[b])) for b in order]


def rank_condition_terms(
    bucket_ranking: list[tuple[str, float]],
    context: PatientContext,
    ontology: Ontology,
) -> RankedList:
    """All CONDITION entries under the lexicographic key:

    (appears in EHR desc, bucket rank asc, empirical frequency desc, id asc).

    bucket_ranking holds (bucket id, score) pairs, best first, covering every
    bucket that contains a condition entry.
    """
    bucket_rank = {b: r for r, (b, _) in enumerate(bucket_ranking)}
    in_ehr = set(context.ehr_mentions)
    entries = ontology.entries_of_type(ConceptType.CONDITION)
    missing = {e.bucket_id for e in entries} - set(bucket_rank)
    if missing:
        raise ValueError(f"bucket ranking lacks condition buckets: {sorted(missing)}")
    ordered = sorted(
        entries,
        key=lambda e: (
            -(1 if e.entry_id in in_ehr else 0),
            bucket_rank[e.bucket_id],
            -e.empirical_frequency,
            e.entry_id,
        ),
    )
    return RankedList.from_ordered(ConceptType.CONDITION, [e.entry_id for e in ordered])
