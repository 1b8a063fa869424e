"""Frequency rankers for labs and medications.

Entries already in the patient's structured history come first, ordered by
how often they were recorded for this patient; the rest follow by corpus
frequency. No model inference involved.
"""

from __future__ import annotations

from ..features import PatientContext
from ..ontology import ConceptType, Ontology
from .base import RankedList


def rank_frequency(
    concept_type: ConceptType, context: PatientContext, ontology: Ontology
) -> RankedList:
    if concept_type not in (ConceptType.LAB, ConceptType.MEDICATION):
        raise ValueError(f"frequency ranking covers labs and medications, not {concept_type}")
    counts = (context.lab_counts if concept_type is ConceptType.LAB
              else context.med_counts)
    entries = ontology.entries_of_type(concept_type)
    ordered = sorted(
        entries,
        key=lambda e: (
            -(1 if counts.get(e.entry_id, 0) > 0 else 0),
            -counts.get(e.entry_id, 0),
            -e.empirical_frequency,
            e.entry_id,
        ),
    )
    return RankedList.from_ordered(concept_type, [e.entry_id for e in ordered])


def rank_corpus_frequency(concept_type: ConceptType, ontology: Ontology) -> RankedList:
    """Context-free baseline: corpus frequency only."""
    entries = ontology.entries_of_type(concept_type)
    ordered = sorted(entries, key=lambda e: (-e.empirical_frequency, e.entry_id))
    return RankedList.from_ordered(concept_type, [e.entry_id for e in ordered])


def rank_alphabetical(concept_type: ConceptType, ontology: Ontology) -> RankedList:
    """Spell-check-style baseline: canonical name order."""
    entries = ontology.entries_of_type(concept_type)
    ordered = sorted(entries, key=lambda e: (e.canonical_name, e.entry_id))
    return RankedList.from_ordered(concept_type, [e.entry_id for e in ordered])
