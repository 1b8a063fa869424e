"""Training-matrix assembly from visit records.

Relevance labels come from the note itself: every concept mention extracted
from the finished note marks its bucket relevant, negated mentions included,
since the clinician typed those terms too and autocomplete should have
offered them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..extraction import NegationLexicon, extract_concepts
from ..features import (
    PatientContext,
    SparseVector,
    TfidfVocabulary,
    TriageVitals,
    delay_feature,
    ehr_presence_vector,
    encode_tfidf,
    fit_delay_rates,
    vital_state_key,
)
from ..features import PopulationStats
from ..ontology import ConceptType, Ontology


def condition_bucket_ids(ontology: Ontology) -> tuple[str, ...]:
    """Column order for condition models: bucket ids holding >= 1 condition."""
    ids = {e.bucket_id for e in ontology.entries_of_type(ConceptType.CONDITION)}
    return tuple(sorted(ids))


def stack_sparse(vectors: list[SparseVector], dim: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        indices.extend(vec.indices)
        data.extend(vec.weights)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


@dataclass
class ConditionDataset:
    """Aligned matrices for the condition rankers, one row per visit."""

    X_text: sparse.csr_matrix
    X_ehr: np.ndarray
    Y: np.ndarray
    delay_u: np.ndarray
    bucket_ids: tuple[str, ...]
    contexts: list[PatientContext]

    @property
    def n_buckets(self) -> int:
        return len(self.bucket_ids)


def build_condition_dataset(
    visits,
    ontology: Ontology,
    vocab: TfidfVocabulary,
    negation: NegationLexicon,
    delay_rates: dict[str, float] | None = None,
) -> ConditionDataset:
    bucket_ids = condition_bucket_ids(ontology)
    col = {b: j for j, b in enumerate(bucket_ids)}
    dense_cols = [ontology.buckets[b].bucket_index for b in bucket_ids]
    if delay_rates is None:
        delay_rates = fit_delay_rates([v.context for v in visits], ontology)

    texts, ehr_rows, y_rows, u_rows = [], [], [], []
    for visit in visits:
        ctx = visit.context
        texts.append(encode_tfidf(vocab, ctx.triage_text))
        ehr_rows.append(ehr_presence_vector(ctx, ontology)[dense_cols])
        y = np.zeros(len(bucket_ids))
        for m in extract_concepts(visit.note_text(), ontology, negation):
            entry = ontology.entries[m.entry_id]
            if entry.concept_type is ConceptType.CONDITION:
                y[col[entry.bucket_id]] = 1.0
        y_rows.append(y)
        u = np.zeros(len(bucket_ids))
        for j, b in enumerate(bucket_ids):
            u[j] = delay_feature(ctx, ontology.buckets[b], delay_rates[b])[0]
        u_rows.append(u)

    return ConditionDataset(
        X_text=stack_sparse(texts, vocab.size),
        X_ehr=np.stack(ehr_rows),
        Y=np.stack(y_rows),
        delay_u=np.stack(u_rows),
        bucket_ids=bucket_ids,
        contexts=[v.context for v in visits],
    )


def note_symptoms(visit, ontology: Ontology, negation: NegationLexicon) -> list[str]:
    """Symptom entry ids mentioned in the note, negated included, deduped."""
    out: list[str] = []
    seen: set[str] = set()
    for m in extract_concepts(visit.note_text(), ontology, negation):
        entry = ontology.entries[m.entry_id]
        if entry.concept_type is ConceptType.SYMPTOM and m.entry_id not in seen:
            seen.add(m.entry_id)
            out.append(m.entry_id)
    return out


def symptom_table_rows(
    visits, ontology: Ontology, stats: PopulationStats, negation: NegationLexicon
) -> list[tuple[str, str, list[str]]]:
    return [
        (v.context.chief_complaint, vital_state_key(v.context.vitals, stats),
         note_symptoms(v, ontology, negation))
        for v in visits
    ]


def symptom_feature_rows(
    visits, ontology: Ontology, negation: NegationLexicon
) -> list[tuple[str, TriageVitals, list[str]]]:
    return [
        (v.context.chief_complaint, v.context.vitals,
         note_symptoms(v, ontology, negation))
        for v in visits
    ]
