"""Retrospective evaluation: ranking metrics, keystroke replay, strata.

The MRR here is the shifted-rank form: each ground-truth hit at 1-indexed
position i contributes 1/max(1, i - |T|), so a ranking whose top |T| slots
are exactly the truth set scores 1. The standard reciprocal rank of the
first hit is reported alongside as a labeled secondary metric, not mixed in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .extraction import NegationLexicon, extract_concepts
from .features import PatientContext
from .ontology import CONCEPT_TYPES, ConceptType, Ontology
from .ranking.base import RankedList
from .session import (NoteState, Suggestion, TriggerLexicon, accept,
                      locate_section, query)

POLICY_WINDOW = {"top1": 1, "top3": 3, "top5": 5}


def mrr(ranking: Sequence[str], truth: Iterable[str]) -> float:
    t = set(truth)
    if not t:
        raise ValueError("truth set must be nonempty")
    total = 0.0
    for i, entry in enumerate(ranking, start=1):
        if entry in t:
            total += 1.0 / max(1, i - len(t))
    return total / len(t)


def map_score(ranking: Sequence[str], truth: Iterable[str]) -> float:
    t = set(truth)
    if not t:
        raise ValueError("truth set must be nonempty")
    hits = 0
    total = 0.0
    for i, entry in enumerate(ranking, start=1):
        if entry in t:
            hits += 1
            total += hits / i
    return total / len(t)


def rr_first_hit(ranking: Sequence[str], truth: Iterable[str]) -> float:
    t = set(truth)
    for i, entry in enumerate(ranking, start=1):
        if entry in t:
            return 1.0 / i
    return 0.0


def mean_ci(values: Sequence[float]) -> tuple[float, float, int]:
    """(mean, 95% CI half-width of the mean, n)."""
    n = len(values)
    if n == 0:
        return float("nan"), float("nan"), 0
    m = float(np.mean(values))
    if n == 1:
        return m, float("nan"), 1
    half = 1.96 * float(np.std(values, ddof=1)) / math.sqrt(n)
    return m, half, n


def bootstrap_gap_ci(
    per_note_a: Sequence[float], per_note_b: Sequence[float],
    n_boot: int = 2000, seed: int = 0,
) -> tuple[float, float, float]:
    """Paired bootstrap for mean(a) - mean(b): (point, ci_low, ci_high)."""
    a = np.asarray(per_note_a, dtype=float)
    b = np.asarray(per_note_b, dtype=float)
    if a.shape != b.shape or len(a) == 0:
        raise ValueError("paired samples must be nonempty and aligned")
    point = float(a.mean() - b.mean())
    rng = np.random.default_rng(seed)
    n = len(a)
    idx = rng.integers(0, n, size=(n_boot, n))
    gaps = (a[idx] - b[idx]).mean(axis=1)
    lo, hi = np.percentile(gaps, [2.5, 97.5])
    return point, float(lo), float(hi)


# ---------------------------------------------------------------------------
# Records.


@dataclass(frozen=True)
class GroundTruthTerm:
    entry_id: str
    concept_type: ConceptType
    synonym: str
    section: str
    start: int
    end: int


@dataclass(frozen=True)
class EvalRecord:
    context: PatientContext
    note_text: str
    terms: tuple[GroundTruthTerm, ...]

    def truth_by_type(self) -> dict[ConceptType, list[str]]:
        out: dict[ConceptType, list[str]] = {t: [] for t in CONCEPT_TYPES}
        for term in self.terms:
            bucket = out[term.concept_type]
            if term.entry_id not in bucket:
                bucket.append(term.entry_id)
        return out


def build_record(
    context: PatientContext, note_text: str,
    ontology: Ontology, lexicon: NegationLexicon,
) -> EvalRecord:
    mentions = extract_concepts(note_text, ontology, lexicon)
    terms = []
    for m in mentions:
        section, _ = locate_section(note_text, m.start)
        entry = ontology.entries[m.entry_id]
        terms.append(GroundTruthTerm(
            entry_id=m.entry_id, concept_type=entry.concept_type,
            synonym=m.matched_synonym, section=section.value,
            start=m.start, end=m.end,
        ))
    return EvalRecord(context=context, note_text=note_text, terms=tuple(terms))


class Engine(Protocol):
    def rank_all(self, context: PatientContext) -> dict[ConceptType, RankedList]: ...


# ---------------------------------------------------------------------------
# Keystroke replay.


@dataclass
class TermReplay:
    entry_id: str
    concept_type: str
    section: str
    synonym: str
    burden: int
    baseline: int
    autocompleted: bool
    scope_active_at_start: bool
    scope_type_correct: bool


def replay_note(
    record: EvalRecord,
    rankings: dict[ConceptType, RankedList],
    ontology: Ontology,
    lexicon: TriggerLexicon,
    policy: str = "top5",
    k: int = 5,
) -> list[TermReplay]:
    """Character-level simulation of typing the note against cached rankings.

    For each ground-truth term: literal text up to the term is placed as-is,
    then the term's source synonym is typed one character at a time with a
    suggest query after every keystroke (and once before the first). The
    policy accepts as soon as the target entry is inside its window; the
    acceptance itself costs one keystroke. A term never surfaced costs its
    full synonym length and is flagged as not autocompleted.
    """
    window = POLICY_WINDOW[policy]
    note = NoteState(rankings=rankings)
    out: list[TermReplay] = []
    src = record.note_text
    pos = 0
    for term in record.terms:
        gap = src[pos:term.start]
        note.text += gap
        note.cursor = len(note.text)
        syn = term.synonym
        burden: int | None = None
        accepted = False
        scope_at_start = False
        type_correct = False
        for j in range(len(syn)):
            note.cursor = len(note.text)
            scope, shown = query(note, lexicon, ontology, k=k)
            if j == 0:
                scope_at_start = scope.active
                type_correct = bool(scope.active
                                    and scope.type_order[0] is term.concept_type)
            visible = shown[:window]
            hit = next((s for s in visible if s.entry_id == term.entry_id), None)
            if hit is not None:
                # Insert the source synonym so the built text tracks the note.
                forced = Suggestion(
                    entry_id=hit.entry_id, matched_synonym=syn,
                    canonical_name=hit.canonical_name,
                    concept_type=hit.concept_type,
                )
                note.last_shown = [forced]
                accept(note, forced)
                burden = j + 1
                accepted = True
                break
            note.text += syn[j]
            note.cursor = len(note.text)
        if burden is None:
            burden = len(syn)
        out.append(TermReplay(
            entry_id=term.entry_id, concept_type=term.concept_type.value,
            section=term.section, synonym=syn, burden=burden,
            baseline=len(syn), autocompleted=accepted,
            scope_active_at_start=scope_at_start,
            scope_type_correct=type_correct,
        ))
        pos = term.end
    return out


# ---------------------------------------------------------------------------
# Corpus-level report.


@dataclass
class MetricReport:
    per_engine: dict = field(default_factory=dict)
    burden: dict = field(default_factory=dict)
    scope: dict = field(default_factory=dict)
    strata: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"per_engine": self.per_engine, "burden": self.burden,
                "scope": self.scope, "strata": self.strata, "counts": self.counts}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")


def _frequency_terciles(ontology: Ontology) -> dict[str, int]:
    """entry_id -> tercile (0 low, 1 mid, 2 high) within its concept type."""
    out: dict[str, int] = {}
    for ctype in CONCEPT_TYPES:
        entries = sorted(ontology.entries_of_type(ctype),
                         key=lambda e: (e.empirical_frequency, e.entry_id))
        n = len(entries)
        for i, e in enumerate(entries):
            out[e.entry_id] = min(2, 3 * i // max(1, n))
    return out


def _ehr_class(record: EvalRecord, entry_id: str) -> str:
    if not record.context.has_history:
        return "NO_HISTORY"
    return "MENTIONED" if entry_id in record.context.ehr_mentions else "NOT_MENTIONED"


def per_record_metrics(
    records: Sequence[EvalRecord],
    engine: Engine,
) -> dict[ConceptType, dict[str, list[float]]]:
    """Per-record mrr/map/rr lists per concept type (records without truth skip)."""
    out: dict[ConceptType, dict[str, list[float]]] = {
        t: {"mrr": [], "map": [], "rr": []} for t in CONCEPT_TYPES
    }
    for record in records:
        rankings = engine.rank_all(record.context)
        truth = record.truth_by_type()
        for ctype in CONCEPT_TYPES:
            t = truth[ctype]
            if not t:
                continue
            r = rankings[ctype].entries
            out[ctype]["mrr"].append(mrr(r, t))
            out[ctype]["map"].append(map_score(r, t))
            out[ctype]["rr"].append(rr_first_hit(r, t))
    return out


def evaluate_corpus(
    records: Sequence[EvalRecord],
    engines: dict[str, Engine],
    ontology: Ontology,
    trigger_lexicon: TriggerLexicon | None = None,
    policy: str = "top5",
    replay_engine: str | None = None,
) -> MetricReport:
    if not records:
        raise ValueError("records must be nonempty")
    report = MetricReport()
    terciles = _frequency_terciles(ontology)

    for name, engine in engines.items():
        per_type = per_record_metrics(records, engine)
        stats: dict = {}
        all_mrr: list[float] = []
        all_map: list[float] = []
        for ctype in CONCEPT_TYPES:
            vals = per_type[ctype]
            if not vals["mrr"]:
                continue
            m, ci, n = mean_ci(vals["mrr"])
            a, cia, _ = mean_ci(vals["map"])
            r, cir, _ = mean_ci(vals["rr"])
            stats[ctype.value] = {
                "mrr": m, "mrr_ci": ci, "map": a, "map_ci": cia,
                "rr_first_hit": r, "rr_first_hit_ci": cir, "n_notes": n,
            }
            all_mrr.extend(vals["mrr"])
            all_map.extend(vals["map"])
        om, oci, on = mean_ci(all_mrr)
        oa, ocia, _ = mean_ci(all_map)
        stats["overall"] = {"mrr": om, "mrr_ci": oci, "map": oa, "map_ci": ocia,
                            "n": on}
        report.per_engine[name] = stats

    # EHR-presence x frequency-tercile strata, per engine, conditions focus.
    for name, engine in engines.items():
        strata: dict[str, dict[str, list[float]]] = {}
        for record in records:
            rankings = engine.rank_all(record.context)
            truth = record.truth_by_type()
            for ctype in CONCEPT_TYPES:
                t = truth[ctype]
                if not t:
                    continue
                r = rankings[ctype].entries
                groups: dict[str, list[str]] = {}
                for eid in t:
                    key = f"{_ehr_class(record, eid)}|tercile{terciles.get(eid, 1)}"
                    groups.setdefault(key, []).append(eid)
                for key, subset in groups.items():
                    strata.setdefault(f"{ctype.value}|{key}", {}).setdefault(
                        "mrr", []).append(mrr(r, subset))
        report.strata[name] = {
            key: dict(zip(("mrr", "mrr_ci", "n"), mean_ci(vals["mrr"])))
            for key, vals in sorted(strata.items())
        }

    if replay_engine is not None:
        if trigger_lexicon is None:
            raise ValueError("replay requires a trigger lexicon")
        engine = engines[replay_engine]
        all_terms: list[TermReplay] = []
        for record in records:
            rankings = engine.rank_all(record.context)
            all_terms.extend(replay_note(record, rankings, ontology,
                                         trigger_lexicon, policy=policy))
        if all_terms:
            burdens = [t.burden for t in all_terms]
            baselines = [t.baseline for t in all_terms]
            by_section: dict[str, list[int]] = {}
            for t in all_terms:
                by_section.setdefault(t.section, []).append(t.burden)
            report.burden = {
                "policy": policy,
                "engine": replay_engine,
                "mean": float(np.mean(burdens)),
                "baseline_mean": float(np.mean(baselines)),
                "reduction": 1.0 - float(np.mean(burdens)) / float(np.mean(baselines)),
                "dominated": all(t.burden <= t.baseline for t in all_terms),
                "n_terms": len(all_terms),
                "by_section": {
                    s: {"mean": float(np.mean(v)), "n": len(v)}
                    for s, v in sorted(by_section.items())
                },
            }
            auto = [t for t in all_terms if t.scope_active_at_start]
            report.scope = {
                "fraction_auto_triggered": len(auto) / len(all_terms),
                "fraction_correct_type": (
                    sum(t.scope_type_correct for t in auto) / len(auto)
                    if auto else float("nan")
                ),
                "n_terms": len(all_terms),
            }

    report.counts = {"records": len(records), "engines": sorted(engines)}
    return report
