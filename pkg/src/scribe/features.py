"""Model covariates derived from raw patient inputs.

Covers the TF-IDF triage encoder, EHR bucket-presence vectors, vital
categorization against fixed clinical cutoffs, most-abnormal-vital selection
by percentile deviation, and the recency (delay) feature.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .ontology import Ontology, RelevancyBucket
from .text import word_tokens

# Fixed tie-break order; also the iteration order everywhere vitals are walked.
VITAL_ORDER: tuple[str, ...] = (
    "temperature_f",
    "heart_rate_bpm",
    "resp_rate_bpm",
    "spo2_pct",
    "systolic_mmhg",
    "diastolic_mmhg",
    "age_years",
)

NO_VITAL: tuple[str, str] = ("NONE", "NONE")


@dataclass(frozen=True)
class TriageVitals:
    temperature_f: float | None = None
    heart_rate_bpm: float | None = None
    resp_rate_bpm: float | None = None
    spo2_pct: float | None = None
    systolic_mmhg: float | None = None
    diastolic_mmhg: float | None = None
    age_years: float | None = None

    def __post_init__(self) -> None:
        for name in VITAL_ORDER:
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"vital {name} must be finite and positive, got {v!r}")

    def present(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in VITAL_ORDER if getattr(self, n) is not None}

    def to_json(self) -> dict[str, float]:
        return self.present()

    @classmethod
    def from_json(cls, raw: Mapping[str, float]) -> "TriageVitals":
        return cls(**{n: raw[n] for n in VITAL_ORDER if raw.get(n) is not None})


@dataclass(frozen=True)
class PatientContext:
    patient_id: str
    triage_text: str
    chief_complaint: str
    vitals: TriageVitals
    ehr_mentions: dict[str, float] = field(default_factory=dict)
    has_history: bool = False
    lab_counts: dict[str, int] = field(default_factory=dict)
    med_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for eid, age in self.ehr_mentions.items():
            if age < 0:
                raise ValueError(f"mention age for {eid} must be >= 0, got {age}")
        if self.ehr_mentions and not self.has_history:
            raise ValueError("nonempty ehr_mentions requires has_history")

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "triage_text": self.triage_text,
            "chief_complaint": self.chief_complaint,
            "vitals": self.vitals.to_json(),
            "ehr": [
                {"entry": e, "age_days": a} for e, a in sorted(self.ehr_mentions.items())
            ],
            "has_history": self.has_history,
            "labs": [{"entry": e, "count": c} for e, c in sorted(self.lab_counts.items())],
            "meds": [{"entry": e, "count": c} for e, c in sorted(self.med_counts.items())],
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "PatientContext":
        ehr = {m["entry"]: float(m["age_days"]) for m in raw.get("ehr", [])}
        return cls(
            patient_id=str(raw["patient_id"]),
            triage_text=raw["triage_text"],
            chief_complaint=raw["chief_complaint"],
            vitals=TriageVitals.from_json(raw.get("vitals", {})),
            ehr_mentions=ehr,
            has_history=bool(raw.get("has_history", bool(ehr))),
            lab_counts={m["entry"]: int(m["count"]) for m in raw.get("labs", [])},
            med_counts={m["entry"]: int(m["count"]) for m in raw.get("meds", [])},
        )


def make_context(
    patient_id: str,
    triage_text: str,
    chief_complaint: str,
    vitals: TriageVitals,
    ehr_mentions: dict[str, float] | None = None,
    prior_record: bool = False,
    lab_counts: dict[str, int] | None = None,
    med_counts: dict[str, int] | None = None,
) -> PatientContext:
    ehr = dict(ehr_mentions or {})
    return PatientContext(
        patient_id=patient_id,
        triage_text=triage_text,
        chief_complaint=chief_complaint,
        vitals=vitals,
        ehr_mentions=ehr,
        has_history=bool(ehr) or prior_record,
        lab_counts=dict(lab_counts or {}),
        med_counts=dict(med_counts or {}),
    )


# ---------------------------------------------------------------------------
# TF-IDF over unigrams and bigrams.


def _terms(text: str) -> list[str]:
    words = word_tokens(text)
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


@dataclass(frozen=True)
class TfidfVocabulary:
    index: dict[str, int]
    idf: np.ndarray
    doc_freq: dict[str, int]
    n_docs: int
    min_df: int

    @property
    def size(self) -> int:
        return len(self.index)

    def feature_names(self) -> list[str]:
        names = [""] * len(self.index)
        for tok, i in self.index.items():
            names[i] = tok
        return names

    def to_json(self) -> dict:
        return {
            "tokens": self.feature_names(),
            "doc_freq": [self.doc_freq[t] for t in self.feature_names()],
            "n_docs": self.n_docs,
            "min_df": self.min_df,
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "TfidfVocabulary":
        tokens = list(raw["tokens"])
        dfs = list(raw["doc_freq"])
        n = int(raw["n_docs"])
        index = {t: i for i, t in enumerate(tokens)}
        idf = np.array([math.log((1 + n) / (1 + df)) + 1.0 for df in dfs])
        return cls(index=index, idf=idf, doc_freq=dict(zip(tokens, dfs)),
                   n_docs=n, min_df=int(raw["min_df"]))


def fit_tfidf(corpus: list[str], min_df: int = 2) -> TfidfVocabulary:
    """Unigram+bigram vocabulary with smooth idf: ln((1+N)/(1+df))+1."""
    if not corpus:
        raise ValueError("corpus must be nonempty")
    df: dict[str, int] = {}
    for doc in corpus:
        for term in set(_terms(doc)):
            df[term] = df.get(term, 0) + 1
    kept = sorted(t for t, c in df.items() if c >= min_df)
    n = len(corpus)
    index = {t: i for i, t in enumerate(kept)}
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in kept])
    return TfidfVocabulary(index=index, idf=idf,
                           doc_freq={t: df[t] for t in kept}, n_docs=n, min_df=min_df)


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")

    def as_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        if self.indices:
            out[list(self.indices)] = self.weights
        return out

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights))


def encode_tfidf(vocab: TfidfVocabulary, text: str) -> SparseVector:
    """tf·idf over in-vocab terms, L2-normalized; all-OOV text → zero vector."""
    counts: dict[int, int] = {}
    for term in _terms(text):
        i = vocab.index.get(term)
        if i is not None:
            counts[i] = counts.get(i, 0) + 1
    if not counts:
        return SparseVector(indices=(), weights=())
    items = sorted(counts.items())
    raw = [tf * vocab.idf[i] for i, tf in items]
    norm = math.sqrt(sum(w * w for w in raw))
    return SparseVector(
        indices=tuple(i for i, _ in items),
        weights=tuple(w / norm for w in raw),
    )


# ---------------------------------------------------------------------------
# Vital categorization. Cutoffs are strict per their clinical wording:
# "above 100.4" means 100.4 itself is NORMAL.

AGE_LABELS = ("CHILD", "18-33", "34-48", "48-64", "64-77", "78+")


def _bp_class(sys_v: float | None, dia_v: float | None) -> str:
    def below(v: float | None, cut: float) -> bool:
        return v is None or v < cut

    if below(sys_v, 120) and below(dia_v, 80):
        return "NORMAL"
    if below(sys_v, 130) and below(dia_v, 80):
        return "ELEVATED"
    if below(sys_v, 140) and below(dia_v, 90):
        return "STAGE_1"
    return "STAGE_2"


def bucketize_vital(name: str, value) -> str:
    if name == "temperature_f":
        return "HIGH" if value > 100.4 else "LOW" if value < 97 else "NORMAL"
    if name == "heart_rate_bpm":
        return ("TACHYCARDIC" if value > 100
                else "BRADYCARDIC" if value < 60 else "NORMAL")
    if name == "resp_rate_bpm":
        return "HIGH" if value > 20 else "LOW" if value < 12 else "NORMAL"
    if name == "spo2_pct":
        return "LOW" if value < 95 else "NORMAL"
    if name == "age_years":
        if value < 18:
            return AGE_LABELS[0]
        for lo, hi, label in ((18, 34, 1), (34, 48, 2), (48, 64, 3), (64, 78, 4)):
            if lo <= value < hi:
                return AGE_LABELS[label]
        return AGE_LABELS[5]
    if name == "bp":
        sys_v, dia_v = value
        return _bp_class(sys_v, dia_v)
    if name == "systolic_mmhg":
        return _bp_class(value, None)
    if name == "diastolic_mmhg":
        return _bp_class(None, value)
    raise KeyError(f"unknown vital {name!r}")


def categorical_vitals(vitals: TriageVitals) -> dict[str, str]:
    """One categorical state per vital (BP as a pair), MISSING when absent."""
    out: dict[str, str] = {}
    for name in ("temperature_f", "heart_rate_bpm", "resp_rate_bpm", "spo2_pct",
                 "age_years"):
        v = getattr(vitals, name)
        out[name] = "MISSING" if v is None else bucketize_vital(name, v)
    if vitals.systolic_mmhg is None and vitals.diastolic_mmhg is None:
        out["bp"] = "MISSING"
    else:
        out["bp"] = _bp_class(vitals.systolic_mmhg, vitals.diastolic_mmhg)
    return out


# ---------------------------------------------------------------------------
# Population percentiles and most-abnormal-vital selection.


@dataclass(frozen=True)
class PopulationStats:
    samples: dict[str, list[float]]  # sorted per vital

    def percentile(self, name: str, value: float) -> float:
        arr = self.samples[name]
        lo = bisect.bisect_left(arr, value)
        hi = bisect.bisect_right(arr, value)
        return (lo + hi) / (2 * len(arr))

    def to_json(self) -> dict:
        return {"samples": self.samples}

    @classmethod
    def from_json(cls, raw: Mapping) -> "PopulationStats":
        return cls(samples={k: sorted(map(float, v)) for k, v in raw["samples"].items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PopulationStats":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_population_stats(all_vitals: list[TriageVitals]) -> PopulationStats:
    samples: dict[str, list[float]] = {n: [] for n in VITAL_ORDER}
    for v in all_vitals:
        for name, value in v.present().items():
            samples[name].append(value)
    return PopulationStats(samples={n: sorted(vs) for n, vs in samples.items() if vs})


def most_abnormal_vital(vitals: TriageVitals, stats: PopulationStats) -> tuple[str, str]:
    """(vital name, bucket label) for the largest |percentile − 0.5|.

    Ties keep the earliest vital in VITAL_ORDER; all vitals missing → NO_VITAL.
    Systolic/diastolic winners are labeled with the full BP class.
    """
    best_name: str | None = None
    best_dev = -1.0
    for name in VITAL_ORDER:
        value = getattr(vitals, name)
        if value is None or name not in stats.samples:
            continue
        dev = abs(stats.percentile(name, value) - 0.5)
        if dev > best_dev:
            best_name, best_dev = name, dev
    if best_name is None:
        return NO_VITAL
    if best_name in ("systolic_mmhg", "diastolic_mmhg"):
        label = _bp_class(vitals.systolic_mmhg, vitals.diastolic_mmhg)
    else:
        label = bucketize_vital(best_name, getattr(vitals, best_name))
    return best_name, label


def vital_state_key(vitals: TriageVitals, stats: PopulationStats) -> str:
    """Stable string key for the most-abnormal-vital state, e.g. 'spo2_pct:LOW'."""
    name, label = most_abnormal_vital(vitals, stats)
    if (name, label) == NO_VITAL:
        return "NONE"
    return f"{name}:{label}"


# ---------------------------------------------------------------------------
# EHR presence and recency features.


def ehr_presence_vector(context: PatientContext, ontology: Ontology) -> np.ndarray:
    out = np.zeros(ontology.bucket_count)
    for entry_id in context.ehr_mentions:
        entry = ontology.entries.get(entry_id)
        if entry is not None:
            out[ontology.bucket_of(entry_id)] = 1.0
    return out


def delay_feature(
    context: PatientContext, bucket: RelevancyBucket, lambda_b: float
) -> tuple[float, float]:
    """(u, absent_indicator): u = 1 − exp(−λ_b·d) for the freshest mention.

    Absent bucket → (0, 1). u is monotone in d and bounded in [0, 1).
    """
    if lambda_b <= 0:
        raise ValueError("lambda_b must be positive")
    ages = [context.ehr_mentions[e] for e in bucket.member_entry_ids
            if e in context.ehr_mentions]
    if not ages:
        return 0.0, 1.0
    d = min(ages)
    if d < 0:
        raise ValueError("mention age must be >= 0")
    return 1.0 - math.exp(-lambda_b * d), 0.0


def fit_delay_rates(
    contexts: list[PatientContext], ontology: Ontology, default_rate: float = 1 / 30
) -> dict[str, float]:
    """λ_b = 1/mean(min mention age) per bucket; unseen buckets get the default."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for ctx in contexts:
        per_bucket: dict[str, float] = {}
        for eid, age in ctx.ehr_mentions.items():
            entry = ontology.entries.get(eid)
            if entry is None:
                continue
            b = entry.bucket_id
            per_bucket[b] = min(per_bucket.get(b, math.inf), age)
        for b, d in per_bucket.items():
            sums[b] = sums.get(b, 0.0) + d
            counts[b] = counts.get(b, 0) + 1
    rates: dict[str, float] = {}
    for b in ontology.buckets:
        if counts.get(b):
            mean = sums[b] / counts[b]
            rates[b] = 1.0 / mean if mean > 0 else 1.0
        else:
            rates[b] = default_rate
    return rates
