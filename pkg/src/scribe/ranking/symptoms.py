"""Symptom rankers: smoothed empirical tables, one-vs-rest LR, Naive Bayes.

The empirical schemes estimate P(symptom | chief complaint) and
P(symptom | chief complaint, most-abnormal-vital state) directly from
co-occurrence counts with add-alpha smoothing, backing off
(complaint, vital) -> complaint -> global when a conditioning cell was
never observed. The learned models consume one-hot complaint plus
categorical vital features and rank by per-symptom probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..features import (PatientContext, PopulationStats, TriageVitals,
                        categorical_vitals, vital_state_key)
from ..ontology import ConceptType, Ontology
from .base import RankedList

VITAL_FEATURES = ("temperature_f", "heart_rate_bpm", "resp_rate_bpm",
                  "spo2_pct", "age_years", "bp")


@dataclass
class SymptomTable:
    symptom_ids: tuple[str, ...]
    counts_cv: dict[str, dict[str, int]]   # key "complaint||vitalkey"
    counts_c: dict[str, dict[str, int]]
    counts_global: dict[str, int]
    alpha: float = 1.0

    def _scores(self, counts: dict[str, int]) -> list[tuple[str, float]]:
        total = sum(counts.values())
        denom = total + self.alpha * len(self.symptom_ids)
        return [(s, (counts.get(s, 0) + self.alpha) / denom) for s in self.symptom_ids]

    def rank_given(self, complaint: str, vital_key: str | None) -> RankedList:
        if vital_key is not None:
            cell = self.counts_cv.get(f"{complaint}||{vital_key}")
            if cell is None:
                cell = self.counts_c.get(complaint, self.counts_global)
        else:
            cell = self.counts_c.get(complaint, self.counts_global)
        scored = self._scores(cell)
        scored.sort(key=lambda kv: (-kv[1], kv[0]))
        return RankedList(
            concept_type=ConceptType.SYMPTOM,
            entries=tuple(s for s, _ in scored),
            scores=tuple(p for _, p in scored),
        )

    def to_json(self) -> dict:
        return {"symptom_ids": list(self.symptom_ids), "counts_cv": self.counts_cv,
                "counts_c": self.counts_c, "counts_global": self.counts_global,
                "alpha": self.alpha}

    @classmethod
    def from_json(cls, raw: dict) -> "SymptomTable":
        return cls(symptom_ids=tuple(raw["symptom_ids"]),
                   counts_cv={k: dict(v) for k, v in raw["counts_cv"].items()},
                   counts_c={k: dict(v) for k, v in raw["counts_c"].items()},
                   counts_global=dict(raw["counts_global"]),
                   alpha=raw.get("alpha", 1.0))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SymptomTable":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_symptom_table(
    rows: list[tuple[str, str, list[str]]],
    ontology: Ontology,
    alpha: float = 1.0,
) -> SymptomTable:
    """rows = (chief complaint, vital state key, symptom entry ids in the note)."""
    symptom_ids = tuple(e.entry_id for e in ontology.entries_of_type(ConceptType.SYMPTOM))
    known = set(symptom_ids)
    counts_cv: dict[str, dict[str, int]] = {}
    counts_c: dict[str, dict[str, int]] = {}
    counts_global: dict[str, int] = {}
    for complaint, vkey, symptoms in rows:
        cv = counts_cv.setdefault(f"{complaint}||{vkey}", {})
        cc = counts_c.setdefault(complaint, {})
        for s in set(symptoms):
            if s not in known:
                continue
            cv[s] = cv.get(s, 0) + 1
            cc[s] = cc.get(s, 0) + 1
            counts_global[s] = counts_global.get(s, 0) + 1
    return SymptomTable(symptom_ids=symptom_ids, counts_cv=counts_cv,
                        counts_c=counts_c, counts_global=counts_global, alpha=alpha)


def rank_symptoms(
    table: SymptomTable,
    chief_complaint: str,
    vitals: TriageVitals,
    stats: PopulationStats,
) -> RankedList:
    """Scheme conditioned on complaint and the most abnormal vital's state."""
    return table.rank_given(chief_complaint, vital_state_key(vitals, stats))


def rank_symptoms_complaint_only(table: SymptomTable, chief_complaint: str) -> RankedList:
    return table.rank_given(chief_complaint, None)


# ---------------------------------------------------------------------------
# Learned models over one-hot complaint + categorical vitals.


def symptom_feature_names(complaints: list[str]) -> list[str]:
    names = [f"complaint={c}" for c in sorted(complaints)]
    labels = {
        "temperature_f": ("HIGH", "LOW", "NORMAL", "MISSING"),
        "heart_rate_bpm": ("TACHYCARDIC", "BRADYCARDIC", "NORMAL", "MISSING"),
        "resp_rate_bpm": ("HIGH", "LOW", "NORMAL", "MISSING"),
        "spo2_pct": ("LOW", "NORMAL", "MISSING"),
        "age_years": ("CHILD", "18-33", "34-48", "48-64", "64-77", "78+", "MISSING"),
        "bp": ("NORMAL", "ELEVATED", "STAGE_1", "STAGE_2", "MISSING"),
    }
    for vital in VITAL_FEATURES:
        names.extend(f"{vital}={lab}" for lab in labels[vital])
    return names


def encode_symptom_features(
    complaint: str, vitals: TriageVitals, feature_index: dict[str, int]
) -> np.ndarray:
    x = np.zeros(len(feature_index))
    i = feature_index.get(f"complaint={complaint}")
    if i is not None:
        x[i] = 1.0
    for vital, label in categorical_vitals(vitals).items():
        j = feature_index.get(f"{vital}={label}")
        if j is not None:
            x[j] = 1.0
    return x


@dataclass
class SymptomLrModel:
    symptom_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    weights: np.ndarray   # S x d
    biases: np.ndarray    # S
    feature_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.feature_index:
            self.feature_index = {n: i for i, n in enumerate(self.feature_names)}

    def rank(self, complaint: str, vitals: TriageVitals) -> RankedList:
        x = encode_symptom_features(complaint, vitals, self.feature_index)
        z = self.weights @ x + self.biases
        p = 1.0 / (1.0 + np.exp(-z))
        order = sorted(range(len(self.symptom_ids)), key=lambda i: (-p[i], self.symptom_ids[i]))
        return RankedList(
            concept_type=ConceptType.SYMPTOM,
            entries=tuple(self.symptom_ids[i] for i in order),
            scores=tuple(float(p[i]) for i in order),
        )

    def to_json(self) -> dict:
        return {"symptom_ids": list(self.symptom_ids),
                "feature_names": list(self.feature_names),
                "weights": self.weights.tolist(), "biases": self.biases.tolist()}

    @classmethod
    def from_json(cls, raw: dict) -> "SymptomLrModel":
        return cls(symptom_ids=tuple(raw["symptom_ids"]),
                   feature_names=tuple(raw["feature_names"]),
                   weights=np.array(raw["weights"]), biases=np.array(raw["biases"]))


def train_symptom_lr(
    rows: list[tuple[str, TriageVitals, list[str]]],
    ontology: Ontology,
    complaints: list[str],
    iterations: int = 60,
    learning_rate: float = 0.3,
    l2: float = 1e-2,
) -> SymptomLrModel:
    """One-vs-rest LR per symptom; deliberately modest fit budget."""
    symptom_ids = tuple(e.entry_id for e in ontology.entries_of_type(ConceptType.SYMPTOM))
    names = symptom_feature_names(complaints)
    index = {n: i for i, n in enumerate(names)}
    X = np.stack([encode_symptom_features(c, v, index) for c, v, _ in rows])
    sym_index = {s: i for i, s in enumerate(symptom_ids)}
    Y = np.zeros((len(rows), len(symptom_ids)))
    for r, (_, _, symptoms) in enumerate(rows):
        for s in symptoms:
            i = sym_index.get(s)
            if i is not None:
                Y[r, i] = 1.0
    n = len(rows)
    W = np.zeros((len(symptom_ids), X.shape[1]))
    b = np.zeros(len(symptom_ids))
    for _ in range(iterations):
        P = 1.0 / (1.0 + np.exp(-(X @ W.T + b)))
        err = (P - Y) / n
        W -= learning_rate * (err.T @ X + l2 * W)
        b -= learning_rate * err.sum(axis=0)
    return SymptomLrModel(symptom_ids=symptom_ids, feature_names=tuple(names),
                          weights=W, biases=b)


@dataclass
class SymptomNbModel:
    """Bernoulli Naive Bayes per symptom over the same categorical features."""

    symptom_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    log_prior: np.ndarray        # S x 2 (log P(y=0), log P(y=1))
    log_like: np.ndarray         # S x d x 2 (log P(x_j=1 | y))
    feature_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.feature_index:
            self.feature_index = {n: i for i, n in enumerate(self.feature_names)}

    def rank(self, complaint: str, vitals: TriageVitals) -> RankedList:
        x = encode_symptom_features(complaint, vitals, self.feature_index)
        on = x > 0
        # log P(y) + sum_j log P(x_j | y), then posterior P(y=1 | x).
        ll1 = self.log_prior[:, 1] + np.where(on, self.log_like[:, :, 1],
                                              np.log1p(-np.exp(self.log_like[:, :, 1]))).sum(axis=1)
        ll0 = self.log_prior[:, 0] + np.where(on, self.log_like[:, :, 0],
                                              np.log1p(-np.exp(self.log_like[:, :, 0]))).sum(axis=1)
        m = np.maximum(ll0, ll1)
        p = np.exp(ll1 - m) / (np.exp(ll0 - m) + np.exp(ll1 - m))
        order = sorted(range(len(self.symptom_ids)), key=lambda i: (-p[i], self.symptom_ids[i]))
        return RankedList(
            concept_type=ConceptType.SYMPTOM,
            entries=tuple(self.symptom_ids[i] for i in order),
            scores=tuple(float(p[i]) for i in order),
        )

    def to_json(self) -> dict:
        return {"symptom_ids": list(self.symptom_ids),
                "feature_names": list(self.feature_names),
                "log_prior": self.log_prior.tolist(), "log_like": self.log_like.tolist()}

    @classmethod
    def from_json(cls, raw: dict) -> "SymptomNbModel":
        return cls(symptom_ids=tuple(raw["symptom_ids"]),
                   feature_names=tuple(raw["feature_names"]),
                   log_prior=np.array(raw["log_prior"]), log_like=np.array(raw["log_like"]))


def train_symptom_nb(
    rows: list[tuple[str, TriageVitals, list[str]]],
    ontology: Ontology,
    complaints: list[str],
    alpha: float = 1.0,
) -> SymptomNbModel:
    symptom_ids = tuple(e.entry_id for e in ontology.entries_of_type(ConceptType.SYMPTOM))
    names = symptom_feature_names(complaints)
    index = {n: i for i, n in enumerate(names)}
    X = np.stack([encode_symptom_features(c, v, index) for c, v, _ in rows]) > 0
    sym_index = {s: i for i, s in enumerate(symptom_ids)}
    Y = np.zeros((len(rows), len(symptom_ids)), dtype=bool)
    for r, (_, _, symptoms) in enumerate(rows):
        for s in symptoms:
            i = sym_index.get(s)
            if i is not None:
                Y[r, i] = True
    n = len(rows)
    S, d = len(symptom_ids), len(names)
    log_prior = np.zeros((S, 2))
    log_like = np.zeros((S, d, 2))
    for s in range(S):
        pos = Y[:, s]
        n1 = int(pos.sum())
        n0 = n - n1
        log_prior[s, 1] = math.log((n1 + alpha) / (n + 2 * alpha))
        log_prior[s, 0] = math.log((n0 + alpha) / (n + 2 * alpha))
        c1 = X[pos].sum(axis=0)
        c0 = X[~pos].sum(axis=0)
        log_like[s, :, 1] = np.log((c1 + alpha) / (n1 + 2 * alpha))
        log_like[s, :, 0] = np.log((c0 + alpha) / (n0 + 2 * alpha))
    return SymptomNbModel(symptom_ids=symptom_ids, feature_names=tuple(names),
                          log_prior=log_prior, log_like=log_like)
