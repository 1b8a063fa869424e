"""Model bundle and the once-per-patient ranking engine.

A RankingEngine computes every concept-type ranking for a patient context in
a single rank_all call. Sessions cache the result; keystroke handling never
re-enters the models. The invocation counter exists so callers can assert
that property instead of trusting it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .extraction import NegationLexicon
from .features import (
    PatientContext,
    PopulationStats,
    TfidfVocabulary,
    delay_feature,
    encode_tfidf,
    ehr_presence_vector,
    fit_delay_rates,
    fit_population_stats,
    fit_tfidf,
)
from .ontology import ConceptType, Ontology
from .ranking import (
    ConditionNetwork,
    LrConfig,
    LrVariant,
    NetworkConfig,
    OvrLrModel,
    RankedList,
    SymptomLrModel,
    SymptomNbModel,
    SymptomTable,
    build_condition_dataset,
    rank_alphabetical,
    rank_buckets,
    rank_condition_terms,
    rank_corpus_frequency,
    rank_frequency,
    rank_symptoms,
    rank_symptoms_complaint_only,
    symptom_feature_rows,
    symptom_table_rows,
    train_condition_network,
    train_ovr_lr,
    train_symptom_lr,
    train_symptom_nb,
    fit_symptom_table,
)

CONDITION_MODELS = ("network", "lr_text", "lr_ehr", "lr_delay")
SYMPTOM_MODELS = ("table_cv", "table_c", "nb", "lr_sym")


@dataclass
class ModelBundle:
    """Everything a deployment needs beyond the ontology itself."""

    ontology: Ontology
    vocab: TfidfVocabulary
    stats: PopulationStats
    delay_rates: dict[str, float]
    bucket_ids: tuple[str, ...]
    network: ConditionNetwork
    lr_text: OvrLrModel
    lr_ehr: OvrLrModel
    lr_delay: OvrLrModel
    symptom_table: SymptomTable
    symptom_nb: SymptomNbModel
    symptom_lr: SymptomLrModel
    complaints: list[str]

    def __post_init__(self):
        self._dense_cols = [self.ontology.buckets[b].bucket_index
                            for b in self.bucket_ids]

    # -- condition scoring ------------------------------------------------

    def condition_inputs(self, context: PatientContext):
        x_text = encode_tfidf(self.vocab, context.triage_text).as_dense(self.vocab.size)
        x_ehr = ehr_presence_vector(context, self.ontology)[self._dense_cols]
        u = np.zeros(len(self.bucket_ids))
        for j, b in enumerate(self.bucket_ids):
            u[j] = delay_feature(context, self.ontology.buckets[b],
                                 self.delay_rates[b])[0]
        return x_text, x_ehr, u

    def condition_scores(self, context: PatientContext, model: str) -> np.ndarray:
        x_text, x_ehr, u = self.condition_inputs(context)
        if model == "network":
            return self.network.bucket_scores(x_text, np.concatenate([x_ehr, u]))
        if model == "lr_text":
            return self.lr_text.bucket_scores(x_text, x_ehr)
        if model == "lr_ehr":
            return self.lr_ehr.bucket_scores(x_text, x_ehr)
        if model == "lr_delay":
            return self.lr_delay.bucket_scores(x_text, x_ehr, delay=u)
        raise ValueError(f"unknown condition model {model!r}")

    def bucket_ranking(self, context: PatientContext, model: str) -> list[tuple[str, float]]:
        """(bucket id, score) pairs, best first."""
        scores = self.condition_scores(context, model)
        return [(self.bucket_ids[j], s) for j, s in rank_buckets(scores)]

    def rank_conditions(self, context: PatientContext, model: str) -> RankedList:
        return rank_condition_terms(self.bucket_ranking(context, model),
                                    context, self.ontology)

    def rank_symptoms_for(self, context: PatientContext, model: str) -> RankedList:
        if model == "table_cv":
            return rank_symptoms(self.symptom_table, context.chief_complaint,
                                 context.vitals, self.stats)
        if model == "table_c":
            return rank_symptoms_complaint_only(self.symptom_table,
                                                context.chief_complaint)
        if model == "nb":
            return self.symptom_nb.rank(context.chief_complaint, context.vitals)
        if model == "lr_sym":
            return self.symptom_lr.rank(context.chief_complaint, context.vitals)
        raise ValueError(f"unknown symptom model {model!r}")

    # -- persistence -------------------------------------------------------

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = {
            "bucket_ids": list(self.bucket_ids),
            "delay_rates": self.delay_rates,
            "complaints": self.complaints,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
        (out / "vocab.json").write_text(json.dumps(self.vocab.to_json()))
        self.stats.save(out / "stats.json")
        self.network.save(out / "network.json")
        self.lr_text.save(out / "lr_text.json")
        self.lr_ehr.save(out / "lr_ehr.json")
        self.lr_delay.save(out / "lr_delay.json")
        self.symptom_table.save(out / "symptom_table.json")
        (out / "symptom_nb.json").write_text(json.dumps(self.symptom_nb.to_json()))
        (out / "symptom_lr.json").write_text(json.dumps(self.symptom_lr.to_json()))

    @classmethod
    def load(cls, in_dir: str | Path, ontology: Ontology) -> "ModelBundle":
        src = Path(in_dir)
        manifest = json.loads((src / "manifest.json").read_text())
        return cls(
            ontology=ontology,
            vocab=TfidfVocabulary.from_json(json.loads((src / "vocab.json").read_text())),
            stats=PopulationStats.load(src / "stats.json"),
            delay_rates=dict(manifest["delay_rates"]),
            bucket_ids=tuple(manifest["bucket_ids"]),
            network=ConditionNetwork.load(src / "network.json"),
            lr_text=OvrLrModel.load(src / "lr_text.json"),
            lr_ehr=OvrLrModel.load(src / "lr_ehr.json"),
            lr_delay=OvrLrModel.load(src / "lr_delay.json"),
            symptom_table=SymptomTable.load(src / "symptom_table.json"),
            symptom_nb=SymptomNbModel.from_json(
                json.loads((src / "symptom_nb.json").read_text())),
            symptom_lr=SymptomLrModel.from_json(
                json.loads((src / "symptom_lr.json").read_text())),
            complaints=list(manifest["complaints"]),
        )


def train_models(
    train_visits,
    ontology: Ontology,
    negation: NegationLexicon,
    net_config: NetworkConfig | None = None,
    lr_config: LrConfig | None = None,
) -> ModelBundle:
    """Fit every ranker on the training split of a visit corpus."""
    contexts = [v.context for v in train_visits]
    vocab = fit_tfidf([c.triage_text for c in contexts])
    stats = fit_population_stats([c.vitals for c in contexts])
    delay_rates = fit_delay_rates(contexts, ontology)

    ds = build_condition_dataset(train_visits, ontology, vocab, negation, delay_rates)
    if net_config is None:
        # corpus-scale widths: the EHR branch must be at least as wide as its
        # presence+recency input so linear per-bucket effects pass untruncated
        net_config = NetworkConfig(hidden_text=96, hidden_ehr=256,
                                   epochs=300, learning_rate=0.1)
    # the joint model reads the whole structured side: presence and recency
    network = train_condition_network(
        ds.X_text, np.hstack([ds.X_ehr, ds.delay_u]), ds.Y, net_config)
    lr_text = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_ONLY, lr_config)
    lr_ehr = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR, lr_config)
    lr_delay = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR_DELAY,
                            lr_config, delay_u=ds.delay_u)

    table_rows = symptom_table_rows(train_visits, ontology, stats, negation)
    symptom_table = fit_symptom_table(table_rows, ontology)
    feature_rows = symptom_feature_rows(train_visits, ontology, negation)
    complaints = sorted({c.chief_complaint for c in contexts})
    symptom_nb = train_symptom_nb(feature_rows, ontology, complaints)
    symptom_lr = train_symptom_lr(feature_rows, ontology, complaints)

    return ModelBundle(
        ontology=ontology, vocab=vocab, stats=stats, delay_rates=delay_rates,
        bucket_ids=ds.bucket_ids, network=network, lr_text=lr_text,
        lr_ehr=lr_ehr, lr_delay=lr_delay, symptom_table=symptom_table,
        symptom_nb=symptom_nb, symptom_lr=symptom_lr, complaints=complaints,
    )


Ranker = Callable[[PatientContext], RankedList]


@dataclass
class RankingEngine:
    """Named set of per-type rankers; one rank_all per patient session."""

    name: str
    rankers: dict[ConceptType, Ranker]
    invocations: int = field(default=0)

    def rank_all(self, context: PatientContext) -> dict[ConceptType, RankedList]:
        self.invocations += 1
        return {t: fn(context) for t, fn in self.rankers.items()}


def contextual_engine(
    bundle: ModelBundle,
    condition_model: str = "network",
    symptom_model: str = "table_cv",
    name: str | None = None,
) -> RankingEngine:
    onto = bundle.ontology
    return RankingEngine(
        name=name or f"{condition_model}+{symptom_model}",
        rankers={
            ConceptType.CONDITION: lambda c: bundle.rank_conditions(c, condition_model),
            ConceptType.SYMPTOM: lambda c: bundle.rank_symptoms_for(c, symptom_model),
            ConceptType.LAB: lambda c: rank_frequency(ConceptType.LAB, c, onto),
            ConceptType.MEDICATION: lambda c: rank_frequency(ConceptType.MEDICATION, c, onto),
        },
    )


def frequency_engine(ontology: Ontology) -> RankingEngine:
    """Context-free baseline: corpus frequency for every type."""
    return RankingEngine(
        name="frequency",
        rankers={t: (lambda t_: lambda _c: rank_corpus_frequency(t_, ontology))(t)
                 for t in ConceptType},
    )


def spell_engine(ontology: Ontology) -> RankingEngine:
    """Context-free baseline: alphabetical, i.e. a bare spelling completer."""
    return RankingEngine(
        name="spell",
        rankers={t: (lambda t_: lambda _c: rank_alphabetical(t_, ontology))(t)
                 for t in ConceptType},
    )


def standard_engines(bundle: ModelBundle) -> dict[str, RankingEngine]:
    """The model grid the evaluation reports are computed over."""
    engines: dict[str, RankingEngine] = {}
    for cm in CONDITION_MODELS:
        engines[cm] = contextual_engine(bundle, condition_model=cm,
                                        symptom_model="table_cv", name=cm)
    for sm in SYMPTOM_MODELS:
        engines[sm] = contextual_engine(bundle, condition_model="network",
                                        symptom_model=sm, name=sm)
    engines["frequency"] = frequency_engine(bundle.ontology)
    engines["spell"] = spell_engine(bundle.ontology)
    return engines
