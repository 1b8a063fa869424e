"""Per-concept-type rankers and their training routines."""

from .base import RankedList, rank_buckets, rank_condition_terms
from .dataset import (
    ConditionDataset,
    build_condition_dataset,
    condition_bucket_ids,
    note_symptoms,
    stack_sparse,
    symptom_feature_rows,
    symptom_table_rows,
)
from .frequency import rank_alphabetical, rank_corpus_frequency, rank_frequency
from .network import (
    ConditionNetwork,
    NetworkConfig,
    gradient_check,
    train_condition_network,
)
from .ovr_lr import LrConfig, LrVariant, OvrLrModel, train_ovr_lr
from .probe import ProbeDataset, lasso_coordinate_descent, linear_probe
from .symptoms import (
    SymptomLrModel,
    SymptomNbModel,
    SymptomTable,
    encode_symptom_features,
    fit_symptom_table,
    rank_symptoms,
    rank_symptoms_complaint_only,
    symptom_feature_names,
    train_symptom_lr,
    train_symptom_nb,
)

__all__ = [
    "RankedList",
    "rank_buckets",
    "rank_condition_terms",
    "ConditionDataset",
    "build_condition_dataset",
    "condition_bucket_ids",
    "note_symptoms",
    "stack_sparse",
    "symptom_feature_rows",
    "symptom_table_rows",
    "rank_alphabetical",
    "rank_corpus_frequency",
    "rank_frequency",
    "ConditionNetwork",
    "NetworkConfig",
    "gradient_check",
    "train_condition_network",
    "LrConfig",
    "LrVariant",
    "OvrLrModel",
    "train_ovr_lr",
    "ProbeDataset",
    "lasso_coordinate_descent",
    "linear_probe",
    "SymptomLrModel",
    "SymptomNbModel",
    "SymptomTable",
    "encode_symptom_features",
    "fit_symptom_table",
    "rank_symptoms",
    "rank_symptoms_complaint_only",
    "symptom_feature_names",
    "train_symptom_lr",
    "train_symptom_nb",
]
