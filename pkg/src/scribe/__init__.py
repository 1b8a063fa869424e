"""Contextual autocomplete for clinical notes.

Typing a note queries nothing but cached per-patient rankings; the models
run once when a session opens. The public surface is re-exported here;
submodules stay importable directly for the pieces not listed.
"""

from .engine import (
    ModelBundle,
    RankingEngine,
    contextual_engine,
    frequency_engine,
    spell_engine,
    standard_engines,
    train_models,
)
from .extraction import (
    ConceptMatcher,
    Mention,
    NegationLexicon,
    Polarity,
    detect_negation,
    extract_concepts,
    retroactive_candidates,
)
from .features import (
    PatientContext,
    PopulationStats,
    SparseVector,
    TfidfVocabulary,
    TriageVitals,
    bucketize_vital,
    categorical_vitals,
    delay_feature,
    ehr_presence_vector,
    encode_tfidf,
    fit_delay_rates,
    fit_population_stats,
    fit_tfidf,
    most_abnormal_vital,
    vital_state_key,
)
from .ontology import (
    ConceptEntry,
    ConceptType,
    Ontology,
    OntologyError,
    RelevancyBucket,
    build_ontology,
)
from .session import (
    NoteState,
    ScopeState,
    Suggestion,
    TagSpan,
    TriggerLexicon,
    accept,
    query,
    retro_candidates,
    retro_confirm,
    suggest,
    update_scope,
)

__version__ = "0.1.0"
