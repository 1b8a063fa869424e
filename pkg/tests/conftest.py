"""Shared fixtures: a hand-written ontology and one small trained bundle."""

import copy
import re

import pytest

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import train_models
from scribe.ontology import build_ontology
from scribe.ranking import NetworkConfig
from scribe.resources import default_negation_lexicon, default_trigger_lexicon

# Importing scipy shrinks the stdlib regex cache to 50 entries, which makes
# the pattern-per-synonym brute-force oracles thrash. Restore the default.
re._MAXCACHE = 512

TINY_DOC = {
    "buckets": [
        {"id": "b.htn", "name": "hypertension"},
        {"id": "b.dm", "name": "diabetes"},
        {"id": "b.chf", "name": "heart failure"},
        {"id": "b.copd", "name": "copd"},
        {"id": "sx.cp", "name": "chest pain"},
        {"id": "sx.sob", "name": "dyspnea"},
        {"id": "sx.cough", "name": "cough"},
    ],
    "entries": [
        {"id": "c.htn", "name": "hypertension", "type": "CONDITION",
         "bucket": "b.htn", "frequency": 900, "cuis": ["C0000001"],
         "synonyms": ["htn", "high blood pressure"]},
        {"id": "c.dm", "name": "diabetes mellitus", "type": "CONDITION",
         "bucket": "b.dm", "frequency": 800, "cuis": ["C0000002"],
         "synonyms": ["dmii", "diabetes"]},
        {"id": "c.chf", "name": "congestive heart failure", "type": "CONDITION",
         "bucket": "b.chf", "frequency": 700, "cuis": ["C0000003"],
         "synonyms": ["chf"]},
        {"id": "c.copd", "name": "copd", "type": "CONDITION",
         "bucket": "b.copd", "frequency": 600, "cuis": ["C0000004"],
         "synonyms": ["chronic obstructive pulmonary disease"]},
        {"id": "s.cp", "name": "chest pain", "type": "SYMPTOM",
         "bucket": "sx.cp", "frequency": 950, "cuis": ["C0000005"],
         "synonyms": ["cp"]},
        {"id": "s.sob", "name": "shortness of breath", "type": "SYMPTOM",
         "bucket": "sx.sob", "frequency": 850, "cuis": ["C0000006"],
         "synonyms": ["sob", "dyspnea"]},
        {"id": "s.cough", "name": "cough", "type": "SYMPTOM",
         "bucket": "sx.cough", "frequency": 500, "cuis": ["C0000007"],
         "synonyms": ["coughing"]},
        {"id": "l.cbc", "name": "complete blood count", "type": "LAB",
         "frequency": 400, "cuis": ["C0000008"], "synonyms": ["cbc"]},
        {"id": "l.bmp", "name": "basic metabolic panel", "type": "LAB",
         "frequency": 300, "cuis": ["C0000009"], "synonyms": ["bmp"]},
        {"id": "m.asa", "name": "aspirin", "type": "MEDICATION",
         "frequency": 350, "cuis": ["C0000010"], "synonyms": ["asa"]},
        {"id": "m.metop", "name": "metoprolol", "type": "MEDICATION",
         "frequency": 250, "cuis": ["C0000011"], "synonyms": ["lopressor"]},
    ],
}


def tiny_doc() -> dict:
    return copy.deepcopy(TINY_DOC)


@pytest.fixture(scope="session")
def tiny_ontology():
    return build_ontology(tiny_doc())


@pytest.fixture(scope="session")
def negation():
    return default_negation_lexicon()


@pytest.fixture(scope="session")
def triggers():
    return default_trigger_lexicon()


@pytest.fixture(scope="session")
def small_corpus():
    cfg = GeneratorConfig(seed=11, n_visits=400, n_condition_entries=60,
                          n_condition_buckets=20, n_planted=6,
                          n_labs=15, n_meds=15, noise_vocab=80)
    return generate_corpus(cfg)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return train_test_split(small_corpus.visits)


@pytest.fixture(scope="session")
def small_bundle(small_corpus, small_split, negation):
    train, _ = small_split
    # light training budget: these tests exercise plumbing, not rank quality
    nc = NetworkConfig(hidden_text=32, hidden_ehr=64, epochs=60,
                       learning_rate=0.1)
    return train_models(train, small_corpus.ontology, negation, net_config=nc)
