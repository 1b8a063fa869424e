"""Loaders for the data files shipped inside the package."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

from .extraction import NegationLexicon
from .ontology import Ontology, build_ontology
from .session import TriggerLexicon

_DATA = Path(__file__).parent / "data"


def data_path(name: str) -> Path:
    return _DATA / name


@lru_cache(maxsize=1)
def default_negation_lexicon() -> NegationLexicon:
    return NegationLexicon.from_file(data_path("negation_lexicon.json"))


@lru_cache(maxsize=1)
def default_trigger_lexicon() -> TriggerLexicon:
    return TriggerLexicon.from_file(data_path("trigger_lexicon.json"))


@lru_cache(maxsize=1)
def demo_ontology() -> Ontology:
    raw = json.loads(data_path("demo_ontology.json").read_text(encoding="utf-8"))
    return build_ontology(raw)


def load_ontology(path: str | Path) -> Ontology:
    return build_ontology(json.loads(Path(path).read_text(encoding="utf-8")))
