"""Ranking metrics against brute-force oracles, replay burden, report shape."""

import itertools
import math

import pytest

from scribe.engine import frequency_engine
from scribe.evaluation import (
    EvalRecord,
    GroundTruthTerm,
    bootstrap_gap_ci,
    build_record,
    evaluate_corpus,
    map_score,
    mean_ci,
    mrr,
    per_record_metrics,
    replay_note,
    rr_first_hit,
)
from scribe.features import PatientContext, TriageVitals
from scribe.ontology import ConceptType
from scribe.ranking import RankedList

# ---------------------------------------------------------------------------
# Brute-force oracles, deliberately structured unlike the implementations:
# walk the truth set and look positions up, rather than walking the ranking.


def mrr_oracle(ranking, truth):
    positions = {item: i + 1 for i, item in enumerate(ranking)}
    total = 0.0
    for item in truth:
        if item in positions:
            total += 1.0 / max(1, positions[item] - len(truth))
    return total / len(truth)


def map_oracle(ranking, truth):
    t = set(truth)
    total = 0.0
    for k in range(1, len(ranking) + 1):
        if ranking[k - 1] in t:
            total += len(t.intersection(ranking[:k])) / k
    return total / len(t)


ITEMS = "abcdef"


def all_cases():
    for n in range(1, len(ITEMS) + 1):
        pool = ITEMS[:n]
        for perm in itertools.permutations(pool):
            for r in range(1, n + 1):
                for truth in itertools.combinations(pool, r):
                    yield list(perm), set(truth)


def test_mrr_matches_oracle_exhaustively():
    for ranking, truth in all_cases():
        assert mrr(ranking, truth) == pytest.approx(mrr_oracle(ranking, truth),
                                                    abs=1e-12)


def test_map_matches_oracle_exhaustively():
    for ranking, truth in all_cases():
        assert map_score(ranking, truth) == pytest.approx(
            map_oracle(ranking, truth), abs=1e-12)


def test_mrr_worked_example():
    assert mrr(["a", "b", "c", "d"], {"c", "d"}) == 0.75


def test_mrr_perfect_when_truth_fills_top():
    assert mrr(["c", "a", "b"], {"a", "c"}) == 1.0
    assert mrr(["b", "a"], {"a", "b"}) == 1.0


def test_mrr_forgives_one_insertion_above():
    # hits at ranks 2 and 3 with |T|=2 still score 1/max(1,0) and 1/max(1,1)
    assert mrr(["x", "a", "b"], {"a", "b"}) == 1.0


def test_metrics_reject_empty_truth():
    with pytest.raises(ValueError):
        mrr(["a"], set())
    with pytest.raises(ValueError):
        map_score(["a"], set())


def test_missing_truth_items_contribute_zero():
    assert mrr(["a"], {"a", "z"}) == pytest.approx(0.5)
    assert map_score(["a"], {"a", "z"}) == pytest.approx(0.5)


def test_rr_first_hit():
    assert rr_first_hit(["x", "y", "a"], {"a", "b"}) == pytest.approx(1 / 3)
    assert rr_first_hit(["x", "y"], {"a"}) == 0.0


def test_mean_ci():
    m, half, n = mean_ci([1.0, 2.0, 3.0])
    assert m == pytest.approx(2.0)
    assert n == 3
    assert half == pytest.approx(1.96 * 1.0 / math.sqrt(3))
    m1, h1, n1 = mean_ci([4.0])
    assert (m1, n1) == (4.0, 1) and math.isnan(h1)
    m0, h0, n0 = mean_ci([])
    assert n0 == 0 and math.isnan(m0)


def test_bootstrap_gap_ci_constant_shift():
    a = [0.5, 0.7, 0.9, 0.3]
    b = [x - 0.1 for x in a]
    point, lo, hi = bootstrap_gap_ci(a, b)
    assert point == pytest.approx(0.1)
    assert lo == pytest.approx(0.1) and hi == pytest.approx(0.1)


def test_bootstrap_gap_ci_deterministic_and_validated():
    a = [0.1, 0.9, 0.4, 0.6, 0.2]
    b = [0.2, 0.5, 0.5, 0.4, 0.3]
    first = bootstrap_gap_ci(a, b)
    assert bootstrap_gap_ci(a, b) == first
    assert first[1] <= first[0] <= first[2]
    with pytest.raises(ValueError):
        bootstrap_gap_ci([1.0], [])
    with pytest.raises(ValueError):
        bootstrap_gap_ci([], [])


# ---------------------------------------------------------------------------
# Replay and report plumbing on hand-built records.


def _ctx(**kw):
    defaults = dict(patient_id="p1", triage_text="chest pain",
                    chief_complaint="chest pain",
                    vitals=TriageVitals(), ehr_mentions={}, has_history=False)
    defaults.update(kw)
    return PatientContext(**defaults)


class FixedEngine:
    def __init__(self, rankings):
        self.rankings = rankings

    def rank_all(self, context):
        return self.rankings


def _rankings(tiny_ontology, cond_order, sym_order):
    by_type = {
        ConceptType.CONDITION: cond_order,
        ConceptType.SYMPTOM: sym_order,
        ConceptType.LAB: ["l.cbc", "l.bmp"],
        ConceptType.MEDICATION: ["m.asa", "m.metop"],
    }
    return {t: RankedList.from_ordered(t, v) for t, v in by_type.items()}


def test_per_record_metrics_skips_types_without_truth(tiny_ontology, negation):
    note = "HPI: pt with htn and cp today."
    rec = build_record(_ctx(), note, tiny_ontology, negation)
    engine = FixedEngine(_rankings(
        tiny_ontology, ["c.htn", "c.dm", "c.chf", "c.copd"],
        ["s.cp", "s.sob", "s.cough"]))
    out = per_record_metrics([rec], engine)
    assert out[ConceptType.CONDITION]["mrr"] == [1.0]
    assert out[ConceptType.SYMPTOM]["mrr"] == [1.0]
    assert out[ConceptType.LAB]["mrr"] == []
    assert out[ConceptType.MEDICATION]["mrr"] == []


def test_replay_burden_accept_costs_one(tiny_ontology, negation, triggers):
    # 'htn' is ranked first and the scope activates on 'history of', so the
    # replay should accept at the first keystroke of the term: burden 1.
    note = "HPI: history of htn today."
    rec = build_record(_ctx(has_history=True), note, tiny_ontology, negation)
    assert [t.entry_id for t in rec.terms] == ["c.htn"]
    rankings = _rankings(tiny_ontology, ["c.htn", "c.dm", "c.chf", "c.copd"],
                         ["s.cp", "s.sob", "s.cough"])
    replays = replay_note(rec, rankings, tiny_ontology, triggers)
    (r,) = replays
    assert r.burden == 1
    assert r.baseline == len("htn")
    assert r.autocompleted
    assert r.scope_active_at_start
    assert r.scope_type_correct


def test_replay_burden_never_exceeds_baseline(tiny_ontology, negation, triggers):
    note = ("HPI: pt presents with cp and sob, history of dmii.\n"
            "MEDICATIONS: asa daily.\nROS: denies coughing.")
    rec = build_record(_ctx(), note, tiny_ontology, negation)
    assert len(rec.terms) >= 4
    # worst-case rankings: the truth entries sit at the bottom
    rankings = _rankings(tiny_ontology, ["c.htn", "c.chf", "c.copd", "c.dm"],
                         ["s.cough", "s.cp", "s.sob"])
    for policy in ("top1", "top3", "top5"):
        for r in replay_note(rec, rankings, tiny_ontology, triggers,
                             policy=policy):
            assert r.burden <= r.baseline


def test_replay_unsuggested_term_costs_full_length(tiny_ontology, negation,
                                                   triggers):
    note = "HPI: history of chf."
    rec = build_record(_ctx(), note, tiny_ontology, negation)
    rankings = _rankings(tiny_ontology, ["c.htn", "c.dm", "c.copd", "c.chf"],
                         ["s.cp", "s.sob", "s.cough"])
    (r,) = replay_note(rec, rankings, tiny_ontology, triggers, policy="top1")
    # every prefix of 'chf' leaves a higher-ranked condition in the single
    # visible slot ('' -> htn, 'c'/'ch' -> copd), so it is never offered
    assert not r.autocompleted
    assert r.burden == r.baseline == len("chf")


def test_evaluate_corpus_report_shape(tiny_ontology, negation, triggers):
    notes = [
        "HPI: pt presents with cp, history of htn.",
        "HPI: history of dmii. ROS: denies sob.",
    ]
    records = [build_record(_ctx(), n, tiny_ontology, negation) for n in notes]
    engines = {"freq": frequency_engine(tiny_ontology)}
    report = evaluate_corpus(records, engines, tiny_ontology, triggers,
                             replay_engine="freq")
    stats = report.per_engine["freq"]
    assert "CONDITION" in stats and "overall" in stats
    assert 0.0 <= stats["CONDITION"]["mrr"] <= 1.0
    assert report.burden["dominated"] in (True, False)
    assert report.burden["n_terms"] == sum(len(r.terms) for r in records)
    assert set(report.scope) == {"fraction_auto_triggered",
                                 "fraction_correct_type", "n_terms"}
    for key in report.strata["freq"]:
        ctype, ehr, tercile = key.split("|")
        assert ctype in {"CONDITION", "SYMPTOM", "LAB", "MEDICATION"}
        assert ehr in {"NO_HISTORY", "MENTIONED", "NOT_MENTIONED"}
        assert tercile.startswith("tercile")
    assert report.counts == {"records": 2, "engines": ["freq"]}


def test_evaluate_corpus_rejects_empty():
    with pytest.raises(ValueError):
        evaluate_corpus([], {}, None)
