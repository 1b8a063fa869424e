"""Where does each model win? Per-stratum MRR breakdown."""

import sys
from collections import defaultdict

import numpy as np

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import train_models
from scribe.evaluation import mrr
from scribe.features import vital_state_key
from scribe.ontology import ConceptType
from scribe.ranking import rank_symptoms, rank_symptoms_complaint_only
from scribe.ranking.dataset import note_symptoms
from scribe.resources import default_negation_lexicon
from scribe.extraction import extract_concepts

n = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
LEVEL = sys.argv[2] if len(sys.argv) > 2 else "term"
cfg = GeneratorConfig(seed=7, n_visits=n)
gen = generate_corpus(cfg)
neg = default_negation_lexicon()
train, test = train_test_split(gen.visits)
bundle = train_models(train, gen.ontology, neg)
onto = gen.ontology

# ---------- conditions: truth-level placement by EHR membership ----------
cond_models = ("network", "lr_delay", "lr_ehr", "lr_text")
place = {m: defaultdict(list) for m in cond_models}
for v in test:
    ctx = v.context
    truths = set()
    for m_ in extract_concepts(v.note_text(), onto, neg):
        e = onto.entries[m_.entry_id]
        if e.concept_type is ConceptType.CONDITION:
            truths.add(e.bucket_id)
    if not truths:
        continue
    ehr_buckets = {onto.entries[eid].bucket_id for eid in ctx.ehr_mentions
                   if eid in onto.entries}
    entry_truths = set()
    for m_ in extract_concepts(v.note_text(), onto, neg):
        e = onto.entries[m_.entry_id]
        if e.concept_type is ConceptType.CONDITION:
            entry_truths.add(m_.entry_id)
    for m in cond_models:
        if LEVEL == "term":
            ranked = bundle.rank_conditions(ctx, m)
            score = mrr(ranked.entries, entry_truths)
        else:
            ranking = [b for b, _ in bundle.bucket_ranking(ctx, m)]
            score = mrr(ranking, truths)
        if not ctx.has_history:
            place[m]["NO_HISTORY"].append(score)
        elif truths & ehr_buckets:
            place[m]["HIT_IN_EHR"].append(score)
        else:
            place[m]["HIT_NOT_EHR"].append(score)
        place[m]["ALL"].append(score)

print("CONDITION bucket-level MRR by stratum:")
keys = ("ALL", "HIT_IN_EHR", "HIT_NOT_EHR", "NO_HISTORY")
print(f"  {'model':10s} " + " ".join(f"{k:>14s}" for k in keys))
for m in cond_models:
    row = " ".join(
        f"{np.mean(place[m][k]):8.3f}(n={len(place[m][k]):4d})" if place[m][k] else f"{'-':>14s}"
        for k in keys)
    print(f"  {m:10s} {row}")

# ---------- symptoms: by realized vital class --------------------------
classes = defaultdict(list)
for v in test:
    ctx = v.context
    truths = set(note_symptoms(v, onto, neg))
    if not truths:
        continue
    vkey = vital_state_key(ctx.vitals, bundle.stats)
    tab = gen.tables["symptoms"][ctx.chief_complaint]
    if vkey == tab["shared_key"]:
        cls = "SHARED"
    elif vkey == tab["specific_key"]:
        cls = "SPECIFIC"
    else:
        cls = "NONE"
    row = {}
    for m in ("table_cv", "table_c", "nb", "lr_sym"):
        r = bundle.rank_symptoms_for(ctx, m)
        row[m] = mrr(r.entries, truths)
    classes[cls].append(row)

print("\nSYMPTOM MRR by realized class:")
print(f"  {'class':9s} {'n':>5s} " + " ".join(f"{m:>9s}" for m in ("table_cv", "table_c", "nb", "lr_sym")))
for cls in ("NONE", "SHARED", "SPECIFIC"):
    rows = classes[cls]
    if not rows:
        continue
    means = {m: np.mean([r[m] for r in rows]) for m in rows[0]}
    print(f"  {cls:9s} {len(rows):5d} " + " ".join(f"{means[m]:9.3f}" for m in ("table_cv", "table_c", "nb", "lr_sym")))
