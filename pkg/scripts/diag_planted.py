"""Failure anatomy for planted-association recovery: who outranks the bucket."""

import sys
import time
from collections import Counter

import numpy as np

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.features import fit_delay_rates, fit_tfidf
from scribe.ranking import NetworkConfig, build_condition_dataset, train_condition_network
from scribe.resources import default_negation_lexicon
from scribe.text import word_tokens

t0 = time.time()
n = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 300
cfg = GeneratorConfig(seed=7, n_visits=n)
gen = generate_corpus(cfg)
neg = default_negation_lexicon()
train, test = train_test_split(gen.visits)
onto = gen.ontology
info = gen.tables["condition"]
planted = info["planted_buckets"]
trig = info["trigger_tokens"]
partners = info["partners"]

vocab = fit_tfidf([v.context.triage_text for v in train])
delay_rates = fit_delay_rates([v.context for v in train], onto)
ds = build_condition_dataset(train, onto, vocab, neg, delay_rates)
ds_test = build_condition_dataset(test, onto, vocab, neg, delay_rates)
X_tr = np.hstack([ds.X_ehr, ds.delay_u])
X_te = np.hstack([ds_test.X_ehr, ds_test.delay_u])
nc = NetworkConfig(hidden_text=96, hidden_ehr=256, epochs=epochs, learning_rate=0.1)
net = train_condition_network(ds.X_text, X_tr, ds.Y, nc)
print(f"train {time.time()-t0:.0f}s epochs={epochs} "
      f"loss {net.initial_loss:.3f}->{net.final_loss:.3f}")

P = net.bucket_scores(ds_test.X_text, X_te)
bidx = {b: i for i, b in enumerate(ds_test.bucket_ids)}
token_sets = [frozenset(word_tokens(v.context.triage_text)) for v in test]


def chart_buckets(v):
    out = {}
    for eid, age in v.context.ehr_mentions.items():
        e = onto.entries.get(eid)
        if e is not None and e.concept_type.value == "CONDITION":
            out[e.bucket_id] = min(age, out.get(e.bucket_id, float("inf")))
    return out


kinds = Counter()
fail_kinds = Counter()
b_score_fail = []
b_score_ok = []
hits = total = 0
for i, v in enumerate(test):
    toks = token_sets[i]
    chart = chart_buckets(v)
    present = [b for b in planted if trig[b] in toks]
    for b in present:
        total += 1
        j = bidx[b]
        order = np.argsort(-P[i], kind="stable")
        ok = j in order[:3]
        hits += ok
        (b_score_ok if ok else b_score_fail).append(P[i, j])
        if ok:
            continue
        kinds["b_in_chart" if b in chart else "b_not_chart"] += 1
        for cj in order[:3]:
            c = ds_test.bucket_ids[cj]
            flags = []
            if c in trig and trig[c] in toks:
                flags.append("token")
            if c in chart:
                flags.append("recent" if chart[c] < 20 else "chart")
            drv = partners.get(c)
            if drv is not None and drv in chart:
                flags.append("partner")
            fail_kinds["+".join(flags) or "none"] += 1

print(f"top3: {hits}/{total} = {hits/max(1,total):.3f}")
print(f"b score when hit:  mean={np.mean(b_score_ok):.3f}")
if b_score_fail:
    print(f"b score when miss: mean={np.mean(b_score_fail):.3f} "
          f"p90={np.percentile(b_score_fail, 90):.3f}")
print("failing b location:", dict(kinds))
print("competitors above (flag combos):", fail_kinds.most_common())
