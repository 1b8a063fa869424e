"""Per-case anatomy: token tfidf weight and branch firing on hits vs misses."""

import sys
import time

import numpy as np
from scipy import sparse

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.features import encode_tfidf, fit_delay_rates, fit_tfidf
from scribe.ranking import NetworkConfig, build_condition_dataset, train_condition_network
from scribe.resources import default_negation_lexicon
from scribe.text import word_tokens

t0 = time.time()
n = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
cfg = GeneratorConfig(seed=7, n_visits=n)
gen = generate_corpus(cfg)
neg = default_negation_lexicon()
train, test = train_test_split(gen.visits)
onto = gen.ontology
info = gen.tables["condition"]
planted = info["planted_buckets"]
trig = info["trigger_tokens"]

vocab = fit_tfidf([v.context.triage_text for v in train])
delay_rates = fit_delay_rates([v.context for v in train], onto)
ds = build_condition_dataset(train, onto, vocab, neg, delay_rates)
ds_test = build_condition_dataset(test, onto, vocab, neg, delay_rates)
X_tr = np.hstack([ds.X_ehr, ds.delay_u])
X_te = np.hstack([ds_test.X_ehr, ds_test.delay_u])
nc = NetworkConfig(hidden_text=96, hidden_ehr=256, epochs=300, learning_rate=0.1)
net = train_condition_network(ds.X_text, X_tr, ds.Y, nc)
print(f"train {time.time()-t0:.0f}s loss {net.initial_loss:.3f}->{net.final_loss:.3f}")

P = net.bucket_scores(ds_test.X_text, X_te)
# text branch alone: zero the EHR block
P_text = net.bucket_scores(ds_test.X_text, np.zeros_like(X_te))
names = vocab.feature_names()
tok_col = {}
for b in planted:
    try:
        tok_col[b] = names.index(trig[b])
    except ValueError:
        tok_col[b] = -1
        print(f"  WARNING: token {trig[b]} for {b} not in vocabulary")

bidx = {b: i for i, b in enumerate(ds_test.bucket_ids)}
Xt = ds_test.X_text.tocsr()

rows = {"hit": [], "miss": []}
for i, v in enumerate(test):
    toks = frozenset(word_tokens(v.context.triage_text))
    present = [b for b in planted if trig[b] in toks]
    if not present:
        continue
    order = np.argsort(-P[i], kind="stable")
    x = Xt[i].toarray().ravel()
    n_words = len(v.context.triage_text.split())
    for b in present:
        j = bidx[b]
        ok = j in order[:3]
        w = x[tok_col[b]] if tok_col[b] >= 0 else 0.0
        rows["hit" if ok else "miss"].append(
            (w, n_words, P[i, j], P_text[i, j], int(v.context.has_history),
             int(X_te[i, :60].sum())))

for k, rs in rows.items():
    a = np.array(rs)
    print(f"{k}: n={len(rs)} tokw={a[:,0].mean():.3f} words={a[:,1].mean():.1f} "
          f"score={a[:,2].mean():.3f} text_only={a[:,3].mean():.3f} "
          f"hist={a[:,4].mean():.2f} chartN={a[:,5].mean():.1f}")

# distribution of text-only score vs token weight for misses
miss = np.array(rows["miss"])
if len(miss):
    lo = miss[miss[:, 0] < np.median(miss[:, 0])]
    hi = miss[miss[:, 0] >= np.median(miss[:, 0])]
    print(f"miss low-tokw  : tokw={lo[:,0].mean():.3f} text_only={lo[:,3].mean():.3f}")
    print(f"miss high-tokw : tokw={hi[:,0].mean():.3f} text_only={hi[:,3].mean():.3f}")
hit = np.array(rows["hit"])
print(f"hit  text_only quartiles: {np.percentile(hit[:,3], [25,50,75])}")
if len(miss):
    print(f"miss text_only quartiles: {np.percentile(miss[:,3], [25,50,75])}")
print(f"total {time.time()-t0:.0f}s")
