"""Phase 2: network candidates vs the frozen corpus + it300 LR ladder."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import ModelBundle, contextual_engine
from scribe.evaluation import bootstrap_gap_ci, build_record, per_record_metrics
from scribe.features import fit_delay_rates, fit_population_stats, fit_tfidf
from scribe.ontology import ConceptType
from scribe.ranking import NetworkConfig, ProbeDataset, build_condition_dataset, linear_probe
from scribe.ranking.dataset import symptom_feature_rows, symptom_table_rows
from scribe.ranking.network import train_condition_network
from scribe.ranking.ovr_lr import LrConfig, LrVariant, train_ovr_lr
from scribe.ranking.symptoms import fit_symptom_table, train_symptom_lr, train_symptom_nb
from scribe.resources import default_negation_lexicon
from scribe.text import word_tokens

CORPUS_KNOBS = dict(trigger_rate_nohist=0.010, trigger_rate_hist=0.22,
                    hist_gain=0.30, history_rate_hi=0.135,
                    history_rate_lo=0.085, confound_rate=0.30)

t0 = time.time()
cfg = GeneratorConfig(seed=7, n_visits=10_000, **CORPUS_KNOBS)
gen = generate_corpus(cfg)
neg = default_negation_lexicon()
train, test = train_test_split(gen.visits)
contexts = [v.context for v in train]
vocab = fit_tfidf([c.triage_text for c in contexts])
stats = fit_population_stats([c.vitals for c in contexts])
delay_rates = fit_delay_rates(contexts, gen.ontology)
ds = build_condition_dataset(train, gen.ontology, vocab, neg, delay_rates)
ds_test = build_condition_dataset(test, gen.ontology, vocab, neg, delay_rates)
records = [build_record(v.context, v.note_text(), gen.ontology, neg) for v in test]

table_rows = symptom_table_rows(train, gen.ontology, stats, neg)
symptom_table = fit_symptom_table(table_rows, gen.ontology)
feature_rows = symptom_feature_rows(train, gen.ontology, neg)
complaints = sorted({c.chief_complaint for c in contexts})
symptom_nb = train_symptom_nb(feature_rows, gen.ontology, complaints)
symptom_lr = train_symptom_lr(feature_rows, gen.ontology, complaints)

lrc = LrConfig(iterations=300)
lr_text = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_ONLY, lrc)
lr_ehr = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR, lrc)
lr_delay = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR_DELAY,
                        lrc, delay_u=ds.delay_u)
print(f"setup+LRs {time.time()-t0:.0f}s", flush=True)

X_tr = np.hstack([ds.X_ehr, ds.delay_u])
X_te = np.hstack([ds_test.X_ehr, ds_test.delay_u])
info = gen.tables["condition"]
planted = info["planted_buckets"]
trig_tok = info["trigger_tokens"]
token_sets = [frozenset(word_tokens(v.context.triage_text)) for v in test]
probe_names = None


def bundle_with(network):
    return ModelBundle(
        ontology=gen.ontology, vocab=vocab, stats=stats,
        delay_rates=delay_rates, bucket_ids=ds.bucket_ids, network=network,
        lr_text=lr_text, lr_ehr=lr_ehr, lr_delay=lr_delay,
        symptom_table=symptom_table, symptom_nb=symptom_nb,
        symptom_lr=symptom_lr, complaints=complaints)


def series(bundle, model):
    eng = contextual_engine(bundle, condition_model=model, name=model)
    return per_record_metrics(records, eng)[ConceptType.CONDITION]["mrr"]


# computed once from the first candidate's bundle; LR rankers ignore the net
s_delay = None

CANDIDATES = [
    ("ep500 lr.10", NetworkConfig(hidden_text=96, hidden_ehr=256,
                                  epochs=500, learning_rate=0.1, l2=1e-4)),
    ("ep560 lr.10", NetworkConfig(hidden_text=96, hidden_ehr=256,
                                  epochs=560, learning_rate=0.1, l2=1e-4)),
    ("ep450 lr.12", NetworkConfig(hidden_text=96, hidden_ehr=256,
                                  epochs=450, learning_rate=0.12, l2=1e-4)),
]

for label, nc in CANDIDATES:
    t1 = time.time()
    net = train_condition_network(ds.X_text, X_tr, ds.Y, nc)
    b = bundle_with(net)
    if s_delay is None:
        s_delay = series(b, "lr_delay")
    s_net = series(b, "network")
    pt, lo, hi = bootstrap_gap_ci(s_net, s_delay)
    flag = "OK " if pt >= 0 and lo > -0.01 else "BAD"

    P = net.bucket_scores(ds_test.X_text, X_te)
    bidx = {bk: i for i, bk in enumerate(ds_test.bucket_ids)}
    hits = total = 0
    for bk in planted:
        tok, j = trig_tok[bk], bidx[bk]
        for i in range(len(test)):
            if tok in token_sets[i]:
                total += 1
                hits += j in np.argsort(-P[i], kind="stable")[:3]

    if probe_names is None:
        probe_names = tuple(vocab.feature_names()
                            + [f"bucket:{bk}" for bk in ds_test.bucket_ids]
                            + [f"delay:{bk}" for bk in ds_test.bucket_ids])
    pd = ProbeDataset(X_text=ds_test.X_text, X_ehr=X_te,
                      feature_names=probe_names)
    pok = 0
    for bk in planted:
        weights = linear_probe(net, bidx[bk], pd)
        pok += trig_tok[bk] in [nm for nm, wt in weights if wt > 0][:5]

    print(f"{label}: net={np.mean(s_net):.4f} delay={np.mean(s_delay):.4f} | "
          f"{flag} n-d={pt:+.4f} [{lo:+.4f},{hi:+.4f}] | "
          f"top3={hits}/{total}={hits/max(1,total):.3f} probes={pok}/10 "
          f"({time.time()-t1:.0f}s)", flush=True)

print(f"total {time.time()-t0:.0f}s", flush=True)
