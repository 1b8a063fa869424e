"""Model-hyperparameter probe on a fixed corpus: LR variants without
retraining the network, then network epochs against the frozen LRs."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import ModelBundle, contextual_engine
from scribe.evaluation import bootstrap_gap_ci, build_record, per_record_metrics
from scribe.features import fit_delay_rates, fit_population_stats, fit_tfidf
from scribe.ontology import ConceptType
from scribe.ranking import NetworkConfig, build_condition_dataset
from scribe.ranking.network import train_condition_network
from scribe.ranking.ovr_lr import LrConfig, LrVariant, train_ovr_lr
from scribe.ranking.symptoms import fit_symptom_table
from scribe.ranking.dataset import symptom_feature_rows, symptom_table_rows
from scribe.ranking.symptoms import train_symptom_lr, train_symptom_nb
from scribe.resources import default_negation_lexicon

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
print(f"setup {time.time()-t0:.0f}s", flush=True)

# symptom models: trained once, only needed to fill the bundle slots
table_rows = symptom_table_rows(train, gen.ontology, stats, neg)
symptom_table = fit_symptom_table(table_rows, gen.ontology)
feature_rows = symptom_feature_rows(train, gen.ontology, neg)
complaints = sorted({c.chief_complaint for c in contexts})
symptom_nb = train_symptom_nb(feature_rows, gen.ontology, complaints)
symptom_lr = train_symptom_lr(feature_rows, gen.ontology, complaints)
stub_net = train_condition_network(
    ds.X_text, np.hstack([ds.X_ehr, ds.delay_u]), ds.Y,
    NetworkConfig(hidden_text=8, hidden_ehr=16, epochs=1))
print(f"shared models {time.time()-t0:.0f}s", flush=True)


def bundle_with(network, lr_text, lr_ehr, lr_delay):
    return ModelBundle(
        ontology=gen.ontology, vocab=vocab, stats=stats,
        delay_rates=delay_rates, bucket_ids=ds.bucket_ids, network=network,
        lr_text=lr_text, lr_ehr=lr_ehr, lr_delay=lr_delay,
        symptom_table=symptom_table, symptom_nb=symptom_nb,
        symptom_lr=symptom_lr, complaints=complaints)


def condition_series(bundle, model):
    eng = contextual_engine(bundle, condition_model=model, name=model)
    return per_record_metrics(records, eng)[ConceptType.CONDITION]["mrr"]


LR_CANDIDATES = [
    ("base   it200 l2=1e-3", LrConfig()),
    ("lowreg it200 l2=5e-4", LrConfig(l2=5e-4)),
    ("hireg  it200 l2=2e-3", LrConfig(l2=2e-3)),
    ("long   it300 l2=1e-3", LrConfig(iterations=300)),
    ("longlo it300 l2=5e-4", LrConfig(iterations=300, l2=5e-4)),
    ("min    it200 l2=3e-4", LrConfig(l2=3e-4)),
]

results = {}
for label, lrc in LR_CANDIDATES:
    t1 = time.time()
    lr_text = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_ONLY, lrc)
    lr_ehr = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR, lrc)
    lr_delay = train_ovr_lr(ds.X_text, ds.X_ehr, ds.Y, LrVariant.TEXT_EHR_DELAY,
                            lrc, delay_u=ds.delay_u)
    b = bundle_with(stub_net, lr_text, lr_ehr, lr_delay)
    s_text = condition_series(b, "lr_text")
    s_ehr = condition_series(b, "lr_ehr")
    s_delay = condition_series(b, "lr_delay")
    g1 = bootstrap_gap_ci(s_delay, s_ehr)
    g2 = bootstrap_gap_ci(s_ehr, s_text)
    results[label] = (np.mean(s_delay), s_delay)
    ok1 = "OK " if g1[0] >= 0 and g1[1] > -0.01 else "BAD"
    ok2 = "OK " if g2[0] >= 0 and g2[1] > -0.01 else "BAD"
    print(f"{label}: delay={np.mean(s_delay):.4f} ehr={np.mean(s_ehr):.4f} "
          f"text={np.mean(s_text):.4f} | {ok1} d-e={g1[0]:+.4f} "
          f"[{g1[1]:+.4f},{g1[2]:+.4f}] | {ok2} e-t={g2[0]:+.4f} "
          f"[{g2[1]:+.4f},{g2[2]:+.4f}]  ({time.time()-t1:.0f}s)",
          flush=True)

print(f"\nLR probe done {time.time()-t0:.0f}s", flush=True)
