"""Combined calibration probe: planted recovery + model orderings, one train."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import standard_engines, train_models
from scribe.evaluation import (bootstrap_gap_ci, build_record, evaluate_corpus,
                               per_record_metrics)
from scribe.ontology import ConceptType
from scribe.ranking import ProbeDataset, build_condition_dataset, linear_probe
from scribe.resources import default_negation_lexicon, default_trigger_lexicon
from scribe.text import word_tokens

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
# extra args: generator knob overrides as key=value; "l2=..." goes to the net
overrides = {}
net_l2 = None
net_epochs = 300
for arg in sys.argv[2:]:
    key, _, val = arg.partition("=")
    if key == "l2":
        net_l2 = float(val)
    elif key == "epochs":
        net_epochs = int(val)
    else:
        overrides[key] = float(val)

t0 = time.time()
cfg = GeneratorConfig(seed=7, n_visits=n, **overrides)
gen = generate_corpus(cfg)
print(f"gen {time.time()-t0:.1f}s visits={len(gen.visits)} overrides={overrides} "
      f"l2={net_l2}", flush=True)

neg = default_negation_lexicon()
trig = default_trigger_lexicon()
train, test = train_test_split(gen.visits)

net_cfg = None
if net_l2 is not None or net_epochs != 300:
    from scribe.ranking import NetworkConfig
    kw = {} if net_l2 is None else {"l2": net_l2}
    net_cfg = NetworkConfig(hidden_text=96, hidden_ehr=256,
                            epochs=net_epochs, learning_rate=0.1, **kw)

t1 = time.time()
bundle = train_models(train, gen.ontology, neg, net_config=net_cfg)
print(f"train {time.time()-t1:.1f}s vocab={bundle.vocab.size}", flush=True)

# ---- planted recovery (network top-3 + probes) ----
info = gen.tables["condition"]
planted = info["planted_buckets"]
trig_tok = info["trigger_tokens"]
ds_test = build_condition_dataset(test, gen.ontology, bundle.vocab, neg,
                                  bundle.delay_rates)
X_te = np.hstack([ds_test.X_ehr, ds_test.delay_u])
P = bundle.network.bucket_scores(ds_test.X_text, X_te)
bidx = {b: i for i, b in enumerate(ds_test.bucket_ids)}
token_sets = [frozenset(word_tokens(v.context.triage_text)) for v in test]
hits = total = 0
for b in planted:
    tok, j = trig_tok[b], bidx[b]
    h = t = 0
    for i in range(len(test)):
        if tok not in token_sets[i]:
            continue
        t += 1
        if j in np.argsort(-P[i], kind="stable")[:3]:
            h += 1
    hits += h
    total += t
print(f"top-3 pooled: {hits}/{total} = {hits/max(1,total):.3f} (need >= 0.80)",
      flush=True)

names = tuple(bundle.vocab.feature_names()
              + [f"bucket:{b}" for b in ds_test.bucket_ids]
              + [f"delay:{b}" for b in ds_test.bucket_ids])
pd = ProbeDataset(X_text=ds_test.X_text, X_ehr=X_te, feature_names=names)
ok = 0
for b in planted:
    weights = linear_probe(bundle.network, bidx[b], pd)
    pos = [nm for nm, wt in weights if wt > 0][:5]
    ok += trig_tok[b] in pos
print(f"probe hits: {ok}/{len(planted)} (need >= 8)  [{time.time()-t0:.0f}s]",
      flush=True)

# ---- orderings ----
t2 = time.time()
records = [build_record(v.context, v.note_text(), gen.ontology, neg) for v in test]
engines = standard_engines(bundle)
report = evaluate_corpus(records, engines, gen.ontology, trigger_lexicon=trig,
                         replay_engine="network")
print(f"eval {time.time()-t2:.1f}s records={len(records)}")

print("\nCONDITION (need network >= lr_delay >= lr_ehr >= lr_text):")
for name in ("network", "lr_delay", "lr_ehr", "lr_text", "frequency", "spell"):
    m = report.per_engine[name].get("CONDITION")
    print(f"  {name:10s} mrr={m['mrr']:.3f} map={m['map']:.3f}")

print("\nSYMPTOM (need table_cv >= table_c >= nb >= lr_sym):")
for name in ("table_cv", "table_c", "nb", "lr_sym", "frequency", "spell"):
    m = report.per_engine[name].get("SYMPTOM")
    print(f"  {name:10s} mrr={m['mrr']:.3f} map={m['map']:.3f}")

b = report.burden
print(f"\nburden: mean={b['mean']:.2f} base={b['baseline_mean']:.2f} "
      f"reduction={b['reduction']:.3f} dominated={b['dominated']}")
s = report.scope
print(f"scope: auto={s['fraction_auto_triggered']:.3f} "
      f"correct={s['fraction_correct_type']:.3f}")

series = {}
for name in ("network", "lr_delay", "lr_ehr", "lr_text",
             "table_cv", "table_c", "nb", "lr_sym"):
    ct = (ConceptType.CONDITION
          if name.startswith(("net", "lr_")) and name != "lr_sym"
          else ConceptType.SYMPTOM)
    series[name] = per_record_metrics(records, engines[name])[ct]["mrr"]

print("\nadjacent gaps (point, ci_low, ci_high):")
for hi, lo in (("network", "lr_delay"), ("lr_delay", "lr_ehr"),
               ("lr_ehr", "lr_text"), ("table_cv", "table_c"),
               ("table_c", "nb"), ("nb", "lr_sym")):
    pt, lo_ci, hi_ci = bootstrap_gap_ci(series[hi], series[lo])
    flag = "OK " if pt >= 0 and lo_ci > -0.01 else "BAD"
    print(f"  {flag} {hi:8s} - {lo:8s} = {pt:+.4f} [{lo_ci:+.4f}, {hi_ci:+.4f}]")
print(f"total {time.time()-t0:.0f}s")
