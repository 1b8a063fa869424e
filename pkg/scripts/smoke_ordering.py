"""Quick calibration probe: model MRR orderings on a generated corpus."""

import sys
import time

sys.path.insert(0, "src")

from scribe.corpusgen import GeneratorConfig, generate_corpus, train_test_split
from scribe.engine import standard_engines, train_models
from scribe.evaluation import (bootstrap_gap_ci, build_record, evaluate_corpus,
                               per_record_metrics)
from scribe.ontology import ConceptType
from scribe.resources import default_negation_lexicon, default_trigger_lexicon

n = int(sys.argv[1]) if len(sys.argv) > 1 else 4000

t0 = time.time()
cfg = GeneratorConfig(seed=7, n_visits=n)
gen = generate_corpus(cfg)
print(f"gen {time.time()-t0:.1f}s visits={len(gen.visits)}")

neg = default_negation_lexicon()
trig = default_trigger_lexicon()
train, test = train_test_split(gen.visits)

t0 = time.time()
bundle = train_models(train, gen.ontology, neg)
print(f"train {time.time()-t0:.1f}s vocab={bundle.vocab.size}")

t0 = time.time()
records = [build_record(v.context, v.note_text(), gen.ontology, neg) for v in test]
engines = standard_engines(bundle)
report = evaluate_corpus(records, engines, gen.ontology, trigger_lexicon=trig, replay_engine="network")
print(f"eval {time.time()-t0:.1f}s records={len(records)}")

print("\nCONDITION (need network >= lr_delay >= lr_ehr >= lr_text):")
for name in ("network", "lr_delay", "lr_ehr", "lr_text", "frequency", "spell"):
    m = report.per_engine[name].get("CONDITION")
    print(f"  {name:10s} mrr={m['mrr']:.3f} ci={m['mrr_ci']:.3f} map={m['map']:.3f}")

print("\nSYMPTOM (need table_cv >= table_c >= nb >= lr_sym):")
for name in ("table_cv", "table_c", "nb", "lr_sym", "frequency", "spell"):
    m = report.per_engine[name].get("SYMPTOM")
    print(f"  {name:10s} mrr={m['mrr']:.3f} ci={m['mrr_ci']:.3f} map={m['map']:.3f}")

b = report.burden
print(f"\nburden: mean={b['mean']:.2f} base={b['baseline_mean']:.2f} "
      f"reduction={b['reduction']:.3f} dominated={b['dominated']}")
s = report.scope
print(f"scope: auto={s['fraction_auto_triggered']:.3f} correct={s['fraction_correct_type']:.3f}")

series = {}
for name in ("network", "lr_delay", "lr_ehr", "lr_text",
             "table_cv", "table_c", "nb", "lr_sym"):
    ct = ConceptType.CONDITION if name.startswith(("net", "lr_")) and name != "lr_sym" else ConceptType.SYMPTOM
    series[name] = per_record_metrics(records, engines[name])[ct]["mrr"]

print("\nadjacent gaps (point, ci_low, ci_high):")
for hi, lo in (("network", "lr_delay"), ("lr_delay", "lr_ehr"), ("lr_ehr", "lr_text"),
               ("table_cv", "table_c"), ("table_c", "nb"), ("nb", "lr_sym")):
    pt, lo_ci, hi_ci = bootstrap_gap_ci(series[hi], series[lo])
    flag = "OK " if pt >= 0 and lo_ci > -0.01 else "BAD"
    print(f"  {flag} {hi:8s} - {lo:8s} = {pt:+.4f} [{lo_ci:+.4f}, {hi_ci:+.4f}]")
