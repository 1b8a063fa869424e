"""Command-line entry points."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .corpusgen import GeneratorConfig, generate_corpus, load_corpus, train_test_split
from .engine import ModelBundle, standard_engines, train_models
from .evaluation import POLICY_WINDOW, build_record, evaluate_corpus
from .extraction import NegationLexicon, extract_concepts
from .features import (
    PatientContext,
    categorical_vitals,
    encode_tfidf,
    most_abnormal_vital,
)
from .ontology import OntologyError, build_ontology
from .ranking import ProbeDataset, build_condition_dataset, linear_probe
from .resources import (
    data_path,
    default_negation_lexicon,
    default_trigger_lexicon,
    load_ontology,
)

MODEL_CHOICES = ("all", "net", "lr", "lr-ehr", "lr-delay",
                 "symptom-table", "symptom-lr", "symptom-nb")


@click.group()
def main() -> None:
    """Contextual autocomplete for clinical notes."""


@main.group()
def ontology() -> None:
    """Ontology file utilities."""


@ontology.command("validate")
@click.argument("path", type=click.Path(exists=True))
def ontology_validate(path: str) -> None:
    try:
        onto = load_ontology(path)
    except OntologyError as exc:
        click.echo(f"INVALID: {exc}", err=True)
        sys.exit(1)
    n_syn = sum(len(e.synonyms) for e in onto.entries.values())
    click.echo(f"OK: {len(onto.entries)} entries, {onto.bucket_count} buckets, "
               f"{n_syn} synonyms")


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None,
              help="Negation lexicon JSON; defaults to the packaged one.")
def extract(file: str, ontology_path: str, lexicon_path: str | None) -> None:
    """Emit JSONL mentions for a text file."""
    onto = load_ontology(ontology_path)
    lexicon = (NegationLexicon.from_file(lexicon_path) if lexicon_path
               else default_negation_lexicon())
    text = Path(file).read_text(encoding="utf-8")
    for m in extract_concepts(text, onto, lexicon):
        click.echo(json.dumps({
            "start": m.start, "end": m.end, "synonym": m.matched_synonym,
            "entry": m.entry_id, "polarity": m.polarity.value,
        }))


@main.command()
@click.option("--context", "context_path", required=True, type=click.Path(exists=True),
              help="Patient context JSON file.")
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
def featurize(context_path: str, ontology_path: str, models_dir: str) -> None:
    """Dump the feature view of one patient context."""
    onto = load_ontology(ontology_path)
    bundle = ModelBundle.load(models_dir, onto)
    ctx = PatientContext.from_json(json.loads(Path(context_path).read_text()))
    vec = encode_tfidf(bundle.vocab, ctx.triage_text)
    names = bundle.vocab.feature_names()
    x_text, x_ehr, u = bundle.condition_inputs(ctx)
    out = {
        "tfidf": {names[i]: round(w, 6) for i, w in zip(vec.indices, vec.weights)},
        "vitals": categorical_vitals(ctx.vitals),
        "most_abnormal_vital": list(most_abnormal_vital(ctx.vitals, bundle.stats)),
        "ehr_buckets": {b: {"present": float(x_ehr[j]), "delay_u": round(float(u[j]), 6)}
                        for j, b in enumerate(bundle.bucket_ids) if x_ehr[j] > 0},
    }
    click.echo(json.dumps(out, indent=1))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of generator settings.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--visits", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--base-ontology", "base_ontology", type=click.Path(exists=True),
              default=None, help="Plant the corpus over an existing ontology.")
@click.option("--demo", is_flag=True,
              help="Shorthand: plant over the packaged demo ontology.")
def generate(config_path, out_dir, visits, seed, base_ontology, demo) -> None:
    """Generate a synthetic corpus with known planted structure."""
    overrides = json.loads(Path(config_path).read_text()) if config_path else {}
    cfg = GeneratorConfig(**overrides)
    if visits is not None:
        cfg.n_visits = visits
    if seed is not None:
        cfg.seed = seed
    onto = None
    if demo:
        onto = load_ontology(data_path("demo_ontology.json"))
    elif base_ontology:
        onto = load_ontology(base_ontology)
    corpus = generate_corpus(cfg, ontology=onto)
    paths = corpus.save(out_dir)
    click.echo(json.dumps({"visits": len(corpus.visits), **paths}))


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--model", "model", type=click.Choice(MODEL_CHOICES), default="all")
@click.option("--train-fraction", type=float, default=0.8)
def train(corpus_path, ontology_path, out_dir, model, train_fraction) -> None:
    """Fit rankers on the training split of a corpus."""
    onto = load_ontology(ontology_path)
    visits = load_corpus(corpus_path)
    train_visits, _ = train_test_split(visits, train_fraction)
    bundle = train_models(train_visits, onto, default_negation_lexicon())
    out = Path(out_dir)
    bundle.save(out)
    if model != "all":
        # every model file references the shared vocabulary/stats, so those
        # are written regardless; name the file holding the requested model
        files = {
            "net": "network.json", "lr": "lr_text.json", "lr-ehr": "lr_ehr.json",
            "lr-delay": "lr_delay.json", "symptom-table": "symptom_table.json",
            "symptom-lr": "symptom_lr.json", "symptom-nb": "symptom_nb.json",
        }
        click.echo(f"requested model is in {out / files[model]}")
    click.echo(f"models written to {out}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(sorted(POLICY_WINDOW)), default="top5")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--train-fraction", type=float, default=0.8)
def evaluate(corpus_path, ontology_path, models_dir, policy, out_path,
             train_fraction) -> None:
    """Score every ranker on the held-out split and write a report."""
    onto = load_ontology(ontology_path)
    bundle = ModelBundle.load(models_dir, onto)
    visits = load_corpus(corpus_path)
    _, test_visits = train_test_split(visits, train_fraction)
    negation = default_negation_lexicon()
    triggers = default_trigger_lexicon()
    records = [build_record(v.context, v.note_text(), onto, negation)
               for v in test_visits]
    report = evaluate_corpus(records, standard_engines(bundle), onto, triggers,
                             policy=policy)
    report.save(out_path)
    click.echo(f"report written to {out_path}")


@main.command()
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--bucket", required=True, help="Bucket id to probe.")
@click.option("--l1", type=float, default=1e-3)
@click.option("--top", type=int, default=15)
@click.option("--train-fraction", type=float, default=0.8)
def probe(models_dir, ontology_path, corpus_path, bucket, l1, top,
          train_fraction) -> None:
    """Fit a sparse linear surrogate to one bucket's network logit."""
    onto = load_ontology(ontology_path)
    bundle = ModelBundle.load(models_dir, onto)
    visits = load_corpus(corpus_path)
    _, test_visits = train_test_split(visits, train_fraction)
    ds = build_condition_dataset(test_visits, onto, bundle.vocab,
                                 default_negation_lexicon(), bundle.delay_rates)
    # the network's EHR branch consumes presence and recency side by side,
    # so the probe design matrix must carry both column blocks
    names = (bundle.vocab.feature_names()
             + [f"bucket:{b}" for b in bundle.bucket_ids]
             + [f"delay:{b}" for b in bundle.bucket_ids])
    probe_ds = ProbeDataset(X_text=ds.X_text,
                            X_ehr=np.hstack([ds.X_ehr, ds.delay_u]),
                            feature_names=tuple(names))
    if bucket not in bundle.bucket_ids:
        raise click.ClickException(f"unknown condition bucket {bucket!r}")
    b = bundle.bucket_ids.index(bucket)
    weights = linear_probe(bundle.network, b, probe_ds, l1_strength=l1)
    for name, w in weights[:top]:
        click.echo(f"{w:+.4f}  {name}")


@main.command()
@click.option("--ontology", "ontology_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None,
              help="Corpus whose patients populate the demo picker.")
@click.option("--demo-patients", type=int, default=25)
def serve(ontology_path, models_dir, port, host, ui_dir, corpus_path,
          demo_patients) -> None:
    """Run the suggestion service."""
    import uvicorn

    from .service import create_app

    onto = load_ontology(ontology_path)
    bundle = ModelBundle.load(models_dir, onto)
    demo_contexts = None
    if corpus_path:
        demo_contexts = [v.context for v in load_corpus(corpus_path)[:demo_patients]]
    app = create_app(onto, bundle, demo_contexts=demo_contexts, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
