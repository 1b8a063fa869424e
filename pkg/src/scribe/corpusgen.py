"""Deterministic synthetic corpus with planted conditional structure.

Every learned behavior the test suite checks is planted here explicitly.

Conditions: ten buckets get a trigger token that appears in triage text and
raises relevance to a known level; history mentions raise it with a known
recency decay; a comorbidity boost ties partner buckets together so only a
model reading text and history jointly can capture it. History is the
dominant signal, text secondary, matching the intended model ordering.

Symptoms are sampled from P(s | complaint, class) where class is derived
from the REALIZED most-abnormal-vital key of the sampled vitals, computed
with the same percentile statistic the rankers use. The empirical
(complaint, vital) table therefore conditions on the exact generative
statistic. Complaints paired by a shared driving vital boost symptoms their
pool neighbor suppresses under the same vital label, so any model assuming
the label acts independently of the complaint is systematically misled.

Labs and medications are sampled so per-patient history counts predict what
the note orders. The generator emits the exact conditional tables it
sampled from. One seed, byte-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import (
    PatientContext,
    TriageVitals,
    fit_population_stats,
    vital_state_key,
)
from .ontology import ConceptType, Ontology, build_ontology

# Words used by note templates; generated vocabulary must avoid them.
_RESERVED = {
    "patient", "is", "a", "year", "old", "presenting", "with", "history",
    "of", "noted", "denies", "reports", "positive", "for", "otherwise",
    "negative", "none", "no", "acute", "distress", "concern", "will",
    "check", "and", "or", "yo", "c/o", "pmh", "medications", "ros",
    "physical", "exam", "mdm", "hpi", "stable", "continues", "takes",
    "evaluation", "adult", "plan", "discussed",
}

_SYLLABLES = ("ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "na",
              "pe", "qui", "ro", "sa", "tu", "ve", "wi", "xa", "zi", "bo",
              "cu", "da", "fe", "gi", "hu", "ka", "le", "mi", "no", "pu",
              "ra", "se", "ti", "vo", "wa", "xe", "zo", "bi", "co", "du",
              "bra", "cle", "dro", "fla", "gri", "pla", "sto", "tra")


class WordFactory:
    """Unique pronounceable pseudo-words, deterministic under one rng."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._used: set[str] = set(_RESERVED)

    def reserve(self, words) -> None:
        self._used.update(words)

    def word(self, syllables: int = 3) -> str:
        # escalate length if the requested size is close to exhausted
        attempts = 0
        while True:
            parts = self._rng.choice(len(_SYLLABLES), size=syllables)
            w = "".join(_SYLLABLES[i] for i in parts)
            if w not in self._used and len(w) >= 4:
                self._used.add(w)
                return w
            attempts += 1
            if attempts % 200 == 0:
                syllables += 1

    def phrase(self, n_words: int) -> str:
        return " ".join(self.word(int(self._rng.integers(2, 4)))
                        for _ in range(n_words))


# Center band plus tails, disjoint by construction. Tails are populated by
# complaint-driven draws and a small background rate, so every vital has
# mass beyond both center edges and no center draw can look maximally
# abnormal merely for sitting at the edge of an unbuffered band.
_VITAL_BANDS: dict[str, dict[str, tuple[float, float]]] = {
    "temperature_f": {"center": (97.5, 99.4), "low": (95.2, 96.6), "high": (101.6, 103.8)},
    "heart_rate_bpm": {"center": (64, 96), "low": (40, 54), "high": (108, 138)},
    "resp_rate_bpm": {"center": (13, 19), "low": (7.5, 10.5), "high": (22, 30)},
    "spo2_pct": {"center": (95.5, 99.4), "low": (84, 92.5), "high": (99.5, 100.0)},
    "systolic_mmhg": {"center": (105, 135), "low": (82, 100), "high": (152, 188)},
    "diastolic_mmhg": {"center": (62, 84), "low": (42, 58), "high": (96, 112)},
    "age_years": {"center": (22, 80), "low": (16, 21), "high": (81, 95)},
}

# Complaint-drivable (vital, side) slots and the bucket label each lands on.
_DRIVE_LABEL = {
    ("temperature_f", "high"): "HIGH",
    ("heart_rate_bpm", "high"): "TACHYCARDIC",
    ("resp_rate_bpm", "high"): "HIGH",
    ("spo2_pct", "low"): "LOW",
    ("systolic_mmhg", "high"): "STAGE_2",
    ("diastolic_mmhg", "high"): "STAGE_2",
    ("temperature_f", "low"): "LOW",
    ("heart_rate_bpm", "low"): "BRADYCARDIC",
    ("resp_rate_bpm", "low"): "LOW",
}

_DRIVABLE = tuple(_DRIVE_LABEL)

_CLASSES = ("NONE", "SHARED", "SPECIFIC")


@dataclass
class GeneratorConfig:
    seed: int = 7
    n_visits: int = 2000
    # synthetic-ontology sizing (ignored when an ontology is supplied)
    n_condition_entries: int = 180
    n_condition_buckets: int = 60
    n_symptoms: int = 32
    n_labs: int = 30
    n_meds: int = 30
    synonyms_per_entry: int = 3
    # planted condition structure
    n_planted: int = 10
    trigger_rate_hist: float = 0.16
    trigger_rate_nohist: float = 0.014
    trigger_write_rate: float = 0.95
    trigger_spurious_rate: float = 0.001
    p_base: float = 0.005
    p_trigger: float = 0.88
    p_both: float = 0.96
    hist_floor: float = 0.20
    hist_gain: float = 0.42
    hist_tau_days: float = 30.0
    comorbid_boost: float = 0.45
    history_rate_hi: float = 0.18
    history_rate_lo: float = 0.04
    delay_scale_days: float = 35.0
    no_history_fraction: float = 0.26
    # symptoms
    n_complaints: int = 8
    pool_size: int = 8
    pool_stride: int = 4
    p_state_shared: float = 0.33
    p_state_specific: float = 0.32
    background_tail_rate: float = 0.05
    confound_rate: float = 0.24
    vital_missing_rate: float = 0.06
    # note shape
    negated_mention_rate: float = 0.5
    distractor_fraction: float = 0.10
    noise_vocab: int = 150

    def validate(self) -> None:
        probs = [self.p_base, self.p_trigger, self.p_both, self.hist_floor,
                 self.hist_floor + self.hist_gain, self.trigger_rate_hist,
                 self.trigger_rate_nohist, self.trigger_write_rate,
                 self.trigger_spurious_rate, self.confound_rate,
                 self.no_history_fraction, self.distractor_fraction,
                 self.p_state_shared + self.p_state_specific,
                 self.background_tail_rate, self.vital_missing_rate,
                 self.negated_mention_rate]
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValueError("generator probabilities must lie in [0, 1]")
        if not (0.0 <= self.history_rate_lo <= self.history_rate_hi <= 1.0):
            raise ValueError("history rates must satisfy 0 <= lo <= hi <= 1")
        if self.n_planted > self.n_condition_buckets:
            raise ValueError("more planted buckets than condition buckets")
        if self.pool_size < 6:
            raise ValueError("symptom pools need >= 6 slots for the class boosts")


@dataclass
class Visit:
    context: PatientContext
    sections: dict[str, str]

    _HEADERS = (("HPI", "HPI:"), ("PMH", "PMH:"), ("MEDICATIONS", "MEDICATIONS:"),
                ("ROS", "ROS:"), ("PHYSICAL_EXAM", "PHYSICAL EXAM:"), ("MDM", "MDM:"))

    def note_text(self) -> str:
        lines = []
        for key, header in self._HEADERS:
            body = self.sections.get(key)
            if body is not None:
                lines.append(f"{header} {body}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        doc = self.context.to_json()
        doc["note"] = {"sections": self.sections}
        return doc

    @classmethod
    def from_json(cls, raw: dict) -> "Visit":
        return cls(context=PatientContext.from_json(raw),
                   sections=dict(raw["note"]["sections"]))


def save_corpus(visits: list[Visit], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in visits:
            fh.write(json.dumps(v.to_json()) + "\n")


def load_corpus(path: str | Path) -> list[Visit]:
    visits = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                visits.append(Visit.from_json(json.loads(line)))
    return visits


def train_test_split(visits: list[Visit], train_fraction: float = 0.8):
    cut = int(len(visits) * train_fraction)
    return visits[:cut], visits[cut:]


# ---------------------------------------------------------------------------
# Synthetic ontology.


def generate_ontology_doc(cfg: GeneratorConfig, words: WordFactory) -> dict:
    buckets = [{"id": f"gb{b:03d}", "name": words.phrase(1)}
               for b in range(cfg.n_condition_buckets)]
    entries = []
    cui = 1

    def add(eid: str, ctype: str, bucket: str | None, rank: int) -> None:
        nonlocal cui
        name = words.phrase(1) if rank % 3 else words.phrase(2)
        syns = [words.word(2) for _ in range(max(0, cfg.synonyms_per_entry - 1))]
        doc = {"id": eid, "name": name, "synonyms": syns,
               "cuis": [f"G{cui:07d}"], "type": ctype,
               "frequency": int(50000 / (rank + 2))}
        if bucket is not None:
            doc["bucket"] = bucket
        entries.append(doc)
        cui += 1

    for i in range(cfg.n_condition_entries):
        add(f"gc{i:03d}", "CONDITION", f"gb{i % cfg.n_condition_buckets:03d}", i)
    for i in range(cfg.n_symptoms):
        buckets.append({"id": f"gsb{i:03d}", "name": f"symptom group {i}"})
        add(f"gs{i:03d}", "SYMPTOM", f"gsb{i:03d}", i)
    for i in range(cfg.n_labs):
        add(f"gl{i:03d}", "LAB", None, i)
    for i in range(cfg.n_meds):
        add(f"gm{i:03d}", "MEDICATION", None, i)
    return {"buckets": buckets, "entries": entries}


# ---------------------------------------------------------------------------
# Symptom plan: pools, paired drive labels, per-class conditionals.


def _complaint_plan(cfg: GeneratorConfig, words: WordFactory,
                    symptom_ids: list[str]) -> dict[str, dict]:
    """Pools overlap between neighbors by (pool_size - stride) symptoms.

    Complaint pairs (0,1), (2,3), ... share a SHARED driving vital; offset
    pairs (7,0), (1,2), ... share a SPECIFIC one. With stride equal to
    pool_size - stride, the positions one complaint suppresses under a
    label are exactly the positions its pair partner boosts under the same
    label: every class-informative symptom flips sign between the two
    complaints whose pools contain it. A model that assumes a vital label
    acts on a symptom independently of the complaint pools those
    occurrences and is misled in the suppressed complaint's contexts.
    """
    n_s = len(symptom_ids)
    base = [0.55, 0.42, 0.32, 0.24, 0.16, 0.11, 0.08, 0.05]
    plan: dict[str, dict] = {}
    for c in range(cfg.n_complaints):
        name = words.word(3)
        shared_slot = _DRIVABLE[(c // 2) % 4]
        # one systemic slot for every pair keeps the flip total: each
        # suppressed position has its boosted twin under the same label
        specific_slot = _DRIVABLE[4]
        pool = [symptom_ids[(c * cfg.pool_stride + j) % n_s]
                for j in range(cfg.pool_size)]
        probs = {cls: {} for cls in _CLASSES}
        last = cfg.pool_size - 1
        for j, s in enumerate(pool):
            b = base[j % len(base)]
            probs["NONE"][s] = b
            if j in (2, 3):
                probs["SHARED"][s] = 0.80 if j == 2 else 0.68
            elif j in (last - 1, last):
                probs["SHARED"][s] = 0.06 if j == last - 1 else 0.04
            else:
                probs["SHARED"][s] = round(b * 0.55, 4)
            if j in (4, 5):
                probs["SPECIFIC"][s] = 0.72 if j == 4 else 0.60
            elif j in (0, 1):
                probs["SPECIFIC"][s] = 0.12 if j == 0 else 0.08
            else:
                probs["SPECIFIC"][s] = round(b * 0.55, 4)
        plan[name] = {
            "pool": pool,
            "shared_slot": shared_slot,
            "specific_slot": specific_slot,
            "shared_key": f"{shared_slot[0]}:{_DRIVE_LABEL[shared_slot]}",
            "specific_key": f"{specific_slot[0]}:{_DRIVE_LABEL[specific_slot]}",
            "p_s_given_class": probs,
        }
    return plan


def _sample_band(rng: np.random.Generator, band: tuple[float, float]) -> float:
    return round(float(rng.uniform(band[0], band[1])), 1)


def _outer_quarter(band: tuple[float, float], side: str) -> tuple[float, float]:
    lo, hi = band
    span = hi - lo
    # the extreme quarter of the tail, away from the center band
    return (hi - span / 4, hi) if side == "high" else (lo, lo + span / 4)


def _sample_vitals(rng: np.random.Generator, cfg: GeneratorConfig,
                   drive: tuple[str, str] | None,
                   confound: tuple[str, str] | None = None) -> TriageVitals:
    values: dict[str, float] = {}
    for name, bands in _VITAL_BANDS.items():
        if rng.uniform() < cfg.vital_missing_rate:
            continue
        r = rng.uniform()
        if r < cfg.background_tail_rate:
            values[name] = _sample_band(rng, bands["low"])
        elif r < 2 * cfg.background_tail_rate:
            values[name] = _sample_band(rng, bands["high"])
        else:
            values[name] = _sample_band(rng, bands["center"])
    if confound is not None:
        # mildly abnormal co-finding; usually loses the argmax to the drive
        vital, side = confound
        values[vital] = _sample_band(rng, _VITAL_BANDS[vital][side])
    if drive is not None:
        vital, side = drive
        values[vital] = _sample_band(
            rng, _outer_quarter(_VITAL_BANDS[vital][side], side))
    return TriageVitals(**values)


# ---------------------------------------------------------------------------
# Corpus generation proper.


@dataclass
class GeneratedCorpus:
    ontology: Ontology
    ontology_doc: dict
    visits: list[Visit]
    tables: dict

    def save(self, out_dir: str | Path) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "ontology": str(out / "ontology.json"),
            "corpus": str(out / "corpus.jsonl"),
            "tables": str(out / "tables.json"),
        }
        Path(paths["ontology"]).write_text(json.dumps(self.ontology_doc, indent=1),
                                           encoding="utf-8")
        save_corpus(self.visits, paths["corpus"])
        Path(paths["tables"]).write_text(json.dumps(self.tables, indent=1, sort_keys=True),
                                         encoding="utf-8")
        return paths


def generate_corpus(
    cfg: GeneratorConfig, ontology: Ontology | None = None
) -> GeneratedCorpus:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    words = WordFactory(rng)

    if ontology is None:
        onto_doc = generate_ontology_doc(cfg, words)
        ontology = build_ontology(onto_doc)
    else:
        onto_doc = json.loads(ontology.serialize())
    # existing synonym words are off-limits for noise and trigger tokens
    for e in ontology.entries.values():
        for syn in e.synonyms:
            words.reserve(syn.split())

    cond_buckets = sorted({e.bucket_id for e in
                           ontology.entries_of_type(ConceptType.CONDITION)})
    n_planted = min(cfg.n_planted, len(cond_buckets))
    planted = cond_buckets[:n_planted]
    trigger_tokens = {b: words.word(3) for b in planted}
    partners = {planted[i + 1]: planted[i]
                for i in range(0, n_planted - 1, 2)}

    members = {b: [e for e in ontology.entries_of_type(ConceptType.CONDITION)
                   if e.bucket_id == b] for b in cond_buckets}
    member_weights = {
        b: np.array([e.empirical_frequency + 1 for e in es], dtype=float)
        for b, es in members.items()
    }
    for b in member_weights:
        member_weights[b] /= member_weights[b].sum()
    symptom_ids = [e.entry_id for e in ontology.entries_of_type(ConceptType.SYMPTOM)]
    lab_entries = ontology.entries_of_type(ConceptType.LAB)
    med_entries = ontology.entries_of_type(ConceptType.MEDICATION)
    plan = _complaint_plan(cfg, words, symptom_ids)
    complaint_names = sorted(plan)
    noise_words = [words.word(2) for _ in range(cfg.noise_vocab)]

    lab_weights = np.array([e.empirical_frequency for e in lab_entries], dtype=float)
    lab_weights /= lab_weights.sum()
    med_weights = np.array([e.empirical_frequency for e in med_entries], dtype=float)
    med_weights /= med_weights.sum()

    def weighted_entry(entries, weights):
        return entries[int(rng.choice(len(entries), p=weights))]

    def history_relevance(d: float) -> float:
        return cfg.hist_floor + cfg.hist_gain * math.exp(-d / cfg.hist_tau_days)

    # chronic-condition prevalence is far from uniform in practice, and the
    # gradient is what makes bucket priors worth learning
    n_b = len(cond_buckets)
    hist_rate = {b: cfg.history_rate_hi + (cfg.history_rate_lo - cfg.history_rate_hi)
                 * (i / max(1, n_b - 1))
                 for i, b in enumerate(cond_buckets)}

    # ---- phase 1: everything whose distribution is context-free ----------
    drafts: list[dict] = []
    for v in range(cfg.n_visits):
        pid = f"p{v:06d}"
        has_history = bool(rng.uniform() >= cfg.no_history_fraction)

        hist_bucket_age: dict[str, float] = {}
        ehr_mentions: dict[str, float] = {}
        if has_history:
            for b in cond_buckets:
                if rng.uniform() < hist_rate[b]:
                    d = round(float(rng.exponential(cfg.delay_scale_days)) + 0.5, 1)
                    hist_bucket_age[b] = d
                    entry = members[b][int(rng.choice(len(members[b]),
                                                      p=member_weights[b]))]
                    ehr_mentions[entry.entry_id] = d

        z_present = {}
        for b in planted:
            rate = (cfg.trigger_rate_hist if b in hist_bucket_age
                    else cfg.trigger_rate_nohist)
            z_present[b] = bool(rng.uniform() < rate)
        # the note of an encounter is messier than its drivers: a trigger
        # is usually written when active, and rarely appears without cause
        z_written = {}
        for b in planted:
            if z_present[b]:
                z_written[b] = bool(rng.uniform() < cfg.trigger_write_rate)
            else:
                z_written[b] = bool(rng.uniform() < cfg.trigger_spurious_rate)

        relevant: dict[str, bool] = {}
        for b in cond_buckets:
            z = z_present.get(b, False)
            h = b in hist_bucket_age
            if z and h:
                p = cfg.p_both
            elif z:
                p = cfg.p_trigger
            elif h:
                p = history_relevance(hist_bucket_age[b])
            else:
                p = cfg.p_base
            # comorbidity runs off the chart, not the current encounter: a
            # driver already on the problem list raises its partner's odds
            driver = partners.get(b)
            if driver is not None and driver in hist_bucket_age:
                p = min(0.98, p + cfg.comorbid_boost)
            relevant[b] = bool(rng.uniform() < p)

        note_conditions: list[str] = []
        for b in cond_buckets:
            if not relevant[b]:
                continue
            in_ehr = [e.entry_id for e in members[b] if e.entry_id in ehr_mentions]
            if in_ehr and rng.uniform() < 0.8:
                note_conditions.append(in_ehr[0])
            else:
                pick = members[b][int(rng.choice(len(members[b]),
                                                 p=member_weights[b]))]
                note_conditions.append(pick.entry_id)

        complaint = complaint_names[int(rng.integers(len(complaint_names)))]
        r = rng.uniform()
        confound = None
        if r < cfg.p_state_shared:
            drive = plan[complaint]["shared_slot"]
        elif r < cfg.p_state_shared + cfg.p_state_specific:
            drive = plan[complaint]["specific_slot"]
        else:
            drive = None
            # quiet presentations still show incidental abnormalities: one of
            # this complaint's driving vitals drifts abnormal while a decoy
            # vital goes further, so the label appears without its state
            if rng.uniform() < cfg.confound_rate:
                own = (plan[complaint]["shared_slot"],
                       plan[complaint]["specific_slot"])
                confound = own[int(rng.integers(2))]
                decoys = [s for s in _DRIVABLE if s not in own]
                drive = decoys[int(rng.integers(len(decoys)))]
        vitals = _sample_vitals(rng, cfg, drive, confound)

        lab_counts: dict[str, int] = {}
        med_counts: dict[str, int] = {}
        if has_history:
            for _ in range(int(rng.poisson(4))):
                e = weighted_entry(lab_entries, lab_weights)
                lab_counts[e.entry_id] = lab_counts.get(e.entry_id, 0) + 1 + int(rng.poisson(2))
            for _ in range(int(rng.poisson(3))):
                e = weighted_entry(med_entries, med_weights)
                med_counts[e.entry_id] = med_counts.get(e.entry_id, 0) + 1 + int(rng.poisson(1))

        def pick_for_note(counts: dict[str, int], entries, weights, p_hist: float):
            if counts and rng.uniform() < p_hist:
                ids = sorted(counts)
                w = np.array([counts[i] for i in ids], dtype=float)
                return ids[int(rng.choice(len(ids), p=w / w.sum()))]
            return weighted_entry(entries, weights).entry_id

        note_meds: list[str] = []
        for _ in range(1 + int(rng.integers(0, 3))):
            m = pick_for_note(med_counts, med_entries, med_weights, 0.7)
            if m not in note_meds:
                note_meds.append(m)
        note_labs: list[str] = []
        for _ in range(1 + int(rng.integers(0, 2))):
            lab = pick_for_note(lab_counts, lab_entries, lab_weights, 0.6)
            if lab not in note_labs:
                note_labs.append(lab)

        drafts.append({
            "pid": pid, "has_history": has_history, "ehr": ehr_mentions,
            "z": z_written, "conditions": note_conditions,
            "complaint": complaint, "vitals": vitals,
            "labs": lab_counts, "meds": med_counts,
            "note_meds": note_meds, "note_labs": note_labs,
        })

    # ---- phase 2: realized vital classes, symptoms, rendered notes -------
    stats = fit_population_stats([d["vitals"] for d in drafts])
    class_counts = {c: {cls: 0 for cls in _CLASSES} for c in complaint_names}
    visits: list[Visit] = []
    for d in drafts:
        cplan = plan[d["complaint"]]
        vkey = vital_state_key(d["vitals"], stats)
        if vkey == cplan["shared_key"]:
            cls = "SHARED"
        elif vkey == cplan["specific_key"]:
            cls = "SPECIFIC"
        else:
            cls = "NONE"
        class_counts[d["complaint"]][cls] += 1
        probs = cplan["p_s_given_class"][cls]
        symptoms = [s for s in cplan["pool"] if rng.uniform() < probs[s]]

        context = PatientContext(
            patient_id=d["pid"],
            triage_text=_triage_text(rng, d["vitals"], d["complaint"], d["z"],
                                     trigger_tokens, noise_words),
            chief_complaint=d["complaint"],
            vitals=d["vitals"],
            ehr_mentions=d["ehr"],
            has_history=d["has_history"],
            lab_counts=d["labs"],
            med_counts=d["meds"],
        )
        sections = _note_sections(rng, ontology, d["conditions"], symptoms,
                                  d["note_meds"], d["note_labs"], d["vitals"],
                                  noise_words, cfg, symptom_ids)
        visits.append(Visit(context=context, sections=sections))

    sym_tables = {}
    for c in complaint_names:
        counts = class_counts[c]
        total = sum(counts.values())
        rates = {cls: (counts[cls] / total if total else 0.0) for cls in _CLASSES}
        cond = plan[c]["p_s_given_class"]
        marginal = {
            s: round(sum(rates[cls] * cond[cls][s] for cls in _CLASSES), 6)
            for s in plan[c]["pool"]
        }
        sym_tables[c] = {
            "shared_key": plan[c]["shared_key"],
            "specific_key": plan[c]["specific_key"],
            "realized_class_rates": rates,
            "p_s_given_class": cond,
            "p_s_marginal": marginal,
            "pool": plan[c]["pool"],
        }

    tables = {
        "condition": {
            "p_base": cfg.p_base, "p_trigger": cfg.p_trigger, "p_both": cfg.p_both,
            "hist_floor": cfg.hist_floor, "hist_gain": cfg.hist_gain,
            "hist_tau_days": cfg.hist_tau_days,
            "comorbid_boost": cfg.comorbid_boost,
            "trigger_tokens": trigger_tokens,
            "trigger_rate_hist": cfg.trigger_rate_hist,
            "trigger_rate_nohist": cfg.trigger_rate_nohist,
            "trigger_write_rate": cfg.trigger_write_rate,
            "trigger_spurious_rate": cfg.trigger_spurious_rate,
            "partners": partners,
            "planted_buckets": planted,
            "history_bucket_rate": hist_rate,
            "no_history_fraction": cfg.no_history_fraction,
        },
        "symptoms": sym_tables,
        "complaints": complaint_names,
    }
    return GeneratedCorpus(ontology=ontology, ontology_doc=onto_doc,
                           visits=visits, tables=tables)


def _surface(rng: np.random.Generator, ontology: Ontology, entry_id: str) -> str:
    syns = ontology.entries[entry_id].synonyms
    return syns[int(rng.integers(len(syns)))]


def _triage_text(rng, vitals: TriageVitals, complaint: str, z_present,
                 trigger_tokens, noise_words) -> str:
    age = vitals.age_years
    parts = [f"{age:.0f} yo" if age is not None else "adult",
             f"c/o {complaint}."]
    for b in sorted(trigger_tokens):
        if z_present.get(b):
            parts.append(trigger_tokens[b])
    k = int(rng.integers(4, 9))
    parts.extend(noise_words[int(i)] for i in rng.integers(0, len(noise_words), k))
    return " ".join(parts)


def _note_sections(rng, ontology, note_conditions, symptoms, note_meds,
                   note_labs, vitals, noise_words, cfg: GeneratorConfig,
                   all_symptoms) -> dict[str, str]:
    def surf(eid: str) -> str:
        return _surface(rng, ontology, eid)

    def noise_sentence() -> str:
        k = int(rng.integers(3, 6))
        ws = [noise_words[int(i)] for i in rng.integers(0, len(noise_words), k)]
        return " ".join(ws).capitalize() + "."

    def maybe_noise(parts: list[str]) -> None:
        if rng.uniform() < cfg.distractor_fraction:
            parts.append(noise_sentence())

    age = vitals.age_years
    hpi: list[str] = []
    lead = f"Patient is a {age:.0f} year old" if age is not None else "Patient"
    if symptoms:
        listed = [surf(s) for s in symptoms[:3]]
        if len(listed) == 1:
            hpi.append(f"{lead} presenting with {listed[0]}.")
        else:
            hpi.append(f"{lead} presenting with {', '.join(listed[:-1])} and {listed[-1]}.")
    else:
        hpi.append(f"{lead} presenting for evaluation.")
    if note_conditions:
        hpi.append(f"History of {surf(note_conditions[0])} noted.")
    if rng.uniform() < cfg.negated_mention_rate:
        others = [s for s in all_symptoms if s not in symptoms]
        if others:
            neg = others[int(rng.integers(len(others)))]
            hpi.append(f"Denies {surf(neg)}.")
    maybe_noise(hpi)

    pmh_conditions = note_conditions[1:] if len(note_conditions) > 1 else note_conditions
    pmh = ", ".join(surf(c) for c in pmh_conditions) + "." if pmh_conditions else "none."
    meds = ", ".join(surf(m) for m in note_meds) + "." if note_meds else "none."

    ros_parts: list[str] = []
    ros_syms = symptoms[3:5] if len(symptoms) > 3 else symptoms[:2]
    if ros_syms:
        ros_parts.append("positive for " + ", ".join(surf(s) for s in ros_syms) + ".")
    ros_parts.append("Otherwise negative.")
    maybe_noise(ros_parts)

    pe_parts: list[str] = []
    if symptoms and rng.uniform() < 0.5:
        pe_parts.append(f"{surf(symptoms[0])} noted.")
    pe_parts.append("No acute distress.")

    mdm: list[str] = []
    if note_conditions:
        mdm.append(f"Concern for {surf(note_conditions[-1])}.")
    if note_labs:
        if len(note_labs) == 1:
            mdm.append(f"Will check {surf(note_labs[0])}.")
        else:
            mdm.append("Will check " + " and ".join(surf(lab) for lab in note_labs) + ".")
    maybe_noise(mdm)

    return {
        "HPI": " ".join(hpi),
        "PMH": pmh,
        "MEDICATIONS": meds,
        "ROS": " ".join(ros_parts),
        "PHYSICAL_EXAM": " ".join(pe_parts),
        "MDM": " ".join(mdm) if mdm else "Plan discussed.",
    }
