"""HTTP suggestion service.

One process holds the ontology and trained models as immutable shared state.
Each session runs the rankers exactly once at creation; every later request
touches only cached rankings and per-session note state. Note text is
client-authoritative: suggest requests carry the full text and cursor.

Requests for distinct sessions run concurrently; a per-session lock
serializes requests within one session in arrival order.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .engine import ModelBundle, RankingEngine, contextual_engine
from .extraction import Mention, polarity_at
from .features import PatientContext
from .ontology import Ontology
from .resources import default_negation_lexicon, default_trigger_lexicon
from .session import (
    NoteState,
    StaleSuggestionError,
    Suggestion,
    TagOverlapError,
    accept,
    query,
    retro_candidates,
    retro_confirm,
)


class SuggestRequest(BaseModel):
    text: str
    cursor: int = Field(ge=0)
    section: str | None = None  # advisory; the section is derived from text


class AcceptRequest(BaseModel):
    entry: str
    synonym: str


class RetroRequest(BaseModel):
    entry: str
    start: int = Field(ge=0)
    end: int = Field(ge=0)
    text: str | None = None  # optional resync before confirming


@dataclass
class _Session:
    session_id: str
    context: PatientContext
    note: NoteState
    lock: threading.Lock
    created_at: float


def _suggestion_json(s: Suggestion) -> dict:
    return {"entry": s.entry_id, "synonym": s.matched_synonym,
            "name": s.canonical_name, "type": s.concept_type.value}


def _note_json(note: NoteState) -> dict:
    return {
        "text": note.text,
        "cursor": note.cursor,
        "tags": [
            {"start": t.start, "end": t.end, "entry": t.entry_id,
             "synonym": t.synonym, "type": t.concept_type.value}
            for t in note.tags
        ],
    }


def create_app(
    ontology: Ontology,
    bundle: ModelBundle | None = None,
    demo_contexts: list[PatientContext] | None = None,
    ui_dir: str | None = None,
    engine: RankingEngine | None = None,
    k: int = 5,
) -> FastAPI:
    if bundle is None and engine is None:
        raise ValueError("need a model bundle or an explicit engine")
    app = FastAPI(title="scribe suggestion service")
    triggers = default_trigger_lexicon()
    negation = default_negation_lexicon()
    rank_engine = engine or contextual_engine(bundle)
    sessions: dict[str, _Session] = {}
    store_lock = threading.Lock()

    def get_session(session_id: str) -> _Session:
        sess = sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return sess

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "entries": len(ontology.entries),
            "sessions": len(sessions),
            "ranker_invocations": rank_engine.invocations,
        }

    @app.post("/v1/sessions")
    def create_session(payload: dict) -> dict:
        try:
            context = PatientContext.from_json(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad context: {exc}")
        rankings = rank_engine.rank_all(context)
        note = NoteState(rankings=rankings)
        sid = uuid.uuid4().hex
        with store_lock:
            sessions[sid] = _Session(session_id=sid, context=context, note=note,
                                     lock=threading.Lock(),
                                     created_at=time.time())
        return {"session_id": sid}

    @app.post("/v1/sessions/{session_id}/suggest")
    def suggest_endpoint(session_id: str, req: SuggestRequest) -> dict:
        sess = get_session(session_id)
        if req.cursor > len(req.text):
            raise HTTPException(status_code=400, detail="cursor beyond end of text")
        with sess.lock:
            sess.note.text = req.text
            sess.note.cursor = req.cursor
            t0 = time.perf_counter_ns()
            scope, shown = query(sess.note, triggers, ontology, k=k)
            elapsed_us = (time.perf_counter_ns() - t0) // 1000
        return {
            "active": scope.active,
            "type_order": [t.value for t in scope.type_order],
            "suggestions": [_suggestion_json(s) for s in shown],
            "processing_us": int(elapsed_us),
        }

    @app.post("/v1/sessions/{session_id}/accept")
    def accept_endpoint(session_id: str, req: AcceptRequest) -> dict:
        sess = get_session(session_id)
        with sess.lock:
            match = next(
                (s for s in sess.note.last_shown
                 if s.entry_id == req.entry and s.matched_synonym == req.synonym),
                None,
            )
            if match is None:
                raise HTTPException(status_code=409,
                                    detail="suggestion not in the last shown list")
            try:
                accept(sess.note, match)
            except StaleSuggestionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return _note_json(sess.note)

    @app.get("/v1/sessions/{session_id}/retro")
    def retro_list(session_id: str) -> dict:
        sess = get_session(session_id)
        with sess.lock:
            candidates = retro_candidates(sess.note, ontology)
            return {
                "candidates": [
                    {"start": m.start, "end": m.end, "entry": m.entry_id,
                     "synonym": m.matched_synonym,
                     "name": ontology.entries[m.entry_id].canonical_name,
                     "type": ontology.entries[m.entry_id].concept_type.value}
                    for m in candidates
                ]
            }

    @app.post("/v1/sessions/{session_id}/retro")
    def retro_endpoint(session_id: str, req: RetroRequest) -> dict:
        sess = get_session(session_id)
        with sess.lock:
            if req.text is not None:
                sess.note.text = req.text
                sess.note.cursor = min(sess.note.cursor, len(req.text))
            match = next(
                (m for m in retro_candidates(sess.note, ontology)
                 if m.start == req.start and m.end == req.end
                 and m.entry_id == req.entry),
                None,
            )
            if match is None:
                raise HTTPException(status_code=409,
                                    detail="no such retro candidate")
            try:
                retro_confirm(sess.note, match, ontology)
            except TagOverlapError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return _note_json(sess.note)

    @app.get("/v1/sessions/{session_id}/export")
    def export_endpoint(session_id: str) -> dict:
        sess = get_session(session_id)
        with sess.lock:
            note = sess.note
            polarities = polarity_at(note.text, [t.start for t in note.tags],
                                     negation)
            annotations = [
                {
                    "start": t.start,
                    "end": t.end,
                    "entry": t.entry_id,
                    "synonym": t.synonym,
                    "name": ontology.entries[t.entry_id].canonical_name,
                    "type": t.concept_type.value,
                    "cuis": sorted(ontology.entries[t.entry_id].cui_set),
                    "polarity": pol.value,
                }
                for t, pol in zip(note.tags, polarities)
            ]
            return {
                "patient_id": sess.context.patient_id,
                "text": note.text,
                "annotations": annotations,
                "log": list(note.log),
            }

    if demo_contexts:
        demo_payload = [
            {
                "patient_id": c.patient_id,
                "chief_complaint": c.chief_complaint,
                "age": c.vitals.age_years,
                "has_history": c.has_history,
                "context": c.to_json(),
            }
            for c in demo_contexts
        ]

        @app.get("/v1/demo/patients")
        def demo_patients() -> dict:
            return {"patients": demo_payload}

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
