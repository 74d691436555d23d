"""Session-oriented HTTP API with persistent, replayable event logs.

Every session appends to a newline-delimited JSON log: inbound events and
outbound turn outputs, preceded by a metadata line carrying the config
snapshot and a catalog fingerprint. Logs are flushed before the response is
returned, and replaying a log through a fresh session with the same config
reproduces the trace document bit for bit (timestamps are excluded from the
trace document for exactly that reason).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import explainer
from .config import Config, RuntimeBundle, build_bundle, new_session
from .goals import Event
from .orchestrator import Session, TurnOutput, handle_event


class ServiceError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class ReplayIncompatibleError(ServiceError):
    def __init__(self, message: str):
        super().__init__("replay_incompatible", message, status=409)


def trace_document(session: Session) -> dict[str, Any]:
    """Canonical, timestamp-free view of everything the session did."""
    return {
        "records": [rec.to_doc(include_timestamp=False) for rec in session.history],
        "plans": [dict(p) for p in session.plan_snapshots],
    }


def trace_bytes(session: Session) -> bytes:
    return json.dumps(trace_document(session), sort_keys=True).encode("utf-8")


def state_document(session: Session) -> dict[str, Any]:
    """LTM view (sensitive values masked), goal stack, counters, learning."""
    ltm = []
    for doc in session.ltm.to_doc():
        element = doc["element"]
        sensitive = element in session.ontology and session.ontology[element].sensitive
        ltm.append(
            {
                "element": element,
                "value": "•••" if sensitive else doc["value"],
                "sensitive": sensitive,
                "provenance": doc["provenance"],
            }
        )
    return {
        "session_id": session.id,
        "mode": session.settings.mode,
        "ltm": ltm,
        "goal_stack": session.goal_stack.to_doc(),
        "finished_goals": [e.to_doc() for e in session.goal_stack.finished],
        "counters": {
            f"{pair}|{element}": count
            for (pair, element), count in sorted(session.retry_counters.items())
        },
        "learned": sorted(str(f) for f in session.learned),
        "pruned": sorted(session.pruned),
        "authorized": sorted(session.authorized),
    }


class SessionStore:
    """Owns live sessions and their event logs; per-session serialization."""

    def __init__(self, config: Config, log_dir: str | Path | None = None):
        self.config = config
        self.bundle: RuntimeBundle = build_bundle(config)
        self.log_dir = Path(log_dir if log_dir is not None else config.log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()

    def create_session(self, overrides: dict[str, Any] | None = None) -> Session:
        config = self.config
        if overrides:
            merged = {**config.to_doc(), **overrides}
            config = Config.from_dict(merged)
            bundle = build_bundle(config) if overrides.get("catalog") else self.bundle
        else:
            bundle = self.bundle
        session_id = uuid.uuid4().hex
        session = new_session(config, session_id, bundle)
        with self._store_lock:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        self._append_log(
            session_id,
            "meta",
            {
                "created": True,
                "config": config.to_doc(),
                "fingerprint": bundle.fingerprint,
            },
        )
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError("unknown_session", f"no session {session_id!r}", status=404)
        return session

    def lock(self, session_id: str) -> threading.Lock:
        try:
            return self._locks[session_id]
        except KeyError:
            raise ServiceError("unknown_session", f"no session {session_id!r}", status=404) from None

    def log_path(self, session_id: str) -> Path:
        return self.log_dir / f"{session_id}.ndjson"

    def _append_log(self, session_id: str, direction: str, payload: dict[str, Any]) -> None:
        path = self.log_path(session_id)
        seq = 0
        if path.exists():
            with path.open("r", encoding="utf-8") as fh:
                seq = sum(1 for _ in fh)
        entry = {"seq": seq, "direction": direction, "payload": payload, "timestamp": time.time()}
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()

    def post_event(self, session_id: str, event_doc: dict[str, Any]) -> TurnOutput:
        session = self.get(session_id)
        event = _parse_event(event_doc)
        with self.lock(session_id):
            output = handle_event(session, event)
            # both halves of the exchange are persisted before we reply
            self._append_log(session_id, "in", event_doc)
            self._append_log(session_id, "out", output.to_doc())
            return output


def _parse_event(doc: dict[str, Any]) -> Event:
    kind = doc.get("kind", "utterance")
    text = doc.get("text", "")
    payload = doc.get("payload", {}) or {}
    try:
        return Event(kind=kind, text=text, payload=dict(payload))
    except ValueError as exc:
        raise ServiceError("bad_event", str(exc), status=422) from exc


def replay(log_path: str | Path, config: Config | None = None) -> tuple[Session, list[TurnOutput]]:
    """Rebuild a session by pushing the logged events through a fresh one.

    The log's config snapshot is used unless an explicit config is given; a
    changed catalog (different fingerprint) is refused rather than silently
    replayed against different semantics.
    """
    path = Path(log_path)
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    meta = next((l for l in lines if l["direction"] == "meta" and l["payload"].get("created")), None)
    if meta is None:
        replay_config = config or Config()
        expected_fingerprint = None
    else:
        replay_config = config or Config.from_dict(dict(meta["payload"]["config"]))
        expected_fingerprint = meta["payload"].get("fingerprint")
    bundle = build_bundle(replay_config)
    if expected_fingerprint is not None and bundle.fingerprint != expected_fingerprint:
        raise ReplayIncompatibleError(
            "catalog or intent rules changed since this log was recorded"
        )
    session = new_session(replay_config, f"replay-{path.stem}", bundle)
    outputs = []
    for line in lines:
        if line["direction"] != "in":
            continue
        outputs.append(handle_event(session, _parse_event(line["payload"])))
    return session, outputs


# --------------------------------------------------------------------------
# HTTP layer
# --------------------------------------------------------------------------


def create_app(config: Config | None = None, log_dir: str | Path | None = None) -> FastAPI:
    config = config or Config()
    store = SessionStore(config, log_dir=log_dir)
    app = FastAPI(title="conductor", version="0.1.0")
    app.state.store = store

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"error": {"code": exc.code, "message": exc.message}}
        )

    @app.post("/v1/sessions")
    def create_session(body: dict | None = None):
        session = store.create_session(body or {})
        return {"session_id": session.id}

    @app.post("/v1/sessions/{session_id}/events")
    def post_event(session_id: str, body: dict):
        output = store.post_event(session_id, body)
        return output.to_doc()

    @app.get("/v1/sessions/{session_id}/state")
    def get_state(session_id: str):
        return state_document(store.get(session_id))

    @app.get("/v1/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        return trace_document(store.get(session_id))

    @app.get("/v1/sessions/{session_id}/plan")
    def get_plan(session_id: str):
        session = store.get(session_id)
        if not session.plan_snapshots:
            raise ServiceError("no_plan", "no plan has been produced yet", status=404)
        return session.plan_snapshots[-1]

    @app.get("/v1/sessions/{session_id}/explain")
    def get_explain(
        session_id: str,
        kind: str,
        element: str | None = None,
        mode: str = "chain",
        goal: str | None = None,
    ):
        session = store.get(session_id)
        with store.lock(session_id):
            try:
                goal_set = frozenset(goal.split(",")) if goal else None
                if kind == "what":
                    entry = session.goal_stack.latest_entry_for(goal_set)
                    if entry is None:
                        raise ServiceError("no_goal", "no goal has been pursued", status=404)
                    summary = explainer.summarize(session, entry.goal)
                    return {
                        "kind": "what",
                        "structured": summary.to_doc(),
                        "text": explainer.render_summary(summary),
                    }
                if element is None:
                    raise ServiceError("missing_element", "element query parameter required")
                resolved = session.resolve_element(element)
                if resolved is None:
                    raise ServiceError("unknown_element", f"unknown element {element!r}", status=404)
                if kind == "how":
                    answer = explainer.explain_how(session, resolved)
                    return {
                        "kind": "how",
                        "structured": answer.to_doc(),
                        "text": [explainer.render_how(session, answer)],
                    }
                if kind == "why":
                    entry = session.goal_stack.latest_entry_for(goal_set)
                    if entry is None:
                        raise ServiceError("no_goal", "no goal has been pursued", status=404)
                    result = explainer.explain_why(session, entry.goal, resolved, mode=mode)
                    return {
                        "kind": "why",
                        "structured": result.to_doc(),
                        "text": explainer.render_why(session, resolved, result),
                    }
                if kind == "chain":
                    from .orchestrator import concrete_element

                    chain = explainer.explain_chain(session, concrete_element(session, resolved))
                    return {
                        "kind": "chain",
                        "structured": chain.to_doc(),
                        "text": explainer.render_chain(session, chain),
                    }
                raise ServiceError("bad_kind", f"unknown explanation kind {kind!r}")
            except explainer.ExplanationError as exc:
                raise ServiceError("explanation_error", str(exc), status=404) from exc

    return app
