"""Session HTTP API with file-per-session persistence.

A session is persisted as its creation parameters plus the ordered log of
mutating requests.  Re-applying the log to a fresh session reproduces the
exact same state (the engine is deterministic), which is both the crash
recovery story and the storage format: files are written atomically
(write-then-rename) before a mutating request is answered.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from pathlib import Path
from typing import Dict, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import program as prog_mod
from .dialogue import UserModel, decide, load_rules, update
from .errors import (
    AtEnd,
    GuardFailed,
    LucasError,
    NoMatch,
    NotApplicable,
    NotFound,
    PhaseError,
    TermSyntaxError,
    TermTypeError,
    UnknownSymbol,
)
from .interpreter import Session, item_to_json, view
from .knowledge import (
    KnowledgeBase,
    knowledge_closure,
    load_instance,
    load_kb,
    lookup_definition,
    resolve_problem_key,
)
from .specification import refine
from .terms import parse, render


def _http_status(e: LucasError) -> int:
    if isinstance(e, (TermSyntaxError, TermTypeError, UnknownSymbol)):
        return 422
    if isinstance(e, (PhaseError, AtEnd, GuardFailed, NotApplicable)):
        return 409
    if isinstance(e, (NotFound, NoMatch)):
        return 404
    return 409


class SessionStore:
    """Atomic JSON files, one per session id."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, sid: str) -> Path:
        return self.root / f"{sid}.json"

    def save(self, sid: str, record: dict):
        target = self.path(sid)
        tmp = target.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
        os.replace(tmp, target)

    def load(self, sid: str) -> Optional[dict]:
        p = self.path(sid)
        if not p.exists():
            return None
        return json.loads(p.read_text())


class LiveSession:
    def __init__(self, record: dict, kb: KnowledgeBase, instances_dir: Path):
        self.record = record
        path = instances_dir / f"{record['instance_id']}.json"
        if not path.exists():
            raise NotFound(record["instance_id"])
        self.instance = load_instance(path, kb)
        self.session = Session(kb, self.instance, mode=record.get("mode", "exercise"))
        self.user_model = UserModel(mode=record.get("mode", "exercise"))
        self.lock = threading.Lock()


class Service:
    def __init__(self, kb_dir="kb", store_dir="store", instances_dir="instances"):
        self.kb = load_kb(kb_dir)
        self.store = SessionStore(store_dir)
        self.instances_dir = Path(instances_dir)
        self.rules = load_rules(self.kb.dialog_rules)
        self.live: Dict[str, LiveSession] = {}
        self.lock = threading.Lock()

    # -- session lifecycle -------------------------------------------------

    def create_session(self, instance_id: str, mode: str = "exercise") -> str:
        sid = uuid.uuid4().hex[:12]
        record = {"instance_id": instance_id, "mode": mode, "log": []}
        live = LiveSession(record, self.kb, self.instances_dir)  # validates instance
        self.store.save(sid, record)
        with self.lock:
            self.live[sid] = live
        return sid

    def get(self, sid: str) -> LiveSession:
        with self.lock:
            live = self.live.get(sid)
        if live is not None:
            return live
        record = self.store.load(sid)
        if record is None:
            raise NotFound(sid)
        live = LiveSession(record, self.kb, self.instances_dir)
        for req in record["log"]:
            self._apply(live, req)
        with self.lock:
            self.live[sid] = live
        return live

    def mutate(self, sid: str, req: dict) -> dict:
        live = self.get(sid)
        with live.lock:
            payload = self._apply(live, req)
            live.record["log"].append(req)
            self.store.save(sid, live.record)
            return payload

    # -- request application ----------------------------------------------

    def _apply(self, live: LiveSession, req: dict) -> dict:
        op = req["op"]
        kb = self.kb
        session = live.session
        if op == "model":
            term = parse(req["term"], kb.sig)
            fb = session.add_model_item(req["field"], term)
            return {
                "items": [
                    {"field": f.field,
                     "term": render(f.term, kb.sig) if f.term is not None else None,
                     "verdict": f.verdict}
                    for f in fb.items
                ],
                "complete": fb.complete,
                "phase": session.phase,
            }
        if op == "refs":
            result = session.set_refs(
                theory=req.get("theory"),
                problem=req.get("problem"),
                method=req.get("method"),
            )
            if result["verdicts"].get("problem") == "incorrect":
                suggestion = self._refine_suggestion(live)
                if suggestion is not None:
                    result["suggestion"] = list(suggestion)
            return result
        if op == "step":
            key = session.frame.block.problem_key if session.frame else ()
            if "term" in req:
                term = parse(req["term"], kb.sig)
                res = session.check_input_term(term)
            else:
                tac = prog_mod.parse_tactic(req["tactic"], kb.sig)
                res = session.check_input_tactic(tac)
            event = "step_accepted" if res.accepted else "step_rejected"
            update(live.user_model, {"kind": event, "problem_key": key})
            if res.done:
                update(live.user_model, {"kind": "problem_completed", "problem_key": key})
            return {
                "accepted": res.accepted,
                "item": item_to_json(res.item, kb.sig) if res.item is not None else None,
                "reason": res.reason,
                "error_pattern": res.error_pattern,
                "done": res.done,
                "phase": session.phase,
            }
        if op == "next":
            if session.phase != "solve":
                raise PhaseError("solve", session.phase)
            key, target, is_root = self._upcoming_key(session)
            request = {"kind": "next_step", "problem_key": key,
                       "target_key": target, "phase": session.phase,
                       "is_root": is_root}
            action = decide(self.rules, live.user_model, request)
            if action["kind"] in ("deny", "counter_request"):
                return {"granted": False, "action": action, "phase": session.phase}
            update(live.user_model, {"kind": "help_requested", "problem_key": key})
            proposal = session.next_step()
            if proposal.done:
                update(live.user_model, {"kind": "problem_completed", "problem_key": key})
            return {
                "granted": True,
                "action": action,
                "tactic": proposal.tactic,
                "item": item_to_json(proposal.item, kb.sig),
                "done": proposal.done,
                "phase": session.phase,
            }
        raise NotFound(op)

    def _upcoming_key(self, session: Session):
        """(block key for help counters, key of the step's own problem, is_root).

        A pending sub-problem counts against the enclosing block for hint
        budgeting but is addressed by its own key for blackboxing."""
        frame = session.frame
        if frame is None:
            return (), (), True
        block_key = frame.block.problem_key
        if frame.pc < len(frame.instrs):
            instr = frame.instrs[frame.pc]
            if instr[0] == "bind":
                return block_key, tuple(instr[2].problem_key), False
        return block_key, block_key, frame.block is session.root

    def _refine_suggestion(self, live: LiveSession):
        for root in self.kb.problem_roots:
            try:
                return refine(self.kb, live.instance, root.key)
            except (NoMatch, NotFound, LucasError):
                continue
        return None

    # -- read side ---------------------------------------------------------

    def tree_payload(self, sid: str, expand: str = "") -> dict:
        live = self.get(sid)
        session = live.session
        if session.root is None:
            return {"phase": session.phase, "tree": None, "view": ""}
        ids = {int(x) for x in expand.split(",") if x.strip()}
        return {
            "phase": session.phase,
            "tree": item_to_json(session.root, self.kb.sig),
            "view": view(session.root, ids, self.kb.sig),
        }


def create_app(kb_dir="kb", store_dir="store", instances_dir="instances") -> FastAPI:
    service = Service(kb_dir, store_dir, instances_dir)
    app = FastAPI(title="lucas", version="0.1.0")
    app.state.service = service

    @app.exception_handler(LucasError)
    async def lucas_error(request, exc: LucasError):
        return JSONResponse(status_code=_http_status(exc),
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.post("/sessions")
    async def create_session(body: dict):
        sid = service.create_session(body["instance_id"], body.get("mode", "exercise"))
        return {"session_id": sid}

    @app.get("/sessions/{sid}/tree")
    async def get_tree(sid: str, expand: str = ""):
        return service.tree_payload(sid, expand)

    @app.post("/sessions/{sid}/model")
    async def post_model(sid: str, body: dict):
        return service.mutate(sid, {"op": "model", "field": body["field"],
                                    "term": body["term"]})

    @app.post("/sessions/{sid}/refs")
    async def post_refs(sid: str, body: dict):
        req = {"op": "refs"}
        for k in ("theory", "problem", "method"):
            if body.get(k) is not None:
                req[k] = body[k]
        return service.mutate(sid, req)

    @app.post("/sessions/{sid}/step")
    async def post_step(sid: str, body: dict):
        req = {"op": "step"}
        if "term" in body:
            req["term"] = body["term"]
        elif "tactic" in body:
            req["tactic"] = body["tactic"]
        else:
            return JSONResponse(status_code=422,
                                content={"error": "BadRequest",
                                         "detail": "step needs a term or a tactic"})
        return service.mutate(sid, req)

    @app.post("/sessions/{sid}/next")
    async def post_next(sid: str):
        return service.mutate(sid, {"op": "next"})

    @app.get("/kb/definitions/{key:path}")
    async def get_definition(key: str):
        return lookup_definition(service.kb, key)

    @app.get("/kb/prereq")
    async def get_prereq(problems: str):
        keys = [resolve_problem_key(service.kb, p.strip())
                for p in problems.split(",") if p.strip()]
        closure = knowledge_closure(service.kb, keys)
        return {"closure": [{"kind": kind, "key": key} for kind, key in closure]}

    return app


def serve(kb_dir="kb", store_dir="store", instances_dir="instances",
          port: int = 8000, host: str = "127.0.0.1"):
    import uvicorn

    app = create_app(kb_dir, store_dir, instances_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
