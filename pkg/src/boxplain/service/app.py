"""HTTP session service: packs, models, sessions, questions, steering.

One engine per session; mutations are serialized per session (a second
concurrent write gets 409) while reads take lock-free snapshots.  Analyses
that outlive the patience window return 202 with a poll token; the
description endpoint reports pending until the worker finishes.
"""

from __future__ import annotations

import threading
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FuturesTimeout
from dataclasses import dataclass, field

from fastapi import FastAPI, Query
from fastapi.responses import JSONResponse

from ..description import NoSituationError
from ..models import model_from_json
from ..packs import builtin_packs
from ..predicates import DomainPack, Question, QuestionType, validate_question
from ..reachability import QuestionValidationError
from ..session import EngineConfig, HistoryStore, SessionEngine
from . import schemas

PATIENCE_SECONDS = 2.0


@dataclass
class SessionRuntime:
    engine: SessionEngine
    lock: threading.Lock = field(default_factory=threading.Lock)
    pending: Future | None = None
    exited: bool = False
    last_selected: str | None = None


def _error(status: int, message: str, violations: list[str] | None = None) -> JSONResponse:
    body = schemas.ErrorBody(error=message, violations=violations or [])
    return JSONResponse(status_code=status, content=body.model_dump())


def create_app(
    config: EngineConfig | None = None,
    data_dir=None,
    include_builtin: bool = True,
    patience: float = PATIENCE_SECONDS,
) -> FastAPI:
    app = FastAPI(title="boxplain", version="1")
    packs: dict[str, tuple[DomainPack, object]] = {}
    models: dict[str, object] = {}
    if include_builtin:
        for name, (pack, model) in builtin_packs().items():
            packs[name] = (pack, model)
            models[name] = model
    sessions: dict[str, SessionRuntime] = {}
    registry_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=4)
    engine_config = config or EngineConfig()

    def _store_for(session_id: str) -> HistoryStore:
        if data_dir is None:
            return HistoryStore()
        return HistoryStore(f"{data_dir}/{session_id}.ndjson")

    def _get_runtime(session_id: str) -> SessionRuntime | None:
        return sessions.get(session_id)

    def _description_view(rt: SessionRuntime) -> schemas.DescriptionView:
        if rt.exited:
            return schemas.DescriptionView(status="exited")
        state = rt.engine.current
        d = state.description.to_json()
        return schemas.DescriptionView(
            status="ready",
            state=state.id,
            epsilon=state.epsilon,
            degraded=state.degraded,
            selected_predicate=rt.last_selected,
            conditions=[schemas.ConditionView(**c) for c in d["conditions"]],
        )

    def _run_guarded(rt: SessionRuntime, fn):
        """Run a session mutation, waiting up to the patience window."""
        if not rt.lock.acquire(blocking=False):
            return _error(409, "another operation is in flight for this session")

        def work():
            try:
                return fn()
            finally:
                rt.lock.release()

        future = executor.submit(work)
        rt.pending = future
        try:
            result = future.result(timeout=patience)
        except NoSituationError as exc:
            rt.pending = None
            return schemas.DescriptionView(status="no_situation", message=str(exc))
        except FuturesTimeout:
            return JSONResponse(
                status_code=202,
                content=schemas.PendingResponse(poll=rt.engine.session_id).model_dump(),
            )
        except (QuestionValidationError, KeyError) as exc:
            rt.pending = None
            raise exc
        rt.pending = None
        return result

    # -- packs and models --

    @app.post("/packs")
    def upload_pack(body: dict):
        try:
            pack = DomainPack.from_json(body)
        except (KeyError, ValueError) as exc:
            return _error(400, f"malformed pack: {exc}")
        with registry_lock:
            packs[pack.name] = (pack, None)
        return schemas.CreatedResponse(id=pack.name)

    @app.post("/models")
    def upload_model(body: schemas.ModelUpload):
        try:
            model = model_from_json(body.model)
        except (KeyError, ValueError) as exc:
            return _error(400, f"malformed model: {exc}")
        with registry_lock:
            models[body.id] = model
        return schemas.CreatedResponse(id=body.id)

    @app.get("/packs/{pack_id}/predicates")
    def list_predicates(pack_id: str, questionType: str | None = Query(default=None)):
        entry = packs.get(pack_id)
        if entry is None:
            return _error(404, f"unknown pack {pack_id!r}")
        pack = entry[0]
        if questionType is None:
            preds = pack.ordered()
        else:
            try:
                qtype = QuestionType(questionType)
            except ValueError:
                return _error(400, f"unknown question type {questionType!r}")
            preds = pack.allowed_for(qtype)
        return schemas.PredicateListing(
            predicates=[
                schemas.PredicateView(name=p.name, role=p.role.value, label=p.label)
                for p in preds
            ]
        )

    # -- sessions --

    @app.post("/sessions")
    def create_session(body: schemas.SessionCreate):
        entry = packs.get(body.pack)
        if entry is None:
            return _error(404, f"unknown pack {body.pack!r}")
        model = models.get(body.model) or entry[1]
        if model is None:
            return _error(404, f"unknown model {body.model!r}")
        with registry_lock:
            session_id = f"s{len(sessions) + 1}"
            engine = SessionEngine(
                entry[0], model, epsilon0=body.epsilon0, seed=body.seed,
                config=engine_config, store=_store_for(session_id),
                session_id=session_id,
            )
            sessions[session_id] = SessionRuntime(engine=engine)
        return schemas.CreatedResponse(id=session_id)

    @app.post("/sessions/{session_id}/question")
    def post_question(session_id: str, body: schemas.QuestionBody):
        rt = _get_runtime(session_id)
        if rt is None:
            return _error(404, f"unknown session {session_id!r}")
        try:
            question = Question.of(body.type, body.strength, body.dnf)
        except ValueError as exc:
            return _error(400, str(exc))
        violations = validate_question(question, rt.engine.pack)
        if violations:
            return _error(400, "question rejected", violations)

        def work():
            rt.engine.ask(question)
            rt.last_selected = None
            return _description_view(rt)

        return _run_guarded(rt, work)

    @app.post("/sessions/{session_id}/response")
    def post_response(session_id: str, body: schemas.ResponseBody):
        rt = _get_runtime(session_id)
        if rt is None:
            return _error(404, f"unknown session {session_id!r}")
        if rt.exited:
            return _error(400, "session has exited")
        if rt.engine.current_id is None:
            return _error(400, "no question asked yet")
        kind, arg = body.kind, body.arg

        if kind == "history":
            if arg is None:
                return _error(400, "history needs a state id")
            try:
                rt.engine.travel(arg)
            except KeyError:
                return _error(404, f"unknown state id {arg!r}")
            rt.last_selected = None
            return _description_view(rt)
        if kind == "break":
            rt.engine.break_question()
            return _description_view(rt)
        if kind == "exit":
            rt.engine.exit()
            rt.exited = True
            return schemas.DescriptionView(status="exited")

        def work():
            if kind == "ma":
                rt.engine.more_abstract()
                rt.last_selected = None
            elif kind == "la":
                rt.engine.less_abstract()
                rt.last_selected = None
            elif kind == "ignore":
                if arg is None:
                    raise KeyError("ignore needs a predicate name")
                rt.engine.ignore(arg)
                rt.last_selected = None
            elif kind == "aps":
                direction = arg or "ma"
                chosen, _state = rt.engine.aps(direction)
                rt.last_selected = chosen
            return _description_view(rt)

        try:
            return _run_guarded(rt, work)
        except KeyError as exc:
            return _error(404, str(exc))

    @app.get("/sessions/{session_id}/description")
    def get_description(session_id: str):
        rt = _get_runtime(session_id)
        if rt is None:
            return _error(404, f"unknown session {session_id!r}")
        if rt.pending is not None and not rt.pending.done():
            return JSONResponse(
                status_code=202,
                content=schemas.PendingResponse(poll=session_id).model_dump(),
            )
        if rt.pending is not None:
            pending, rt.pending = rt.pending, None
            try:
                pending.result(timeout=0)
            except NoSituationError as exc:
                return schemas.DescriptionView(status="no_situation", message=str(exc))
        if rt.engine.current_id is None:
            return _error(400, "no question asked yet")
        return _description_view(rt)

    @app.get("/sessions/{session_id}/reach")
    def get_reach(session_id: str):
        from ..reachability import reachset_to_json

        rt = _get_runtime(session_id)
        if rt is None:
            return _error(404, f"unknown session {session_id!r}")
        if rt.engine.current_id is None:
            return _error(400, "no question asked yet")
        state = rt.engine.current
        return reachset_to_json(state.reach, rt.engine.pack.space.input_bounding)

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        rt = _get_runtime(session_id)
        if rt is None:
            return _error(404, f"unknown session {session_id!r}")
        nodes = [
            schemas.HistoryNode(
                id=s.id,
                parent=s.parent,
                epsilon=s.epsilon,
                merge_enabled=s.merge_enabled,
                ignored=list(s.ignored),
                question=s.question.to_json(),
                condition_count=len(s.description.conditions),
            )
            for s in rt.engine.history()
        ]
        return schemas.HistoryView(current=rt.engine.current_id, nodes=nodes)

    # exposed for tests and the CLI's in-process client
    app.state.sessions = sessions
    app.state.packs = packs
    app.state.models = models
    return app
