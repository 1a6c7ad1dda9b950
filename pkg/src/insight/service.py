"""Session service: datasets, conversational turns, bookmarks.

Ties the pipeline together behind a small synchronous API. Each turn
runs clarify, decompose, SQL generation with refinement, execution and
chart recommendation, recording stage events on the stored turn as they
happen so pollers and the SSE endpoint can show progress. Per-session
execution is serialized with a non-blocking lock; a second question
while one is running fails fast instead of queueing.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from . import catalog
from .charts import recommend_for_result
from .config import ServiceConfig
from .context import SchemaContext, build_indexes, generate_context
from .engine import SqliteEngine
from .errors import (
    IndexOutOfRange,
    InsightError,
    OffTopic,
    SessionBusy,
    UnknownModel,
    UnknownSession,
    UnknownTurn,
)
from .gateway import LlmGateway
from .questions import UserQuestion, prepare_task
from .sqlgen import answer_task
from .store import SessionStore
from .vectors import VectorIndex

logger = logging.getLogger(__name__)

STAGES = ("clarify", "decompose", "sql", "refine", "execute", "chart")

OVERVIEW_QUESTION = "get a quick understanding of this dataset"


def _normalize_question(text: str) -> str:
    return " ".join(text.lower().split()).strip().rstrip(".!?")


@dataclass
class _DatasetRuntime:
    engine: SqliteEngine
    context: SchemaContext | None = None
    table_index: VectorIndex | None = None
    entity_index: VectorIndex | None = None
    state: str = "new"  # new | generating | ready | failed
    error: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class InsightService:
    """One instance per process. All public methods are synchronous; the
    HTTP layer adds threading where responsiveness needs it."""

    def __init__(self, config: ServiceConfig, gateway: LlmGateway | None = None):
        self.config = config
        self.store = SessionStore(config.store_path)
        self.gateway = gateway if gateway is not None else config.build_gateway()
        self._runtimes: dict[str, _DatasetRuntime] = {}
        self._runtime_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._session_locks_guard = threading.Lock()

    # -- datasets -----------------------------------------------------------------

    def register_dataset(self, connection_spec: str, name: str) -> dict[str, Any]:
        """Introspection happens eagerly so a bad connection fails here,
        not at question time."""
        engine = SqliteEngine(
            connection_spec, statement_timeout_s=self.config.pipeline.statement_timeout_s
        )
        schema = engine.introspect()
        schema_doc = {
            "name": name,
            "tables": [
                {
                    "table": t.name,
                    "columns": [c.name for c in t.columns],
                    "primary_key": t.declared_primary_key,
                }
                for t in schema.tables
            ],
        }
        self.store.save_dataset(name, connection_spec, schema_doc)
        with self._runtime_lock:
            self._runtimes[name] = _DatasetRuntime(engine=engine)
        return {"name": name, "tables": len(schema.tables)}

    def list_datasets(self) -> list[dict[str, Any]]:
        listing = self.store.list_datasets()
        for item in listing:
            runtime = self._runtimes.get(item["name"])
            if runtime is not None:
                item["state"] = runtime.state if runtime.state != "new" else (
                    "ready" if item["has_context"] else "new"
                )
            else:
                item["state"] = "ready" if item["has_context"] else "new"
        return listing

    def _runtime(self, name: str) -> _DatasetRuntime:
        with self._runtime_lock:
            runtime = self._runtimes.get(name)
            if runtime is None:
                record = self.store.get_dataset(name)  # raises UnknownDataset
                engine = SqliteEngine(
                    record["spec"],
                    statement_timeout_s=self.config.pipeline.statement_timeout_s,
                )
                runtime = _DatasetRuntime(engine=engine)
                self._runtimes[name] = runtime
            return runtime

    def ensure_context(self, name: str, wait: bool = True) -> _DatasetRuntime:
        """Make the dataset's context available, generating and persisting
        it when absent. With ``wait`` false the generation runs on a
        background thread and the runtime reports ``generating``."""
        runtime = self._runtime(name)
        with runtime.lock:
            if runtime.state == "ready":
                return runtime
            record = self.store.get_dataset(name)
            if record["context"] is not None and runtime.context is None:
                doc_json = json.dumps(record["context"])
                context = self._context_from_json(doc_json)
                table_index, entity_index = build_indexes(
                    context, self.gateway, self.config.pipeline
                )
                runtime.context = context
                runtime.table_index = table_index
                runtime.entity_index = entity_index
                runtime.state = "ready"
                return runtime
            if runtime.state == "generating":
                pass
            elif wait:
                self._generate_into(name, runtime)
                return runtime
            else:
                runtime.state = "generating"
                thread = threading.Thread(
                    target=self._generate_guarded, args=(name, runtime), daemon=True
                )
                thread.start()
        if wait:
            # Another caller is generating; poll until it lands.
            while runtime.state == "generating":
                time.sleep(0.02)
            if runtime.state == "failed":
                raise InsightError(f"context generation failed: {runtime.error}")
        return runtime

    @staticmethod
    def _context_from_json(doc_json: str) -> SchemaContext:
        doc = catalog.context_document_from_json(doc_json, source="session store")
        return catalog.context_from_document(doc)

    def _generate_guarded(self, name: str, runtime: _DatasetRuntime) -> None:
        try:
            self._generate_into(name, runtime)
        except Exception as exc:  # noqa: BLE001 - background thread boundary
            logger.exception("context generation for %s failed", name)
            runtime.state = "failed"
            runtime.error = str(exc)

    def _generate_into(self, name: str, runtime: _DatasetRuntime) -> None:
        runtime.state = "generating"
        context, table_index, entity_index = generate_context(
            runtime.engine, self.gateway, self.config.pipeline
        )
        # The stored document keeps the dataset's registered name.
        context.database = name
        self.store.set_context(name, catalog.serialize_context(context))
        runtime.context = context
        runtime.table_index = table_index
        runtime.entity_index = entity_index
        runtime.state = "ready"
        runtime.error = None

    # -- sessions -----------------------------------------------------------------

    def create_session(self, dataset: str, model_id: str | None = None) -> dict[str, Any]:
        model = model_id or self.gateway.config.default_model
        if model not in self.gateway.config.models:
            raise UnknownModel(model)
        session_id = self.store.create_session(dataset, model)  # raises UnknownDataset
        runtime = self._runtime(dataset)
        state = "ready"
        record = self.store.get_dataset(dataset)
        if runtime.state != "ready" and record["context"] is None:
            self.ensure_context(dataset, wait=False)
            state = "generating"
        return {"id": session_id, "dataset": dataset, "model_id": model, "state": state}

    def session_state(self, session_id: str) -> dict[str, Any]:
        session = self.store.get_session(session_id)
        runtime = self._runtimes.get(session["dataset"])
        record = self.store.get_dataset(session["dataset"])
        if runtime is not None and runtime.state == "generating":
            state = "generating"
        elif runtime is not None and runtime.state == "failed":
            state = "failed"
        elif record["context"] is not None or (runtime and runtime.state == "ready"):
            state = "ready"
        else:
            state = "new"
        session["state"] = state
        session["turns"] = self.store.list_turns(session_id)
        return session

    def set_model(self, session_id: str, model_id: str) -> dict[str, Any]:
        if model_id not in self.gateway.config.models:
            raise UnknownModel(model_id)
        self.store.set_session_model(session_id, model_id)
        return self.store.get_session(session_id)

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._session_locks_guard:
            return self._session_locks.setdefault(session_id, threading.Lock())

    # -- turns ---------------------------------------------------------------------

    def post_question(self, session_id: str, text: str) -> dict[str, Any]:
        """Run a full turn synchronously and return the stored turn."""
        turn_id = self.begin_turn(session_id, text)
        return self.execute_turn(turn_id)

    def begin_turn(self, session_id: str, text: str) -> str:
        """Validate and persist a running turn, claiming the session's
        execution slot. ``execute_turn`` must follow (possibly on another
        thread) and releases the slot."""
        session = self.store.get_session(session_id)
        question = UserQuestion(text)  # raises EmptyInput before anything persists
        lock = self._session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"a turn is already running in session {session_id}")
        try:
            payload: dict[str, Any] = {
                "model_id": session["model_id"],
                "clarified": None,
                "results": [],
                "stage_events": [],
                "error": None,
                "suggestion": None,
                "context_overview": None,
                "awaiting_confirmation": False,
            }
            return self.store.create_turn(session_id, question.text, payload)
        except BaseException:
            lock.release()
            raise

    _PAYLOAD_KEYS = (
        "model_id",
        "clarified",
        "results",
        "stage_events",
        "error",
        "suggestion",
        "context_overview",
        "awaiting_confirmation",
    )

    def execute_turn(self, turn_id: str) -> dict[str, Any]:
        """Run the pipeline for a turn created by ``begin_turn``. With
        confirmation required, stops after clarification with the session
        slot still held; ``confirm_turn`` finishes or cancels."""
        turn = self.store.get_turn(turn_id)
        session_id = turn["session_id"]
        lock = self._session_lock(session_id)
        hold = False
        try:
            session = self.store.get_session(session_id)
            try:
                runtime = self.ensure_context(session["dataset"])
                result = self._run_turn(session, turn, runtime)
                hold = bool(result.get("awaiting_confirmation"))
                return result
            except InsightError as exc:
                return self._fail_turn(turn_id, str(exc), getattr(exc, "suggestion", None))
            except Exception as exc:  # noqa: BLE001 - turn isolation boundary
                logger.exception("turn %s crashed", turn_id)
                return self._fail_turn(turn_id, f"internal error: {exc}", None)
        finally:
            if not hold and lock.locked():
                lock.release()

    def confirm_turn(self, turn_id: str, approve: bool = True) -> dict[str, Any]:
        """Resume (or cancel) a turn paused after clarification."""
        turn = self.store.get_turn(turn_id)
        if turn["status"] != "running" or not turn.get("awaiting_confirmation"):
            raise UnknownTurn(f"turn {turn_id} is not awaiting confirmation")
        session_id = turn["session_id"]
        lock = self._session_lock(session_id)
        try:
            payload = {k: turn[k] for k in self._PAYLOAD_KEYS}
            payload["awaiting_confirmation"] = False
            if not approve:
                payload["error"] = "cancelled before execution"
                self.store.update_turn(turn_id, "failed", payload)
                return self.store.get_turn(turn_id)
            self.store.update_turn(turn_id, "running", payload)
            session = self.store.get_session(session_id)
            try:
                runtime = self.ensure_context(session["dataset"])
                return self._answer_turn(session, self.store.get_turn(turn_id), runtime)
            except InsightError as exc:
                return self._fail_turn(turn_id, str(exc), getattr(exc, "suggestion", None))
            except Exception as exc:  # noqa: BLE001 - turn isolation boundary
                logger.exception("turn %s crashed", turn_id)
                return self._fail_turn(turn_id, f"internal error: {exc}", None)
        finally:
            if lock.locked():
                lock.release()

    def _fail_turn(
        self, turn_id: str, error: str, suggestion: str | None
    ) -> dict[str, Any]:
        # Re-read so stage events persisted mid-pipeline survive the failure.
        current = self.store.get_turn(turn_id)
        payload = {k: current[k] for k in self._PAYLOAD_KEYS}
        payload["error"] = error
        # Result entries belong to done turns only.
        payload["results"] = []
        payload["awaiting_confirmation"] = False
        if suggestion is not None:
            payload["error"] = "question cannot be answered from this dataset"
            payload["suggestion"] = suggestion
        self.store.update_turn(turn_id, "failed", payload)
        return self.store.get_turn(turn_id)

    def _gateway_for(self, model_id: str) -> LlmGateway:
        if model_id == self.gateway.config.default_model:
            return self.gateway
        return self.gateway.for_model(model_id)

    def _emitter(self, turn_id: str, payload: dict[str, Any]):
        """Stage-event recorder. Deduplicates stages and keeps their
        timestamps monotone; every event is persisted as it happens so
        pollers see progress."""
        seen_stages = {event[0] for event in payload["stage_events"]}
        last_ts = max((event[1] for event in payload["stage_events"]), default=0.0)

        def emit(stage: str) -> None:
            nonlocal last_ts
            if stage in seen_stages:
                return
            seen_stages.add(stage)
            ts = max(time.time(), last_ts)
            last_ts = ts
            payload["stage_events"].append([stage, ts])
            self.store.update_turn(turn_id, "running", payload)

        return emit

    def _run_turn(
        self,
        session: dict[str, Any],
        turn: dict[str, Any],
        runtime: _DatasetRuntime,
    ) -> dict[str, Any]:
        turn_id = turn["id"]
        question = UserQuestion(turn["question"])
        gateway = self._gateway_for(turn["model_id"])
        payload: dict[str, Any] = {k: turn[k] for k in self._PAYLOAD_KEYS}
        emit = self._emitter(turn_id, payload)

        context = runtime.context
        assert context is not None and runtime.table_index is not None

        if _normalize_question(question.text) == OVERVIEW_QUESTION:
            emit("hdc")
            payload["context_overview"] = self._overview_payload(context)
            self.store.update_turn(turn_id, "done", payload)
            return self.store.get_turn(turn_id)

        try:
            emit("clarify")
            task = prepare_task(question, context.summary, gateway, self.config.pipeline)
            emit("decompose")
            payload["clarified"] = {
                "original": task.original,
                "clarified": task.clarified,
                "assumptions": task.assumptions,
                "needs_decomposition": task.needs_decomposition,
                "sub_tasks": task.sub_tasks,
            }
            if self.config.require_confirmation:
                payload["awaiting_confirmation"] = True
                self.store.update_turn(turn_id, "running", payload)
                return self.store.get_turn(turn_id)
            self.store.update_turn(turn_id, "running", payload)
        except OffTopic as exc:
            payload["error"] = "question cannot be answered from this dataset"
            payload["suggestion"] = exc.suggestion
            self.store.update_turn(turn_id, "failed", payload)
            return self.store.get_turn(turn_id)
        except InsightError as exc:
            payload["error"] = str(exc)
            self.store.update_turn(turn_id, "failed", payload)
            return self.store.get_turn(turn_id)

        return self._answer_turn(session, self.store.get_turn(turn_id), runtime)

    def _answer_turn(
        self,
        session: dict[str, Any],
        turn: dict[str, Any],
        runtime: _DatasetRuntime,
    ) -> dict[str, Any]:
        """SQL generation, execution and chart recommendation for a turn
        whose clarification is already persisted."""
        turn_id = turn["id"]
        gateway = self._gateway_for(turn["model_id"])
        payload: dict[str, Any] = {k: turn[k] for k in self._PAYLOAD_KEYS}
        emit = self._emitter(turn_id, payload)

        context = runtime.context
        assert context is not None and runtime.table_index is not None

        clarified = payload["clarified"] or {}
        units = (
            clarified["sub_tasks"]
            if clarified.get("needs_decomposition")
            else [clarified.get("clarified") or turn["question"]]
        )

        try:
            outcomes = answer_task(
                units,
                context,
                runtime.table_index,
                runtime.engine,
                gateway,
                self.config.pipeline,
                on_stage=emit,
            )
            emit("chart")
            for outcome in outcomes:
                payload["results"].append(
                    self._result_entry(outcome, gateway)
                )

            # The turn only counts as done when at least one sub-task landed.
            if any(r["result"] is not None for r in payload["results"]):
                self.store.update_turn(turn_id, "done", payload)
            else:
                payload["error"] = "; ".join(
                    r["error"] or "failed" for r in payload["results"]
                )
                payload["results"] = []
                self.store.update_turn(turn_id, "failed", payload)
        except OffTopic as exc:
            payload["error"] = "question cannot be answered from this dataset"
            payload["suggestion"] = exc.suggestion
            payload["results"] = []
            self.store.update_turn(turn_id, "failed", payload)
        except InsightError as exc:
            payload["error"] = str(exc)
            payload["results"] = []
            self.store.update_turn(turn_id, "failed", payload)

        return self.store.get_turn(turn_id)

    def _result_entry(self, outcome, gateway) -> dict[str, Any]:
        entry: dict[str, Any] = {
            "sub_task": outcome.sub_task,
            "sql": outcome.candidate.sql_text if outcome.candidate else None,
            "candidate": None,
            "trace": None,
            "result": None,
            "recommendations": [],
            "error": outcome.error,
        }
        if outcome.candidate is not None:
            entry["candidate"] = {
                "sql_text": outcome.candidate.sql_text,
                "dialect_id": outcome.candidate.dialect_id,
                "produced_by_round": outcome.candidate.produced_by_round,
            }
        if outcome.trace is not None:
            entry["trace"] = {
                "rounds": [
                    {
                        "phase": r.phase,
                        "input_sql": r.input_sql,
                        "feedback": r.feedback,
                        "output_sql": r.output_sql,
                    }
                    for r in outcome.trace.rounds
                ],
                "final": {
                    "sql_text": outcome.trace.final.sql_text,
                    "dialect_id": outcome.trace.final.dialect_id,
                    "produced_by_round": outcome.trace.final.produced_by_round,
                },
                "succeeded": outcome.trace.succeeded,
            }
        if outcome.result is not None:
            result = outcome.result
            entry["result"] = {
                "column_names": result.column_names(),
                "column_kinds": result.column_kinds(),
                "rows": [list(r) for r in result.rows],
                "elapsed_ms": result.elapsed_ms,
                "truncated": result.truncated,
            }
            recommendations = recommend_for_result(
                result.column_names(),
                result.column_kinds(),
                result.rows,
                task=outcome.sub_task,
                gateway=gateway,
            )
            entry["recommendations"] = [
                {
                    "chart_type": r.chart_type,
                    "axis_bindings": r.axis_bindings,
                    "rank": r.rank,
                    "source": r.source,
                    "rule": r.rule,
                    "reason": r.reason,
                }
                for r in recommendations
            ]
        return entry

    @staticmethod
    def _overview_payload(context: SchemaContext) -> dict[str, Any]:
        return {
            "database": context.database,
            "summary": context.summary.text,
            "keywords": context.summary.keywords,
            "tables": [
                {
                    "table": t.table,
                    "entity": t.entity,
                    "table_type": t.table_type,
                    "narrative": t.narrative,
                    "key_attributes": t.key_attributes,
                }
                for t in context.tables
            ],
            "entities": [
                {"name": e.name, "tables": e.tables, "description": e.description}
                for e in context.entities
            ],
            "relationships": [
                {
                    "from": f"{r.from_table}.{r.from_column}",
                    "to": f"{r.to_table}.{r.to_column}",
                    "declared": r.declared,
                }
                for r in context.relationships
            ],
        }

    def get_turn(self, session_id: str, turn_id: str) -> dict[str, Any]:
        turn = self.store.get_turn(turn_id)
        if turn["session_id"] != session_id:
            raise UnknownSession(f"turn {turn_id} is not in session {session_id}")
        return turn

    # -- bookmarks --------------------------------------------------------------------

    def add_bookmark(self, turn_id: str, sub_task_index: int, label: str) -> dict[str, Any]:
        turn = self.store.get_turn(turn_id)
        if turn["status"] != "done":
            raise UnknownTurn(
                f"turn {turn_id} is not done; only done turns can be bookmarked"
            )
        results = turn.get("results") or []
        if not 0 <= sub_task_index < len(results):
            raise IndexOutOfRange(
                f"turn {turn_id} has {len(results)} results, index {sub_task_index} invalid"
            )
        bookmark_id = self.store.add_bookmark(turn_id, sub_task_index, label)
        return {
            "id": bookmark_id,
            "turn_id": turn_id,
            "sub_task_index": sub_task_index,
            "label": label,
        }

    def list_bookmarks(self, session_id: str) -> list[dict[str, Any]]:
        self.store.get_session(session_id)  # raises UnknownSession
        return self.store.list_bookmarks(session_id)

    def compare(self, bookmark_ids: list[str]) -> list[dict[str, Any]]:
        """The referenced results side by side, in request order."""
        panels = []
        for bookmark_id in bookmark_ids:
            bookmark = self.store.get_bookmark(bookmark_id)
            turn = self.store.get_turn(bookmark["turn_id"])
            results = turn.get("results") or []
            index = bookmark["sub_task_index"]
            if not 0 <= index < len(results):
                raise IndexOutOfRange(f"bookmark {bookmark_id} references result {index}")
            entry = results[index]
            panels.append(
                {
                    "bookmark_id": bookmark_id,
                    "label": bookmark["label"],
                    "turn_id": bookmark["turn_id"],
                    "sub_task_index": index,
                    "question": turn["question"],
                    "sub_task": entry["sub_task"],
                    "sql": entry["sql"],
                    "result": entry["result"],
                    "recommendations": entry["recommendations"],
                }
            )
        return panels

    def close(self) -> None:
        self.store.close()
