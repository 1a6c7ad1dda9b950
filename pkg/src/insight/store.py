"""Durable session storage in an embedded SQLite file.

Holds registered datasets (with their schema snapshot and generated
context document), sessions, turns and bookmarks. Everything the
service must survive a restart with lives here. One connection is
shared across threads behind a lock; writes are immediate (autocommit)
so a crash loses at most the in-flight turn update.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
import uuid
from typing import Any

from .errors import NameConflict, UnknownDataset, UnknownSession, UnknownTurn

_SCHEMA = """
CREATE TABLE IF NOT EXISTS datasets (
    name        TEXT PRIMARY KEY,
    spec        TEXT NOT NULL,
    schema_json TEXT NOT NULL,
    context_json TEXT,
    created_at  REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    id         TEXT PRIMARY KEY,
    dataset    TEXT NOT NULL REFERENCES datasets(name),
    model_id   TEXT NOT NULL,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS turns (
    id         TEXT PRIMARY KEY,
    session_id TEXT NOT NULL REFERENCES sessions(id),
    seq        INTEGER NOT NULL,
    question   TEXT NOT NULL,
    status     TEXT NOT NULL,
    payload    TEXT NOT NULL,
    created_at REAL NOT NULL,
    UNIQUE (session_id, seq)
);
CREATE TABLE IF NOT EXISTS bookmarks (
    id             TEXT PRIMARY KEY,
    turn_id        TEXT NOT NULL REFERENCES turns(id),
    sub_task_index INTEGER NOT NULL,
    label          TEXT NOT NULL,
    created_at     REAL NOT NULL
);
"""


def _new_id() -> str:
    return uuid.uuid4().hex[:16]


class SessionStore:
    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        with self._lock:
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- datasets ---------------------------------------------------------------

    def save_dataset(self, name: str, spec: str, schema_doc: dict[str, Any]) -> None:
        with self._lock:
            try:
                self._conn.execute(
                    "INSERT INTO datasets (name, spec, schema_json, created_at) "
                    "VALUES (?, ?, ?, ?)",
                    (name, spec, json.dumps(schema_doc), time.time()),
                )
            except sqlite3.IntegrityError as exc:
                raise NameConflict(f"dataset {name!r} already registered") from exc

    def get_dataset(self, name: str) -> dict[str, Any]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM datasets WHERE name = ?", (name,)
            ).fetchone()
        if row is None:
            raise UnknownDataset(name)
        return {
            "name": row["name"],
            "spec": row["spec"],
            "schema": json.loads(row["schema_json"]),
            "context": json.loads(row["context_json"]) if row["context_json"] else None,
            "created_at": row["created_at"],
        }

    def list_datasets(self) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT name, spec, context_json IS NOT NULL AS has_context, created_at "
                "FROM datasets ORDER BY name"
            ).fetchall()
        return [
            {
                "name": r["name"],
                "spec": r["spec"],
                "has_context": bool(r["has_context"]),
                "created_at": r["created_at"],
            }
            for r in rows
        ]

    def set_context(self, name: str, context_doc_json: str) -> None:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE datasets SET context_json = ? WHERE name = ?",
                (context_doc_json, name),
            )
        if cur.rowcount == 0:
            raise UnknownDataset(name)

    # -- sessions ---------------------------------------------------------------

    def create_session(self, dataset: str, model_id: str) -> str:
        session_id = _new_id()
        with self._lock:
            exists = self._conn.execute(
                "SELECT 1 FROM datasets WHERE name = ?", (dataset,)
            ).fetchone()
            if not exists:
                raise UnknownDataset(dataset)
            self._conn.execute(
                "INSERT INTO sessions (id, dataset, model_id, created_at) "
                "VALUES (?, ?, ?, ?)",
                (session_id, dataset, model_id, time.time()),
            )
        return session_id

    def get_session(self, session_id: str) -> dict[str, Any]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
        if row is None:
            raise UnknownSession(session_id)
        return {
            "id": row["id"],
            "dataset": row["dataset"],
            "model_id": row["model_id"],
            "created_at": row["created_at"],
        }

    def set_session_model(self, session_id: str, model_id: str) -> None:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE sessions SET model_id = ? WHERE id = ?", (model_id, session_id)
            )
        if cur.rowcount == 0:
            raise UnknownSession(session_id)

    # -- turns -------------------------------------------------------------------

    def create_turn(self, session_id: str, question: str, payload: dict[str, Any]) -> str:
        turn_id = _new_id()
        with self._lock:
            exists = self._conn.execute(
                "SELECT 1 FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
            if not exists:
                raise UnknownSession(session_id)
            seq = self._conn.execute(
                "SELECT COALESCE(MAX(seq), 0) + 1 FROM turns WHERE session_id = ?",
                (session_id,),
            ).fetchone()[0]
            self._conn.execute(
                "INSERT INTO turns (id, session_id, seq, question, status, payload, created_at) "
                "VALUES (?, ?, ?, ?, 'running', ?, ?)",
                (turn_id, session_id, seq, question, json.dumps(payload), time.time()),
            )
        return turn_id

    def update_turn(self, turn_id: str, status: str, payload: dict[str, Any]) -> None:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE turns SET status = ?, payload = ? WHERE id = ?",
                (status, json.dumps(payload), turn_id),
            )
        if cur.rowcount == 0:
            raise UnknownTurn(turn_id)

    def get_turn(self, turn_id: str) -> dict[str, Any]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM turns WHERE id = ?", (turn_id,)
            ).fetchone()
        if row is None:
            raise UnknownTurn(turn_id)
        return self._turn_dict(row)

    def list_turns(self, session_id: str) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM turns WHERE session_id = ? ORDER BY seq", (session_id,)
            ).fetchall()
        return [self._turn_dict(r) for r in rows]

    @staticmethod
    def _turn_dict(row: sqlite3.Row) -> dict[str, Any]:
        payload = json.loads(row["payload"])
        payload.update(
            {
                "id": row["id"],
                "session_id": row["session_id"],
                "seq": row["seq"],
                "question": row["question"],
                "status": row["status"],
                "created_at": row["created_at"],
            }
        )
        return payload

    # -- bookmarks ----------------------------------------------------------------

    def add_bookmark(self, turn_id: str, sub_task_index: int, label: str) -> str:
        bookmark_id = _new_id()
        with self._lock:
            exists = self._conn.execute(
                "SELECT 1 FROM turns WHERE id = ?", (turn_id,)
            ).fetchone()
            if not exists:
                raise UnknownTurn(turn_id)
            self._conn.execute(
                "INSERT INTO bookmarks (id, turn_id, sub_task_index, label, created_at) "
                "VALUES (?, ?, ?, ?, ?)",
                (bookmark_id, turn_id, sub_task_index, label, time.time()),
            )
        return bookmark_id

    def get_bookmark(self, bookmark_id: str) -> dict[str, Any]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM bookmarks WHERE id = ?", (bookmark_id,)
            ).fetchone()
        if row is None:
            raise UnknownTurn(f"bookmark {bookmark_id} not found")
        return dict(row)

    def list_bookmarks(self, session_id: str) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT b.* FROM bookmarks b JOIN turns t ON t.id = b.turn_id "
                "WHERE t.session_id = ? ORDER BY b.created_at, b.id",
                (session_id,),
            ).fetchall()
        return [dict(r) for r in rows]
