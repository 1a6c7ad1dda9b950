"""SQLite query engine: introspection, sampling, EXPLAIN and execution.

All query execution happens over read-only connections with an
authorizer that vetoes writes, so even SQL that slipped past upstream
validation cannot mutate a dataset. Every veto increments the module
counter ``MUTATION_ATTEMPTS``; a healthy deployment keeps it at zero.
"""

from __future__ import annotations

import logging
import random
import re
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .catalog import ColumnDef, DatabaseSchema, ForeignKey, SampledRows, TableDef
from .errors import ConnectionFailed, EmptySchema, EngineError, UnknownTable

logger = logging.getLogger(__name__)

# Writes vetoed by the read-only authorizer across all connections.
MUTATION_ATTEMPTS = 0

_READ_OK = {
    sqlite3.SQLITE_SELECT,
    sqlite3.SQLITE_READ,
    sqlite3.SQLITE_FUNCTION,
    sqlite3.SQLITE_RECURSIVE,
    # Introspection needs table_info/foreign_key_list; the read-only file
    # handle already refuses any pragma that would write.
    sqlite3.SQLITE_PRAGMA,
}


def _authorizer(action: int, arg1, arg2, db_name, trigger) -> int:
    global MUTATION_ATTEMPTS
    if action in _READ_OK:
        return sqlite3.SQLITE_OK
    # Transaction bookkeeping on a read-only database is harmless.
    if action in (sqlite3.SQLITE_TRANSACTION, sqlite3.SQLITE_SAVEPOINT):
        return sqlite3.SQLITE_OK
    MUTATION_ATTEMPTS += 1
    logger.warning("blocked non-read action %s on %s", action, arg1)
    return sqlite3.SQLITE_DENY


_COMMENT_RE = re.compile(r"--\s*(.+?)\s*$")


def _parse_column_comments(create_sql: str | None) -> dict[str, str]:
    """Trailing ``-- text`` comments per column line of a CREATE TABLE
    statement. Line must start with a quoted or bare identifier."""
    if not create_sql:
        return {}
    comments: dict[str, str] = {}
    for line in create_sql.splitlines():
        stripped = line.strip()
        m = re.match(r'^[`"\[]?(\w+)[`"\]]?\s', stripped)
        if not m:
            continue
        cm = _COMMENT_RE.search(stripped)
        if cm:
            comments[m.group(1)] = cm.group(1)
    return comments


def _resolve_path(spec: str) -> Path:
    if spec.startswith("sqlite:///"):
        return Path(spec[len("sqlite:///"):])
    if spec.startswith("sqlite://"):
        return Path(spec[len("sqlite://"):])
    return Path(spec)


@dataclass
class ExecutionResult:
    column_names: list[str]
    rows: list[tuple[Any, ...]]
    elapsed_ms: float
    truncated: bool


class SqliteEngine:
    """One engine per database file. Connections are opened per call in
    read-only mode; nothing is cached between calls except the path."""

    def __init__(self, spec: str, statement_timeout_s: float = 30.0):
        self.path = _resolve_path(spec)
        self.statement_timeout_s = statement_timeout_s
        if not self.path.exists():
            raise ConnectionFailed(f"database file not found: {self.path}")
        # Fail fast on unreadable or corrupt files.
        try:
            conn = self._connect()
            conn.execute("SELECT 1").fetchone()
            conn.close()
        except sqlite3.Error as exc:
            raise ConnectionFailed(f"cannot open {self.path}: {exc}") from exc

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(
            f"file:{self.path}?mode=ro", uri=True, timeout=self.statement_timeout_s
        )
        conn.set_authorizer(_authorizer)
        deadline = time.monotonic() + self.statement_timeout_s

        def _watchdog() -> int:
            return 1 if time.monotonic() > deadline else 0

        # Fires every ~10k VM ops; aborts statements that outlive the budget.
        conn.set_progress_handler(_watchdog, 10_000)
        return conn

    # -- introspection -----------------------------------------------------------

    def introspect(self) -> DatabaseSchema:
        conn = self._connect()
        try:
            rows = conn.execute(
                "SELECT name, sql FROM sqlite_master "
                "WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
                "ORDER BY name"
            ).fetchall()
            tables = [self._introspect_table(conn, name, ddl) for name, ddl in rows]
        except sqlite3.Error as exc:
            raise EngineError(str(exc)) from exc
        finally:
            conn.close()
        return DatabaseSchema(database_name=self.path.stem, tables=tables, dialect_id="sqlite")

    def _introspect_table(
        self, conn: sqlite3.Connection, name: str, ddl: str | None
    ) -> TableDef:
        comments = _parse_column_comments(ddl)
        columns: list[ColumnDef] = []
        pk: list[tuple[int, str]] = []
        for cid, col_name, col_type, notnull, _default, pk_pos in conn.execute(
            f"PRAGMA table_info({self._quote(name)})"
        ):
            columns.append(
                ColumnDef(
                    name=col_name,
                    sql_type=col_type or "ANY",
                    nullable=not notnull and not pk_pos,
                    is_primary_key=bool(pk_pos),
                    comment=comments.get(col_name),
                )
            )
            if pk_pos:
                pk.append((pk_pos, col_name))
        if not columns:
            raise EmptySchema(f"table {name!r} has no columns")
        fks = [
            ForeignKey(column=frm, ref_table=ref_table, ref_column=to or frm)
            for _id, _seq, ref_table, frm, to, *_ in conn.execute(
                f"PRAGMA foreign_key_list({self._quote(name)})"
            )
        ]
        fks.sort(key=lambda fk: (fk.column, fk.ref_table, fk.ref_column))
        count = conn.execute(f"SELECT COUNT(*) FROM {self._quote(name)}").fetchone()[0]
        return TableDef(
            name=name,
            columns=columns,
            declared_primary_key=[c for _, c in sorted(pk)],
            foreign_keys=fks,
            row_count_estimate=int(count),
        )

    @staticmethod
    def _quote(identifier: str) -> str:
        return '"' + identifier.replace('"', '""') + '"'

    # -- sampling ---------------------------------------------------------------

    def sample_rows(self, table: str, n: int, seed: int) -> SampledRows:
        """Uniform reservoir sample of ``n`` rows, deterministic for a given
        seed. The scan iterates in primary-key order so the stream the
        reservoir sees is itself stable. ``n`` of zero yields no rows."""
        if n < 0:
            raise ValueError("sample size must be >= 0")
        conn = self._connect()
        try:
            exists = conn.execute(
                "SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ?",
                (table,),
            ).fetchone()
            if not exists:
                raise UnknownTable(table)
            # Stream in primary-key order (all columns when no declared key)
            # so the reservoir sees the same sequence on every engine.
            info = conn.execute(f"PRAGMA table_info({self._quote(table)})").fetchall()
            pk = sorted((row[5], row[1]) for row in info if row[5])
            order_cols = [c for _, c in pk] or [row[1] for row in info]
            order = ", ".join(self._quote(c) for c in order_cols)
            cursor = conn.execute(
                f"SELECT * FROM {self._quote(table)} ORDER BY {order}"
            )
            column_names = [d[0] for d in cursor.description]
            rng = random.Random(seed)
            reservoir: list[tuple[int, tuple[Any, ...]]] = []
            if n > 0:
                for i, row in enumerate(cursor):
                    if i < n:
                        reservoir.append((i, tuple(row)))
                    else:
                        j = rng.randrange(i + 1)
                        if j < n:
                            reservoir[j] = (i, tuple(row))
            # Stream order, not replacement order.
            reservoir.sort(key=lambda item: item[0])
            return SampledRows(
                table=table,
                columns=column_names,
                rows=[row for _, row in reservoir],
                seed=seed,
            )
        except sqlite3.Error as exc:
            raise EngineError(str(exc)) from exc
        finally:
            conn.close()

    # -- query execution -----------------------------------------------------------

    def explain(self, sql: str) -> None:
        """Compile-check a statement without running it. Raises
        :class:`EngineError` carrying the engine's message on failure."""
        conn = self._connect()
        try:
            conn.execute(f"EXPLAIN {sql}").fetchall()
        except sqlite3.Error as exc:
            raise EngineError(str(exc)) from exc
        finally:
            conn.close()

    def execute(self, sql: str, row_cap: int = 10_000) -> ExecutionResult:
        conn = self._connect()
        start = time.monotonic()
        try:
            cursor = conn.execute(sql)
            column_names = [d[0] for d in cursor.description] if cursor.description else []
            rows = cursor.fetchmany(row_cap + 1)
            truncated = len(rows) > row_cap
            if truncated:
                rows = rows[:row_cap]
            return ExecutionResult(
                column_names=column_names,
                rows=[tuple(r) for r in rows],
                elapsed_ms=(time.monotonic() - start) * 1000.0,
                truncated=truncated,
            )
        except sqlite3.Error as exc:
            raise EngineError(str(exc)) from exc
        finally:
            conn.close()
