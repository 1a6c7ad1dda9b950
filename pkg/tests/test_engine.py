"""Engine behavior: introspection, sampling, execution, read-only safety."""

from __future__ import annotations

import random
import sqlite3

import pytest

from insight.engine import SqliteEngine, _parse_column_comments, _resolve_path
from insight.errors import ConnectionFailed, EmptySchema, EngineError, UnknownTable


def _make_db(path, script: str) -> str:
    conn = sqlite3.connect(str(path))
    conn.executescript(script)
    conn.commit()
    conn.close()
    return str(path)


# -- construction ---------------------------------------------------------------


def test_missing_file_fails_fast(tmp_path):
    with pytest.raises(ConnectionFailed):
        SqliteEngine(str(tmp_path / "nope.db"))


def test_path_resolution():
    assert str(_resolve_path("sqlite:///var/data/x.db")) == "var/data/x.db"
    assert str(_resolve_path("sqlite://x.db")) == "x.db"
    assert str(_resolve_path("plain.db")) == "plain.db"


# -- introspection ----------------------------------------------------------------


def test_introspect_financial(financial_engine):
    schema = financial_engine.introspect()
    assert schema.database_name == "financial"
    assert schema.dialect_id == "sqlite"
    assert schema.table_names() == ["account", "card", "client", "disp", "district", "loan"]

    loan = schema.table("loan")
    assert loan.column_names() == [
        "loan_id", "account_id", "date", "amount", "duration", "payments", "status",
    ]
    assert loan.declared_primary_key == ["loan_id"]
    assert loan.row_count_estimate == 6
    assert loan.foreign_keys == []
    assert loan.column("loan_id").is_primary_key
    assert not loan.column("status").is_primary_key
    assert loan.column("status").comment == "loan status: A/B/C/D"
    assert loan.column("amount").comment is None
    assert loan.column("amount").sql_type == "REAL"


def test_introspect_composite_pk_and_foreign_keys(tmp_path):
    db = _make_db(
        tmp_path / "rel.db",
        """
        CREATE TABLE author (author_id INTEGER PRIMARY KEY, name TEXT);
        CREATE TABLE book (
            book_id INTEGER PRIMARY KEY,
            author_id INTEGER REFERENCES author(author_id),
            title TEXT
        );
        CREATE TABLE shelf (room TEXT, slot INTEGER, PRIMARY KEY (room, slot));
        """,
    )
    schema = SqliteEngine(db).introspect()
    book = schema.table("book")
    assert [
        (fk.column, fk.ref_table, fk.ref_column) for fk in book.foreign_keys
    ] == [("author_id", "author", "author_id")]
    # Composite key keeps declaration order, not column order.
    assert schema.table("shelf").declared_primary_key == ["room", "slot"]


class _EmptyCursor:
    def __iter__(self):
        return iter([])

    def fetchall(self):
        return []

    def fetchone(self):
        return (0,)


class _NoColumnsConn:
    def execute(self, sql, *args):
        return _EmptyCursor()


def test_zero_column_table_rejected(financial_engine):
    with pytest.raises(EmptySchema):
        financial_engine._introspect_table(_NoColumnsConn(), "ghost", None)


def test_column_comment_parsing():
    ddl = """CREATE TABLE t (
        a INTEGER PRIMARY KEY,  -- row identity
        "b" TEXT,-- quoted name
        c REAL,
        d TEXT  --   padded   comment
    )"""
    comments = _parse_column_comments(ddl)
    assert comments["a"] == "row identity"
    assert comments["b"] == "quoted name"
    assert "c" not in comments
    assert comments["d"] == "padded   comment"
    assert _parse_column_comments(None) == {}


# -- sampling ------------------------------------------------------------------------


def _loan_rows(db_path: str) -> list[tuple]:
    conn = sqlite3.connect(db_path)
    rows = [tuple(r) for r in conn.execute("SELECT * FROM loan ORDER BY loan_id")]
    conn.close()
    return rows


def reservoir_oracle(rows: list[tuple], n: int, seed: int) -> list[tuple]:
    """Independent reservoir reference over an already-ordered stream."""
    rng = random.Random(seed)
    chosen: list[tuple[int, tuple]] = []
    for i, row in enumerate(rows):
        if i < n:
            chosen.append((i, row))
        else:
            j = rng.randrange(i + 1)
            if j < n:
                chosen[j] = (i, row)
    chosen.sort()
    return [row for _, row in chosen]


def test_sample_matches_reservoir_oracle(financial_engine, financial_db):
    stream = _loan_rows(financial_db)
    for n in (0, 1, 3, 5, 6, 10):
        for seed in (0, 7, 99):
            sample = financial_engine.sample_rows("loan", n, seed)
            assert sample.rows == reservoir_oracle(stream, n, seed)
            assert sample.columns[0] == "loan_id"
            assert sample.seed == seed


def test_sample_is_deterministic_and_order_stable(financial_engine):
    a = financial_engine.sample_rows("loan", 3, seed=7)
    b = financial_engine.sample_rows("loan", 3, seed=7)
    assert a.rows == b.rows
    # Output preserves stream order: loan_id ascending.
    ids = [row[0] for row in a.rows]
    assert ids == sorted(ids)
    # Some seed must pick a different subset on 6-choose-3.
    variants = {tuple(financial_engine.sample_rows("loan", 3, s).rows) for s in range(8)}
    assert len(variants) > 1


def test_sample_without_declared_pk_orders_by_all_columns(medical_db):
    engine = SqliteEngine(medical_db)
    conn = sqlite3.connect(medical_db)
    stream = [
        tuple(r)
        for r in conn.execute(
            "SELECT * FROM examination ORDER BY id, exam_date, test_result, symptoms"
        )
    ]
    conn.close()
    sample = engine.sample_rows("examination", 5, seed=7)
    assert sample.rows == reservoir_oracle(stream, 5, 7)


def test_sample_errors(financial_engine):
    with pytest.raises(UnknownTable):
        financial_engine.sample_rows("ghost", 3, seed=1)
    with pytest.raises(ValueError):
        financial_engine.sample_rows("loan", -1, seed=1)
    assert financial_engine.sample_rows("loan", 0, seed=1).rows == []


# -- explain / execute ------------------------------------------------------------------


def test_explain_accepts_valid_sql(financial_engine):
    assert financial_engine.explain("SELECT status FROM loan") is None


def test_explain_reports_engine_error(financial_engine):
    with pytest.raises(EngineError, match="no such column"):
        financial_engine.explain("SELECT nope FROM loan")
    with pytest.raises(EngineError, match="no such table"):
        financial_engine.explain("SELECT 1 FROM ghost")


def test_execute_shapes_result(financial_engine):
    result = financial_engine.execute("SELECT loan_id, status FROM loan ORDER BY loan_id")
    assert result.column_names == ["loan_id", "status"]
    assert len(result.rows) == 6
    assert result.rows[0] == (1, "A")
    assert result.truncated is False
    assert result.elapsed_ms >= 0.0


def test_execute_row_cap_truncates(financial_engine):
    result = financial_engine.execute("SELECT loan_id FROM loan ORDER BY loan_id", row_cap=2)
    assert result.truncated is True
    assert result.rows == [(1,), (2,)]


def test_execute_runtime_error(financial_engine):
    # Compiles fine, overflows at run time.
    sql = "SELECT abs(-9223372036854775808)"
    financial_engine.explain(sql)
    with pytest.raises(EngineError, match="overflow"):
        financial_engine.execute(sql)


def test_watchdog_aborts_runaway_statement(financial_db):
    engine = SqliteEngine(financial_db, statement_timeout_s=0.05)
    with pytest.raises(EngineError, match="interrupt"):
        engine.execute(
            "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
            "SELECT count(*) FROM c"
        )
