"""Schema data model and persistence of generated context documents.

The dataclasses here describe what introspection found in a database:
tables, columns, declared keys and foreign keys, plus sampled rows. The
persistence half serializes a generated schema context to a canonical
JSON document and loads it back, refusing documents whose version it
does not know.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

from .errors import IoFailure, VersionMismatch

CONTEXT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ColumnDef:
    name: str
    sql_type: str
    nullable: bool
    is_primary_key: bool = False
    comment: str | None = None


@dataclass(frozen=True)
class ForeignKey:
    column: str
    ref_table: str
    ref_column: str


@dataclass
class TableDef:
    name: str
    columns: list[ColumnDef]
    declared_primary_key: list[str] = field(default_factory=list)
    foreign_keys: list[ForeignKey] = field(default_factory=list)
    row_count_estimate: int = 0

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> ColumnDef | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass
class DatabaseSchema:
    database_name: str
    tables: list[TableDef]
    dialect_id: str = "sqlite"

    def table(self, name: str) -> TableDef | None:
        for t in self.tables:
            if t.name == name:
                return t
        return None

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]


@dataclass
class SampledRows:
    table: str
    columns: list[str]
    rows: list[tuple[Any, ...]]
    seed: int = 0


def _canonical_dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def context_document(context: "SchemaContext") -> dict[str, Any]:  # noqa: F821
    """Plain-dict form of a generated context, suitable for serialization.

    Field order inside lists follows generation order, which is itself
    deterministic, so the canonical dump of this document is byte-stable.
    """
    return {
        "version": CONTEXT_FORMAT_VERSION,
        "database": context.database,
        "generation_model": context.generation_model,
        "columns": [
            {
                "table": c.table,
                "column": c.column,
                "type": c.sql_type,
                "description": c.description,
            }
            for c in context.columns
        ],
        "tables": [
            {
                "table": t.table,
                "narrative": t.narrative,
                "key_attributes": list(t.key_attributes),
                "primary_key": list(t.primary_key),
                "entity": t.entity,
                "table_type": t.table_type,
            }
            for t in context.tables
        ],
        "relationships": [
            {
                "from_table": r.from_table,
                "from_column": r.from_column,
                "to_table": r.to_table,
                "to_column": r.to_column,
                "rationale": r.rationale,
                "declared": r.declared,
            }
            for r in context.relationships
        ],
        "entities": [
            {
                "name": e.name,
                "tables": list(e.tables),
                "description": e.description,
            }
            for e in context.entities
        ],
        "summary": {
            "text": context.summary.text,
            "keywords": list(context.summary.keywords),
        },
    }


def serialize_context(context: "SchemaContext") -> str:  # noqa: F821
    return _canonical_dumps(context_document(context))


def persist_context(context: "SchemaContext", path: str | os.PathLike[str]) -> None:  # noqa: F821
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(serialize_context(context))
    except OSError as exc:
        raise IoFailure(f"cannot write context document to {path}: {exc}") from exc


def load_context_document(path: str | os.PathLike[str]) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read context document from {path}: {exc}") from exc
    return context_document_from_json(raw, source=str(path))


def context_document_from_json(raw: str, source: str = "<memory>") -> dict[str, Any]:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IoFailure(f"context document at {source} is not valid JSON: {exc}") from exc
    version = doc.get("version")
    if version != CONTEXT_FORMAT_VERSION:
        raise VersionMismatch(
            f"context document version {version!r}, this build reads {CONTEXT_FORMAT_VERSION}"
        )
    return doc


def context_from_document(doc: dict[str, Any]) -> "SchemaContext":  # noqa: F821
    from .context import (
        ColumnSummary,
        DatabaseSummary,
        EntitySet,
        SchemaContext,
        TableDescription,
        TableRelationship,
    )

    return SchemaContext(
        database=doc["database"],
        generation_model=doc.get("generation_model", ""),
        columns=[
            ColumnSummary(
                table=c["table"],
                column=c["column"],
                sql_type=c["type"],
                description=c["description"],
            )
            for c in doc["columns"]
        ],
        tables=[
            TableDescription(
                table=t["table"],
                narrative=t["narrative"],
                key_attributes=list(t["key_attributes"]),
                primary_key=list(t["primary_key"]),
                entity=t["entity"],
                table_type=t["table_type"],
            )
            for t in doc["tables"]
        ],
        relationships=[
            TableRelationship(
                from_table=r["from_table"],
                from_column=r["from_column"],
                to_table=r["to_table"],
                to_column=r["to_column"],
                rationale=r["rationale"],
                declared=r["declared"],
            )
            for r in doc["relationships"]
        ],
        entities=[
            EntitySet(
                name=e["name"],
                tables=list(e["tables"]),
                description=e["description"],
            )
            for e in doc["entities"]
        ],
        summary=DatabaseSummary(
            text=doc["summary"]["text"],
            keywords=list(doc["summary"]["keywords"]),
        ),
    )


def load_context(path: str | os.PathLike[str]) -> "SchemaContext":  # noqa: F821
    return context_from_document(load_context_document(path))
