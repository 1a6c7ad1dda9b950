"""Layered context generation for a relational database.

Builds, bottom-up, everything a model needs to know about a database
before answering questions over it: per-column summaries, per-table
descriptions, join relationships between tables, the central entities
and a database-level summary. Each layer feeds the next; the result is
a :class:`SchemaContext` that serializes to a canonical document.

Column and table work fans out over a worker pool, but results are
merged in schema order, so the generated context is byte-identical
regardless of pool size or scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

from .catalog import DatabaseSchema, SampledRows, TableDef
from .engine import SqliteEngine
from .errors import (
    ContextGenerationFailed,
    EmptyEntitySet,
    EmptySchema,
    NoUsableFields,
)
from .gateway import LlmGateway, Purpose
from .prompts import (
    column_summary_prompt,
    db_summary_prompt,
    entity_prompt,
    relationship_prompt,
    table_description_prompt,
)
from .vectors import VectorIndex

logger = logging.getLogger(__name__)

TABLE_TYPES = ("dimension", "bridge", "fact")


@dataclass
class PipelineConfig:
    """Tunable knobs for context generation and question answering."""

    group_max_columns: int = 10
    sample_rows_n: int = 3
    key_attributes_max: int = 5
    similar_count: int = 5
    coarse_table_top_n: int = 5
    entity_top_n: int = 3
    refine_max_rounds: int = 3
    worker_pool_size: int = 4
    decompose_max_subtasks: int = 5
    sample_seed: int = 7
    expand_neighbors: bool = True
    embed_key_attributes: bool = True
    row_cap: int = 10_000
    statement_timeout_s: float = 30.0
    schema_group_token_budget: int = 6000

    def __post_init__(self):
        for name in (
            "group_max_columns",
            "sample_rows_n",
            "key_attributes_max",
            "similar_count",
            "coarse_table_top_n",
            "entity_top_n",
            "refine_max_rounds",
            "worker_pool_size",
            "decompose_max_subtasks",
            "row_cap",
            "schema_group_token_budget",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class ColumnSummary:
    table: str
    column: str
    sql_type: str
    description: str


@dataclass
class TableDescription:
    table: str
    narrative: str
    key_attributes: list[str]
    primary_key: list[str]
    entity: str
    table_type: str


@dataclass
class TableRelationship:
    from_table: str
    from_column: str
    to_table: str
    to_column: str
    rationale: str
    declared: bool

    def undirected_key(self) -> tuple[tuple[str, str], tuple[str, str]]:
        ends = sorted([(self.from_table, self.from_column), (self.to_table, self.to_column)])
        return (ends[0], ends[1])


@dataclass
class EntitySet:
    name: str
    tables: list[str]
    description: str


@dataclass
class DatabaseSummary:
    text: str
    keywords: list[str]


@dataclass
class SchemaContext:
    database: str
    generation_model: str
    columns: list[ColumnSummary]
    tables: list[TableDescription]
    relationships: list[TableRelationship]
    entities: list[EntitySet]
    summary: DatabaseSummary

    def columns_for(self, table: str) -> list[ColumnSummary]:
        return [c for c in self.columns if c.table == table]

    def table_description(self, table: str) -> TableDescription | None:
        for t in self.tables:
            if t.table == table:
                return t
        return None

    def relationships_for(self, table: str) -> list[TableRelationship]:
        return [
            r for r in self.relationships if table in (r.from_table, r.to_table)
        ]


# -- column layer -------------------------------------------------------------------


def partition_columns(schema: DatabaseSchema, group_max_columns: int) -> list[tuple[str, list[str]]]:
    """Split each table's columns into groups of at most
    ``group_max_columns``, preserving column order and never mixing
    tables in one group."""
    groups: list[tuple[str, list[str]]] = []
    for table in schema.tables:
        names = table.column_names()
        for i in range(0, len(names), group_max_columns):
            groups.append((table.name, names[i : i + group_max_columns]))
    if not groups:
        raise EmptySchema(f"database {schema.database_name!r} has no columns")
    return groups


def _sample_payload(sample: SampledRows, columns: list[str]) -> list[dict[str, Any]]:
    idx = {name: i for i, name in enumerate(sample.columns)}
    payload = []
    for row in sample.rows:
        payload.append(
            {name: row[idx[name]] for name in columns if name in idx}
        )
    return payload


def summarize_column_group(
    database: str,
    table: TableDef,
    group: list[str],
    sample: SampledRows,
    gateway: LlmGateway,
) -> list[ColumnSummary]:
    """One model call covering one group of columns from one table."""
    col_payload = []
    for name in group:
        col = table.column(name)
        col_payload.append(
            {
                "column": name,
                "type": col.sql_type if col else "ANY",
                "nullable": col.nullable if col else True,
                "comment": col.comment if col else None,
            }
        )
    system, user = column_summary_prompt(
        database, table.name, col_payload, _sample_payload(sample, group)
    )
    exchange = gateway.chat(Purpose.COLUMN_SUMMARY, system, user)
    parsed = gateway.parse_structured(exchange, {"columns": "list"})
    by_name = {}
    for item in parsed["columns"]:
        if isinstance(item, dict) and "column" in item:
            by_name[item["column"]] = str(item.get("description", "")).strip()

    summaries = []
    for name in group:
        col = table.column(name)
        description = by_name.get(name, "").strip() or f"column {name} of table {table.name}"
        note = _value_note(sample, name)
        if note:
            description = f"{description} {note}"
        # The authored comment rides along verbatim, always last.
        if col and col.comment:
            description = f"{description} {col.comment}"
        summaries.append(
            ColumnSummary(
                table=table.name,
                column=name,
                sql_type=col.sql_type if col else "ANY",
                description=description,
            )
        )
    return summaries


def _value_note(sample: SampledRows, column: str) -> str:
    if column not in sample.columns:
        return ""
    idx = sample.columns.index(column)
    values = [row[idx] for row in sample.rows if row[idx] is not None]
    if not values:
        return ""
    rendered = ", ".join(repr(v) for v in values[:3])
    return f"Sample values: {rendered}."


# -- table layer --------------------------------------------------------------------


def describe_table(
    database: str,
    table: TableDef,
    column_summaries: list[ColumnSummary],
    gateway: LlmGateway,
    key_attributes_max: int,
) -> TableDescription:
    """One model call describing one table, grounded in its column
    summaries. Model-proposed columns that do not exist are dropped; the
    declared primary key wins over a proposed one unless the proposal
    matches it exactly."""
    cols_payload = [
        {"column": c.column, "type": c.sql_type, "description": c.description}
        for c in column_summaries
    ]
    system, user = table_description_prompt(
        database, table.name, cols_payload, table.declared_primary_key, key_attributes_max
    )
    exchange = gateway.chat(Purpose.TABLE_DESCRIPTION, system, user)
    parsed = gateway.parse_structured(
        exchange,
        {
            "narrative": "text",
            "key_attributes": "list",
            "primary_key": "list",
            "entity": "text",
            "table_type": "text",
        },
    )

    valid = set(table.column_names())
    key_attrs = [str(a) for a in parsed["key_attributes"] if str(a) in valid]
    if not key_attrs:
        raise NoUsableFields(
            f"no proposed key attribute exists in table {table.name}"
        )
    key_attrs = key_attrs[:key_attributes_max]

    proposed_pk = [str(c) for c in parsed["primary_key"] if str(c) in valid]
    declared = table.declared_primary_key
    if declared:
        pk = proposed_pk if set(proposed_pk) == set(declared) else list(declared)
    else:
        pk = proposed_pk[:1] if proposed_pk else table.column_names()[:1]

    table_type = str(parsed["table_type"]).strip().lower()
    if table_type not in TABLE_TYPES:
        table_type = "dimension"

    return TableDescription(
        table=table.name,
        narrative=str(parsed["narrative"]).strip(),
        key_attributes=key_attrs,
        primary_key=pk,
        entity=str(parsed["entity"]).strip(),
        table_type=table_type,
    )


def table_embedding_text(desc: TableDescription, embed_key_attributes: bool) -> str:
    if embed_key_attributes and desc.key_attributes:
        return f"{desc.table}: {desc.narrative} Key attributes: {', '.join(desc.key_attributes)}."
    return f"{desc.table}: {desc.narrative}"


# -- relationship layer ------------------------------------------------------------


def discover_relationships(
    database: str,
    schema: DatabaseSchema,
    descriptions: list[TableDescription],
    table_index: VectorIndex,
    gateway: LlmGateway,
    similar_count: int,
    embed_key_attributes: bool = True,
) -> list[TableRelationship]:
    """Two-stage join discovery.

    For each table, the vector index proposes its ``similar_count``
    nearest neighbours (one index query), then a single model call
    inspects just that neighbourhood for join columns. Cost is one
    search plus one call per table instead of a pairwise sweep.
    Declared foreign keys are always included and also shown to the
    model as hints. Duplicate undirected pairs keep the first rationale.
    """
    by_name = {d.table: d for d in descriptions}
    relationships: list[TableRelationship] = []
    seen: set[tuple[tuple[str, str], tuple[str, str]]] = set()

    for table in schema.tables:
        for fk in table.foreign_keys:
            # Self-referential constraints stay out: a relationship links
            # two distinct tables.
            if fk.ref_table == table.name:
                continue
            rel = TableRelationship(
                from_table=table.name,
                from_column=fk.column,
                to_table=fk.ref_table,
                to_column=fk.ref_column,
                rationale="declared foreign key",
                declared=True,
            )
            key = rel.undirected_key()
            if key not in seen:
                seen.add(key)
                relationships.append(rel)

    if len(schema.tables) < 2:
        return relationships

    for table in schema.tables:
        desc = by_name[table.name]
        query_vec = gateway.embed(
            table_embedding_text(desc, embed_key_attributes)
        ).values
        hits = table_index.top_k(query_vec, k=similar_count, exclude=table.name)
        candidates = []
        declared_hints = []
        for hit in hits:
            cand_table = schema.table(hit.id)
            cand_desc = by_name.get(hit.id)
            if cand_table is None or cand_desc is None:
                continue
            candidates.append(
                {
                    "table": hit.id,
                    "columns": cand_table.column_names(),
                    "narrative": cand_desc.narrative,
                }
            )
        for fk in table.foreign_keys:
            declared_hints.append(
                {"from_column": fk.column, "to_table": fk.ref_table, "to_column": fk.ref_column}
            )
        subject_card = {
            "table": table.name,
            "columns": table.column_names(),
            "narrative": desc.narrative,
        }
        system, user = relationship_prompt(
            database, table.name, subject_card, candidates, declared_hints
        )
        exchange = gateway.chat(Purpose.RELATIONSHIP, system, user)
        parsed = gateway.parse_structured(exchange, {"relationships": "list"})

        candidate_names = {c["table"] for c in candidates}
        for item in parsed["relationships"]:
            if not isinstance(item, dict):
                continue
            rel = _validated_relationship(item, table, schema, candidate_names)
            if rel is None:
                continue
            key = rel.undirected_key()
            if key in seen:
                continue
            seen.add(key)
            relationships.append(rel)

    return relationships


def _validated_relationship(
    item: dict[str, Any],
    subject: TableDef,
    schema: DatabaseSchema,
    candidate_names: set[str],
) -> TableRelationship | None:
    try:
        from_table = str(item["from_table"])
        from_column = str(item["from_column"])
        to_table = str(item["to_table"])
        to_column = str(item["to_column"])
    except KeyError:
        return None
    rationale = str(item.get("rationale", "")).strip() or "proposed join"
    if from_table == to_table:
        return None
    # The subject must be one end; the other end must be a shown candidate.
    ends = {from_table, to_table}
    if subject.name not in ends:
        return None
    other = (ends - {subject.name}).pop()
    if other not in candidate_names:
        return None
    ft, tt = schema.table(from_table), schema.table(to_table)
    if ft is None or tt is None:
        return None
    if ft.column(from_column) is None or tt.column(to_column) is None:
        return None
    return TableRelationship(
        from_table=from_table,
        from_column=from_column,
        to_table=to_table,
        to_column=to_column,
        rationale=rationale,
        declared=False,
    )


# -- entity layer --------------------------------------------------------------------


def rank_tables_by_degree(
    schema: DatabaseSchema, relationships: list[TableRelationship]
) -> list[tuple[str, int]]:
    """Tables sorted by how many distinct undirected join edges touch
    them, then by name. Self-joins count once."""
    degree = {t.name: 0 for t in schema.tables}
    seen: set[tuple[tuple[str, str], tuple[str, str]]] = set()
    for rel in relationships:
        key = rel.undirected_key()
        if key in seen:
            continue
        seen.add(key)
        if rel.from_table in degree:
            degree[rel.from_table] += 1
        if rel.to_table != rel.from_table and rel.to_table in degree:
            degree[rel.to_table] += 1
    return sorted(degree.items(), key=lambda kv: (-kv[1], kv[0]))


def extract_entities(
    database: str,
    schema: DatabaseSchema,
    descriptions: list[TableDescription],
    relationships: list[TableRelationship],
    gateway: LlmGateway,
    entity_top_n: int,
) -> list[EntitySet]:
    """Name the central entities from the most connected tables.

    Single-table databases skip the model call; the lone table's entity
    stands in."""
    by_name = {d.table: d for d in descriptions}
    if len(schema.tables) == 1:
        only = descriptions[0]
        return [
            EntitySet(
                name=only.entity or only.table,
                tables=[only.table],
                description=only.narrative,
            )
        ]

    ranked = rank_tables_by_degree(schema, relationships)[:entity_top_n]
    payload = []
    for name, degree in ranked:
        desc = by_name.get(name)
        payload.append(
            {
                "table": name,
                "relationship_count": degree,
                "entity_hint": desc.entity if desc else "",
                "narrative": desc.narrative if desc else "",
            }
        )
    system, user = entity_prompt(database, payload, entity_top_n)
    exchange = gateway.chat(Purpose.ENTITY, system, user)
    parsed = gateway.parse_structured(exchange, {"entities": "list"})

    known = set(schema.table_names())
    entities: list[EntitySet] = []
    seen_names: set[str] = set()
    for item in parsed["entities"]:
        if not isinstance(item, dict) or "name" not in item:
            continue
        name = str(item["name"]).strip()
        if not name or name.lower() in seen_names:
            continue
        tables = [str(t) for t in item.get("tables", []) if str(t) in known]
        if not tables:
            continue
        seen_names.add(name.lower())
        entities.append(
            EntitySet(
                name=name,
                tables=tables,
                description=str(item.get("description", "")).strip(),
            )
        )
    if not entities:
        # Model produced nothing usable; anchor entities on the ranked tables.
        for name, _ in ranked:
            desc = by_name.get(name)
            if desc and desc.entity:
                entities.append(
                    EntitySet(name=desc.entity, tables=[name], description=desc.narrative)
                )
    return entities


# -- summary layer -------------------------------------------------------------------


def summarize_database(
    database: str,
    schema: DatabaseSchema,
    entities: list[EntitySet],
    gateway: LlmGateway,
) -> DatabaseSummary:
    if not entities:
        raise EmptyEntitySet(f"no entities extracted for {database!r}")
    payload = [
        {"name": e.name, "tables": e.tables, "description": e.description}
        for e in entities
    ]
    system, user = db_summary_prompt(database, payload, len(schema.tables))
    exchange = gateway.chat(Purpose.DB_SUMMARY, system, user)
    parsed = gateway.parse_structured(exchange, {"summary": "text", "keywords": "list"})
    keywords: list[str] = []
    seen: set[str] = set()
    for kw in parsed["keywords"]:
        text = str(kw).strip()
        if text and text.lower() not in seen:
            seen.add(text.lower())
            keywords.append(text)
    return DatabaseSummary(text=str(parsed["summary"]).strip(), keywords=keywords[:10])


# -- orchestration -------------------------------------------------------------------


def generate_context(
    engine: SqliteEngine,
    gateway: LlmGateway,
    cfg: PipelineConfig,
    schema: DatabaseSchema | None = None,
    on_progress: Callable[[str], None] | None = None,
) -> tuple[SchemaContext, VectorIndex, VectorIndex]:
    """Full context build: columns, tables, relationships, entities,
    summary, plus the two vector indexes (tables and entities) used at
    question time.

    Column and table calls run on a worker pool; results merge in schema
    order so output is independent of scheduling.
    """

    completed: list[str] = []
    stage_name = "introspection"

    def progress(stage: str) -> None:
        nonlocal stage_name
        if stage_name != "introspection":
            completed.append(stage_name)
        stage_name = stage
        if on_progress:
            on_progress(stage)

    try:
        if schema is None:
            schema = engine.introspect()
        if not schema.tables:
            raise EmptySchema(
                f"database {schema.database_name!r} has no tables"
            )
        database = schema.database_name

        progress("sampling")
        samples = {
            t.name: engine.sample_rows(t.name, cfg.sample_rows_n, cfg.sample_seed)
            for t in schema.tables
        }

        progress("columns")
        groups = partition_columns(schema, cfg.group_max_columns)
        tables_by_name = {t.name: t for t in schema.tables}
        with ThreadPoolExecutor(max_workers=cfg.worker_pool_size) as pool:
            futures = [
                pool.submit(
                    summarize_column_group,
                    database,
                    tables_by_name[table_name],
                    group,
                    samples[table_name],
                    gateway,
                )
                for table_name, group in groups
            ]
            # Merge in submission order regardless of completion order.
            columns: list[ColumnSummary] = []
            for future in futures:
                columns.extend(future.result())

        progress("tables")
        col_by_table: dict[str, list[ColumnSummary]] = {}
        for summary in columns:
            col_by_table.setdefault(summary.table, []).append(summary)
        with ThreadPoolExecutor(max_workers=cfg.worker_pool_size) as pool:
            futures = [
                pool.submit(
                    describe_table,
                    database,
                    table,
                    col_by_table.get(table.name, []),
                    gateway,
                    cfg.key_attributes_max,
                )
                for table in schema.tables
            ]
            descriptions = [f.result() for f in futures]

        table_index = VectorIndex(gateway.config.embed_dimension)
        for desc in descriptions:
            text = table_embedding_text(desc, cfg.embed_key_attributes)
            table_index.upsert(desc.table, gateway.embed(text).values, payload=text)

        progress("relationships")
        relationships = discover_relationships(
            database,
            schema,
            descriptions,
            table_index,
            gateway,
            cfg.similar_count,
            cfg.embed_key_attributes,
        )

        progress("entities")
        entities = extract_entities(
            database, schema, descriptions, relationships, gateway, cfg.entity_top_n
        )

        entity_index = VectorIndex(gateway.config.embed_dimension)
        for entity in entities:
            text = (
                f"{entity.name}: {entity.description}"
                if entity.description
                else entity.name
            )
            entity_index.upsert(entity.name, gateway.embed(text).values, payload=text)

        progress("summary")
        summary = summarize_database(database, schema, entities, gateway)
    except ContextGenerationFailed:
        raise
    except Exception as exc:
        raise ContextGenerationFailed(stage_name, completed, exc) from exc

    context = SchemaContext(
        database=database,
        generation_model=gateway.config.default_model,
        columns=columns,
        tables=descriptions,
        relationships=relationships,
        entities=entities,
        summary=summary,
    )
    return context, table_index, entity_index


def build_indexes(
    context: SchemaContext, gateway: LlmGateway, cfg: PipelineConfig
) -> tuple[VectorIndex, VectorIndex]:
    """Rebuild the vector indexes from a loaded context document without
    regenerating any text."""
    table_index = VectorIndex(gateway.config.embed_dimension)
    for desc in context.tables:
        text = table_embedding_text(desc, cfg.embed_key_attributes)
        table_index.upsert(desc.table, gateway.embed(text).values, payload=text)
    entity_index = VectorIndex(gateway.config.embed_dimension)
    for entity in context.entities:
        text = (
            f"{entity.name}: {entity.description}"
            if entity.description
            else entity.name
        )
        entity_index.upsert(entity.name, gateway.embed(text).values, payload=text)
    return table_index, entity_index
