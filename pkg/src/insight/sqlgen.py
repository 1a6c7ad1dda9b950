"""SQL generation against a generated schema context.

Pipeline per task: coarse table selection over the vector index, fine
column filtering via map-reduce model calls, SQL generation, then a
refinement chain that first compile-checks the statement with EXPLAIN
and only then executes it, feeding engine errors back to the model for
correction until a round budget is spent.

Only read-only single-statement SELECT/WITH queries ever reach the
engine; everything else is rejected before the engine sees it.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .context import PipelineConfig, SchemaContext
from .engine import ExecutionResult, SqliteEngine
from .errors import (
    EngineError,
    NonReadOnly,
    NoRelevantSchema,
    RefinementExhausted,
)
from .gateway import LlmGateway, Purpose, estimate_tokens
from .prompts import refine_prompt, schema_filter_prompt, sql_generation_prompt
from .vectors import VectorIndex

logger = logging.getLogger(__name__)


@dataclass
class SchemaSubset:
    """Tables and columns judged relevant to one task, plus literal
    values from the question that should appear in predicates."""

    tables: list[str]
    columns: dict[str, list[str]]
    condition_values: list[tuple[str, str]] = field(default_factory=list)

    def payload(self, context: SchemaContext) -> dict[str, Any]:
        tables_payload = []
        for table in self.tables:
            cols = []
            for summary in context.columns_for(table):
                if summary.column in self.columns.get(table, []):
                    cols.append(
                        {
                            "column": summary.column,
                            "type": summary.sql_type,
                            "description": summary.description,
                        }
                    )
            tables_payload.append({"table": table, "columns": cols})
        included = set(self.tables)
        joins = [
            {
                "from": f"{r.from_table}.{r.from_column}",
                "to": f"{r.to_table}.{r.to_column}",
            }
            for r in context.relationships
            if r.from_table in included and r.to_table in included
        ]
        return {
            "tables": tables_payload,
            "joins": joins,
            "condition_values": [
                {"column": column, "value": value}
                for column, value in self.condition_values
            ],
        }


@dataclass
class SqlCandidate:
    """One generated statement. ``produced_by_round`` is the 1-based
    refinement round that last rewrote it; 0 means the initial
    generation survived unchanged."""

    sql_text: str
    dialect_id: str = "sqlite"
    produced_by_round: int = 0


@dataclass
class RefinementRound:
    phase: str  # "explain" or "execute"
    input_sql: str
    feedback: str  # engine error driving a correction; empty on success
    output_sql: str


@dataclass
class RefinementTrace:
    """Full history of one refinement chain."""

    rounds: list[RefinementRound]
    final: SqlCandidate
    succeeded: bool


@dataclass(frozen=True)
class ResultColumn:
    name: str
    kind: str  # categorical | numeric | temporal | other


@dataclass
class QueryResult:
    columns: list[ResultColumn]
    rows: list[tuple[Any, ...]]
    truncated: bool
    elapsed_ms: float

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_kinds(self) -> list[str]:
        return [c.kind for c in self.columns]


# -- coarse table selection ------------------------------------------------------------


def coarse_select_tables(
    task: str,
    table_index: VectorIndex,
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> list[str]:
    """Top tables by embedding similarity to the task text. Bounded by
    index size; order is the index ranking."""
    query = gateway.embed(task).values
    k = min(cfg.coarse_table_top_n, len(table_index))
    hits = table_index.top_k(query, k=k)
    return [h.id for h in hits]


def expand_neighbors(
    selected: list[str], context: SchemaContext
) -> list[str]:
    """Add tables one join away from the selection. Joins frequently
    need a bridge table the embedding missed. Additions are appended in
    name order so output stays deterministic."""
    chosen = set(selected)
    extra: set[str] = set()
    for rel in context.relationships:
        if rel.from_table in chosen and rel.to_table not in chosen:
            extra.add(rel.to_table)
        if rel.to_table in chosen and rel.from_table not in chosen:
            extra.add(rel.from_table)
    return selected + sorted(extra)


# -- fine column filtering ---------------------------------------------------------------


def _table_card(context: SchemaContext, table: str) -> dict[str, Any]:
    desc = context.table_description(table)
    return {
        "table": table,
        "narrative": desc.narrative if desc else "",
        "columns": [
            {"column": c.column, "type": c.sql_type, "description": c.description}
            for c in context.columns_for(table)
        ],
    }


def _group_by_budget(
    cards: list[dict[str, Any]], token_budget: int
) -> list[list[dict[str, Any]]]:
    """Greedy packing of table cards into prompt-sized groups. A card
    bigger than the budget still gets its own group."""
    groups: list[list[dict[str, Any]]] = []
    current: list[dict[str, Any]] = []
    current_cost = 0
    for card in cards:
        cost = estimate_tokens(json.dumps(card, ensure_ascii=False))
        if current and current_cost + cost > token_budget:
            groups.append(current)
            current = []
            current_cost = 0
        current.append(card)
        current_cost += cost
    if current:
        groups.append(current)
    return groups


def fine_filter(
    task: str,
    candidate_tables: list[str],
    context: SchemaContext,
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> SchemaSubset:
    """Map-reduce column selection.

    Map: candidate tables are packed into token-budget groups, one model
    call each, asking which tables/columns matter for the task. Reduce:
    union the answers, dropping any table or column the model invented.
    """
    cards = [_table_card(context, t) for t in candidate_tables]
    groups = _group_by_budget(cards, cfg.schema_group_token_budget)

    chosen: dict[str, list[str]] = {}
    condition_values: list[tuple[str, str]] = []
    valid_columns = {
        t: {c.column for c in context.columns_for(t)} for t in candidate_tables
    }
    all_columns = {c for cols in valid_columns.values() for c in cols}

    for group in groups:
        system, user = schema_filter_prompt(task, group)
        exchange = gateway.chat(Purpose.SCHEMA_FILTER, system, user)
        parsed = gateway.parse_structured(
            exchange, {"tables": "list", "condition_values": "list"}
        )
        group_names = {card["table"] for card in group}
        for item in parsed["tables"]:
            if not isinstance(item, dict):
                continue
            name = str(item.get("table", ""))
            if name not in group_names or name not in valid_columns:
                continue
            cols = [
                str(c) for c in item.get("columns", []) if str(c) in valid_columns[name]
            ]
            if not cols:
                continue
            merged = chosen.setdefault(name, [])
            for col in cols:
                if col not in merged:
                    merged.append(col)
        for item in parsed["condition_values"]:
            if not isinstance(item, dict):
                continue
            column = str(item.get("column", "")).strip()
            value = str(item.get("value", "")).strip()
            pair = (column, value)
            if column in all_columns and value and pair not in condition_values:
                condition_values.append(pair)

    if not chosen:
        raise NoRelevantSchema(f"no tables relevant to task: {task!r}")
    return SchemaSubset(
        tables=list(chosen.keys()),
        columns=chosen,
        condition_values=condition_values,
    )


# -- SQL generation and validation ----------------------------------------------------------


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")
_LINE_COMMENT_RE = re.compile(r"--[^\n]*")
_BLOCK_COMMENT_RE = re.compile(r"/\*.*?\*/", re.DOTALL)


def extract_sql(text: str) -> str:
    """Strip code fences and surrounding prose down to the statement."""
    stripped = text.strip()
    fence = re.search(r"```(?:sql)?\s*(.*?)```", stripped, re.DOTALL | re.IGNORECASE)
    if fence:
        stripped = fence.group(1).strip()
    else:
        stripped = _FENCE_RE.sub("", stripped).strip()
    return stripped.rstrip(";").strip()


def ensure_read_only(sql: str) -> str:
    """Reject anything that is not a single SELECT/WITH statement.

    This is the first gate; the engine's read-only connection and
    authorizer stand behind it.
    """
    cleaned = _BLOCK_COMMENT_RE.sub(" ", sql)
    cleaned = _LINE_COMMENT_RE.sub(" ", cleaned).strip()
    if not cleaned:
        raise NonReadOnly("empty statement")
    # A semicolon followed by anything non-space means multiple statements.
    body = cleaned.rstrip(";")
    if ";" in body:
        raise NonReadOnly("multiple statements are not allowed")
    head = body.lstrip("(").lstrip()
    if not re.match(r"^(SELECT|WITH)\b", head, re.IGNORECASE):
        raise NonReadOnly(f"statement must start with SELECT or WITH: {body[:60]!r}")
    return sql.strip().rstrip(";").strip()


def generate_sql(
    task: str,
    subset: SchemaSubset,
    context: SchemaContext,
    gateway: LlmGateway,
    dialect_id: str = "sqlite",
) -> SqlCandidate:
    system, user = sql_generation_prompt(task, subset.payload(context), dialect_id)
    exchange = gateway.chat(Purpose.SQL_GEN, system, user)
    sql = ensure_read_only(extract_sql(exchange.response_text))
    return SqlCandidate(sql_text=sql, dialect_id=dialect_id, produced_by_round=0)


# -- refinement chain ----------------------------------------------------------------------


def _final_candidate(rounds: list[RefinementRound], dialect_id: str) -> SqlCandidate:
    produced_by = 0
    for i, rnd in enumerate(rounds, start=1):
        if rnd.output_sql != rnd.input_sql:
            produced_by = i
    return SqlCandidate(
        sql_text=rounds[-1].output_sql,
        dialect_id=dialect_id,
        produced_by_round=produced_by,
    )


def run_refinement_chain(
    task: str,
    candidate: SqlCandidate,
    subset: SchemaSubset,
    context: SchemaContext,
    engine: SqliteEngine,
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> tuple[QueryResult, RefinementTrace]:
    """EXPLAIN-then-EXECUTE validation with model-driven correction.

    Phase one: compile-check via EXPLAIN, at most ``refine_max_rounds``
    rounds; each failing round feeds the engine error back to the model
    for a corrected statement. Phase two: the same loop around real
    execution. A statement is only ever executed after it has passed
    EXPLAIN in its current form; corrections made during the execute
    phase are re-checked within that phase's round budget.
    """
    rounds: list[RefinementRound] = []
    payload = subset.payload(context)

    def correct(current: str, error: str, phase: str) -> str:
        system, user = refine_prompt(task, current, error, payload, phase)
        exchange = gateway.chat(Purpose.REFINE, system, user)
        return ensure_read_only(extract_sql(exchange.response_text))

    def fail(phase: str) -> RefinementTrace:
        trace = RefinementTrace(
            rounds=rounds,
            final=_final_candidate(rounds, candidate.dialect_id),
            succeeded=False,
        )
        raise RefinementExhausted(
            f"statement still fails {phase} after {cfg.refine_max_rounds} rounds; "
            f"last error: {rounds[-1].feedback}",
            trace=trace,
        )

    current = candidate.sql_text
    explained: str | None = None
    for attempt in range(1, cfg.refine_max_rounds + 1):
        try:
            engine.explain(current)
        except EngineError as exc:
            if attempt == cfg.refine_max_rounds:
                rounds.append(RefinementRound("explain", current, str(exc), current))
                fail("EXPLAIN")
            fixed = correct(current, str(exc), "explain")
            rounds.append(RefinementRound("explain", current, str(exc), fixed))
            current = fixed
            continue
        rounds.append(RefinementRound("explain", current, "", current))
        explained = current
        break
    if explained is None:
        fail("EXPLAIN")

    for attempt in range(1, cfg.refine_max_rounds + 1):
        try:
            # Corrections from this phase must pass EXPLAIN before running.
            if current != explained:
                engine.explain(current)
                explained = current
            result = engine.execute(current, row_cap=cfg.row_cap)
        except EngineError as exc:
            if attempt == cfg.refine_max_rounds:
                rounds.append(RefinementRound("execute", current, str(exc), current))
                fail("execution")
            fixed = correct(current, str(exc), "execute")
            rounds.append(RefinementRound("execute", current, str(exc), fixed))
            current = fixed
            continue
        rounds.append(RefinementRound("execute", current, "", current))
        trace = RefinementTrace(
            rounds=rounds,
            final=_final_candidate(rounds, candidate.dialect_id),
            succeeded=True,
        )
        return _to_query_result(result), trace
    fail("execution")
    raise AssertionError("unreachable")


# -- result shaping --------------------------------------------------------------------------


_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(r"^\d{4}-\d{2}-\d{2}[ T]\d{2}:\d{2}(:\d{2})?")


def _is_temporal_string(value: str) -> bool:
    if _DATE_RE.match(value):
        try:
            _dt.date.fromisoformat(value)
            return True
        except ValueError:
            return False
    return bool(_DATETIME_RE.match(value))


def infer_column_kinds(column_names: list[str], rows: list[tuple[Any, ...]]) -> list[str]:
    """Per-column value kind: numeric, temporal, categorical or other.

    Decided from non-null values only; an all-null column is "other".
    Any string value that is not temporal makes the column categorical.
    """
    kinds: list[str] = []
    for i, _name in enumerate(column_names):
        values = [row[i] for row in rows if row[i] is not None]
        if not values:
            kinds.append("other")
            continue
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            kinds.append("numeric")
        elif all(isinstance(v, str) for v in values) and all(
            _is_temporal_string(v) for v in values
        ):
            kinds.append("temporal")
        elif any(isinstance(v, str) for v in values):
            kinds.append("categorical")
        else:
            kinds.append("other")
    return kinds


def _to_query_result(result: ExecutionResult) -> QueryResult:
    kinds = infer_column_kinds(result.column_names, result.rows)
    return QueryResult(
        columns=[
            ResultColumn(name=n, kind=k)
            for n, k in zip(result.column_names, kinds)
        ],
        rows=result.rows,
        truncated=result.truncated,
        elapsed_ms=result.elapsed_ms,
    )


# -- task orchestration ------------------------------------------------------------------------


@dataclass
class TaskOutcome:
    """Result of one sub-task run. Exactly one of ``result``/``error``
    is set; ``trace`` and ``candidate`` are present whenever the
    pipeline got as far as generating SQL."""

    sub_task: str
    result: QueryResult | None
    trace: RefinementTrace | None
    candidate: SqlCandidate | None
    error: str | None = None


def answer_task(
    tasks: list[str],
    context: SchemaContext,
    table_index: VectorIndex,
    engine: SqliteEngine,
    gateway: LlmGateway,
    cfg: PipelineConfig,
    on_stage: Callable[[str], None] | None = None,
) -> list[TaskOutcome]:
    """Run the full SQL pipeline for each task, in order. A failing task
    reports its error without stopping the others."""

    def stage(name: str) -> None:
        if on_stage:
            on_stage(name)

    outcomes: list[TaskOutcome] = []
    for task in tasks:
        candidate: SqlCandidate | None = None
        trace: RefinementTrace | None = None
        try:
            stage("sql")
            selected = coarse_select_tables(task, table_index, gateway, cfg)
            if cfg.expand_neighbors:
                selected = expand_neighbors(selected, context)
            subset = fine_filter(task, selected, context, gateway, cfg)
            candidate = generate_sql(task, subset, context, gateway)
            stage("refine")
            stage("execute")
            result, trace = run_refinement_chain(
                task, candidate, subset, context, engine, gateway, cfg
            )
            outcomes.append(
                TaskOutcome(
                    sub_task=task,
                    result=result,
                    trace=trace,
                    candidate=trace.final,
                )
            )
        except Exception as exc:  # noqa: BLE001 - isolate per-task failures
            logger.warning("task failed: %s (%s)", task, exc)
            failed_trace = getattr(exc, "trace", None) or trace
            outcomes.append(
                TaskOutcome(
                    sub_task=task,
                    result=None,
                    trace=failed_trace,
                    candidate=failed_trace.final if failed_trace else candidate,
                    error=str(exc),
                )
            )
    return outcomes
