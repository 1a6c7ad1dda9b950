"""Prompt construction for every model call in the pipeline.

Each builder returns a (system, user) pair. The user message carries the
structured inputs as a fenced JSON block under an ``INPUT:`` marker so
the payload survives whitespace canonicalization and can be parsed back
out by tooling. Keep the JSON machine-readable; prose goes around it.
"""

from __future__ import annotations

import json
from typing import Any


def _block(payload: Any) -> str:
    return "INPUT:\n```json\n" + json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n```"


def column_summary_prompt(
    database: str, table: str, columns: list[dict[str, Any]], sample_rows: list[dict[str, Any]]
) -> tuple[str, str]:
    system = (
        "You are a data analyst documenting a relational database. "
        "For each column you are given, write one concise sentence describing "
        "what the column holds, grounded in the sample values. "
        'Respond with JSON: {"columns": [{"column": name, "description": text}, ...]}.'
    )
    user = (
        f"Database {database!r}, table {table!r}. Describe each column.\n"
        + _block({"table": table, "columns": columns, "sample_rows": sample_rows})
    )
    return system, user


def table_description_prompt(
    database: str,
    table: str,
    column_descriptions: list[dict[str, str]],
    primary_key: list[str],
    key_attributes_max: int,
) -> tuple[str, str]:
    system = (
        "You are a data analyst describing one table of a relational database. "
        "Respond with JSON holding exactly these fields: "
        '{"narrative": one-paragraph description, '
        f'"key_attributes": up to {key_attributes_max} most informative column names, '
        '"primary_key": list of column names that identify a row, '
        '"entity": the real-world thing a row represents, '
        '"table_type": one of "dimension", "bridge", "fact"}.'
    )
    user = (
        f"Database {database!r}, table {table!r}.\n"
        + _block(
            {
                "table": table,
                "columns": column_descriptions,
                "declared_primary_key": primary_key,
            }
        )
    )
    return system, user


def relationship_prompt(
    database: str,
    table: str,
    table_card: dict[str, Any],
    candidates: list[dict[str, Any]],
    declared: list[dict[str, str]],
) -> tuple[str, str]:
    system = (
        "You are a data analyst finding join relationships between tables. "
        "Given one subject table and a set of candidate tables, list column "
        "pairs that plausibly join them. Declared foreign keys are provided "
        "as hints and need not be repeated. Respond with JSON: "
        '{"relationships": [{"from_table": t, "from_column": c, '
        '"to_table": t2, "to_column": c2, "rationale": text}, ...]}. '
        "Use an empty list when nothing joins."
    )
    user = (
        f"Database {database!r}. Find joins between table {table!r} and the candidates.\n"
        + _block(
            {
                "subject": table_card,
                "candidates": candidates,
                "declared_foreign_keys": declared,
            }
        )
    )
    return system, user


def entity_prompt(
    database: str, ranked_tables: list[dict[str, Any]], entity_top_n: int
) -> tuple[str, str]:
    system = (
        "You are a data analyst naming the central entities of a database. "
        f"Given the {entity_top_n} most connected tables, name the entity each "
        "one anchors and describe it in one sentence. Respond with JSON: "
        '{"entities": [{"name": entity, "tables": [table, ...], '
        '"description": text}, ...]}.'
    )
    user = f"Database {database!r}.\n" + _block({"tables": ranked_tables})
    return system, user


def db_summary_prompt(
    database: str, entities: list[dict[str, Any]], table_count: int
) -> tuple[str, str]:
    system = (
        "You are a data analyst summarizing a whole database for someone who "
        "has never seen it. Respond with JSON: "
        '{"summary": a short paragraph covering what the database is about, '
        '"keywords": up to ten domain terms}.'
    )
    user = (
        f"Database {database!r} with {table_count} tables.\n"
        + _block({"entities": entities})
    )
    return system, user


def clarify_prompt(question: str, summary: dict[str, Any]) -> tuple[str, str]:
    system = (
        "You rewrite analytics questions so they can be answered with SQL "
        "against the described database. Resolve vague references using "
        "explicit assumptions; do not invent data. If the question cannot be "
        "answered from this database at all, say so and suggest a related "
        "question that can. Respond with JSON: "
        '{"answerable": true|false, "clarified": rewritten question, '
        '"assumptions": [text, ...], "suggestion": alternative question or ""}.'
    )
    user = "Question: " + question + "\n" + _block({"database_summary": summary})
    return system, user


def decompose_prompt(
    clarified: str, summary: dict[str, Any], max_subtasks: int
) -> tuple[str, str]:
    system = (
        "You decide whether an analytics question needs to be split into "
        "smaller questions that are each answerable by a single SQL query. "
        f"Use at most {max_subtasks} sub-questions, ordered so later ones can "
        "build on earlier answers. Simple questions must not be split. "
        'Respond with JSON: {"needs_decomposition": true|false, '
        '"sub_tasks": [question, ...]}.'
    )
    user = "Question: " + clarified + "\n" + _block({"database_summary": summary})
    return system, user


def schema_filter_prompt(
    task: str, group: list[dict[str, Any]]
) -> tuple[str, str]:
    system = (
        "You select which tables and columns are needed to answer a question. "
        "Only choose from the tables and columns listed; never invent names. "
        "Also note any literal values in the question that a WHERE clause "
        "would compare against, with the column each belongs to. "
        "Respond with JSON: "
        '{"tables": [{"table": name, "columns": [name, ...]}, ...], '
        '"condition_values": [{"column": name, "value": literal}, ...]}. '
        "Use empty lists when nothing in this group is relevant."
    )
    user = "Question: " + task + "\n" + _block({"tables": group})
    return system, user


def sql_generation_prompt(
    task: str,
    subset: dict[str, Any],
    dialect: str = "sqlite",
) -> tuple[str, str]:
    system = (
        f"You write a single read-only {dialect} SELECT statement answering "
        "the question from the provided schema subset. Use only listed tables "
        "and columns. Return the SQL alone, no explanation."
    )
    user = "Question: " + task + "\n" + _block(subset)
    return system, user


def refine_prompt(
    task: str,
    sql: str,
    error: str,
    subset: dict[str, Any],
    phase: str,
) -> tuple[str, str]:
    system = (
        "A SQL statement failed. Fix it using only tables and columns from "
        "the provided schema subset, keeping it a single read-only SELECT. "
        "Return the corrected SQL alone, no explanation."
    )
    user = (
        "Question: " + task + "\n"
        f"Failed during {phase} with error: {error}\n"
        "SQL:\n```sql\n" + sql + "\n```\n" + _block(subset)
    )
    return system, user


def chart_tiebreak_prompt(
    task: str, result_shape: dict[str, Any], chart_types: list[str]
) -> tuple[str, str]:
    system = (
        "Several chart types fit a query result equally well by rule. Order "
        "the given candidates from most to least fitting for communicating "
        "the answer. Use every candidate exactly once and add nothing. "
        'Respond with JSON: {"order": [chart_type, ...]}.'
    )
    user = (
        "Question: " + task + "\n"
        + _block({"result_shape": result_shape, "candidates": chart_types})
    )
    return system, user


def parse_prompt_input(user_message: str) -> Any:
    """Recover the JSON block a builder embedded in a user message. Test
    doubles use this to answer prompts deterministically."""
    marker = "INPUT:"
    idx = user_message.find(marker)
    if idx == -1:
        return None
    rest = user_message[idx + len(marker):]
    start = rest.find("{")
    alt = rest.find("[")
    if alt != -1 and (start == -1 or alt < start):
        start = alt
    if start == -1:
        return None
    opener = rest[start]
    closer = "}" if opener == "{" else "]"
    depth = 0
    in_str = False
    escape = False
    for i in range(start, len(rest)):
        ch = rest[i]
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == opener:
            depth += 1
        elif ch == closer:
            depth -= 1
            if depth == 0:
                return json.loads(rest[start : i + 1])
    return None
