"""Rule-based chart recommendation for query results.

A fixed rule table maps the shape of a result (column kinds, row count,
category cardinality) to suitable chart types, evaluated in a fixed
precedence. When more than one rule fires, an optional model call may
reorder the candidates; it can never add or remove chart types, and when
it is unavailable or fails the precedence order stands. A plain table is
always the last entry, so recommendations are never empty.

Rule table and precedence:
  R6  1x1 result                                      -> number_card
  R3  >=1 temporal + >=1 numeric                      -> line (+series)
  R1  1 categorical + >=1 numeric, cardinality <= 8   -> pie and bar
  R2  1 categorical + >=1 numeric, cardinality > 8    -> bar
  R4  exactly 2 numeric, no categorical/temporal      -> scatter
  R5  exactly 1 numeric column, rows > 20             -> histogram
  R7  always                                          -> table
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import EmptyResult
from .gateway import LlmGateway, Purpose
from .prompts import chart_tiebreak_prompt

logger = logging.getLogger(__name__)

CHART_TYPES = ("pie", "bar", "line", "scatter", "histogram", "number_card", "table")

# Aggregate-style numeric names suggest part-of-whole data, where a pie
# communicates proportions best.
_PROPORTION_NAME_RE = re.compile(
    r"(count|sum|total|amount|cnt|pct|percent|share)", re.IGNORECASE
)


@dataclass(frozen=True)
class ShapeSignature:
    """Everything the rules need to know about a result. Column names
    ride along so recommendations can bind axes to real columns."""

    row_count: int
    column_names: tuple[str, ...]
    column_kinds: tuple[str, ...]
    category_cardinality: int | None  # distinct values in the first categorical column

    @property
    def categorical_cols(self) -> int:
        return self.column_kinds.count("categorical")

    @property
    def numeric_cols(self) -> int:
        return self.column_kinds.count("numeric")

    @property
    def temporal_cols(self) -> int:
        return self.column_kinds.count("temporal")

    def _names_of(self, kind: str) -> list[str]:
        return [n for n, k in zip(self.column_names, self.column_kinds) if k == kind]

    @property
    def categorical_names(self) -> list[str]:
        return self._names_of("categorical")

    @property
    def numeric_names(self) -> list[str]:
        return self._names_of("numeric")

    @property
    def temporal_names(self) -> list[str]:
        return self._names_of("temporal")


@dataclass
class ChartRecommendation:
    chart_type: str
    axis_bindings: dict[str, str]
    rank: int
    source: str  # "rule" or "llm_tiebreak"
    rule: str
    reason: str


def classify_result(
    column_names: list[str], column_kinds: list[str], rows: list[tuple[Any, ...]]
) -> ShapeSignature:
    if not column_names:
        raise EmptyResult("result has no columns")
    cardinality: int | None = None
    cat_cols = [i for i, k in enumerate(column_kinds) if k == "categorical"]
    if cat_cols:
        first = cat_cols[0]
        cardinality = len({row[first] for row in rows})
    return ShapeSignature(
        row_count=len(rows),
        column_names=tuple(column_names),
        column_kinds=tuple(column_kinds),
        category_cardinality=cardinality,
    )


@dataclass
class _Candidate:
    chart_type: str
    axis_bindings: dict[str, str]
    rule: str
    reason: str


def _rule_r6(sig: ShapeSignature) -> list[_Candidate]:
    if sig.row_count == 1 and len(sig.column_kinds) == 1:
        return [
            _Candidate(
                "number_card",
                {"value": sig.column_names[0]},
                "R6",
                "single value answers the question directly",
            )
        ]
    return []


def _rule_r3(sig: ShapeSignature) -> list[_Candidate]:
    if sig.temporal_cols < 1 or sig.numeric_cols < 1:
        return []
    bindings = {"x": sig.temporal_names[0], "y": sig.numeric_names[0]}
    if sig.categorical_cols and (sig.category_cardinality or 0) <= 6:
        bindings["series"] = sig.categorical_names[0]
    return [_Candidate("line", bindings, "R3", "values ordered in time read best as a line")]


def _rule_r1(sig: ShapeSignature) -> list[_Candidate]:
    if sig.categorical_cols != 1 or sig.numeric_cols < 1:
        return []
    if sig.category_cardinality is None or sig.category_cardinality > 8:
        return []
    bindings = {"x": sig.categorical_names[0], "y": sig.numeric_names[0]}
    pie = _Candidate(
        "pie", dict(bindings), "R1", "few categories; shows each category's share of the whole"
    )
    bar = _Candidate(
        "bar", dict(bindings), "R1", "few categories; magnitudes compare well as bars"
    )
    # Aggregate-named numerics read as parts of a whole: pie leads.
    if _PROPORTION_NAME_RE.search(bindings["y"]):
        return [pie, bar]
    return [bar, pie]


def _rule_r2(sig: ShapeSignature) -> list[_Candidate]:
    if sig.categorical_cols != 1 or sig.numeric_cols < 1:
        return []
    if sig.category_cardinality is None or sig.category_cardinality <= 8:
        return []
    return [
        _Candidate(
            "bar",
            {"x": sig.categorical_names[0], "y": sig.numeric_names[0]},
            "R2",
            "many categories compare by magnitude; pie would be unreadable",
        )
    ]


def _rule_r4(sig: ShapeSignature) -> list[_Candidate]:
    if sig.numeric_cols != 2 or sig.categorical_cols or sig.temporal_cols:
        return []
    return [
        _Candidate(
            "scatter",
            {"x": sig.numeric_names[0], "y": sig.numeric_names[1]},
            "R4",
            "two numeric measures suggest a correlation view",
        )
    ]


def _rule_r5(sig: ShapeSignature) -> list[_Candidate]:
    if sig.numeric_cols != 1 or sig.row_count <= 20:
        return []
    return [
        _Candidate(
            "histogram",
            {"x": sig.numeric_names[0]},
            "R5",
            "one numeric column over many rows shows a distribution",
        )
    ]


# Evaluation order is the precedence order.
_PRIMARY_RULES = (_rule_r6, _rule_r3, _rule_r1, _rule_r2, _rule_r4, _rule_r5)


def recommend(
    sig: ShapeSignature,
    task: str = "",
    gateway: LlmGateway | None = None,
) -> list[ChartRecommendation]:
    """Ordered chart recommendations for a result shape.

    Exactly one rule firing means no model call at all, even when that
    rule produced two candidates. Several rules firing triggers one
    tiebreak call, honored only when it returns a permutation of the
    rule candidates; otherwise the precedence order stands. The table
    fallback always closes the list and never enters the tiebreak.
    """
    fired: list[list[_Candidate]] = []
    for rule in _PRIMARY_RULES:
        candidates = rule(sig)
        if candidates:
            fired.append(candidates)

    ordered: list[_Candidate] = [c for group in fired for c in group]
    tiebroken = False
    if gateway is not None and len(fired) > 1:
        reordered = _tiebreak(sig, task, ordered, gateway)
        if reordered is not None:
            ordered = reordered
            tiebroken = True

    ordered.append(_Candidate("table", {}, "R7", "a table always renders faithfully"))
    source = "llm_tiebreak" if tiebroken else "rule"
    return [
        ChartRecommendation(
            chart_type=c.chart_type,
            axis_bindings=c.axis_bindings,
            rank=i + 1,
            source=source if c.rule != "R7" else "rule",
            rule=c.rule,
            reason=c.reason,
        )
        for i, c in enumerate(ordered)
    ]


def _tiebreak(
    sig: ShapeSignature,
    task: str,
    candidates: list[_Candidate],
    gateway: LlmGateway,
) -> list[_Candidate] | None:
    shape_payload = {
        "row_count": sig.row_count,
        "columns": [
            {"name": n, "kind": k} for n, k in zip(sig.column_names, sig.column_kinds)
        ],
        "category_cardinality": sig.category_cardinality,
    }
    names = [c.chart_type for c in candidates]
    try:
        system, user = chart_tiebreak_prompt(task, shape_payload, names)
        exchange = gateway.chat(Purpose.CHART_TIEBREAK, system, user)
        parsed = gateway.parse_structured(exchange, {"order": "list"})
        order = [str(x) for x in parsed["order"]]
    except Exception as exc:  # noqa: BLE001 - tiebreak is best-effort
        logger.warning("chart tiebreak failed, keeping rule order: %s", exc)
        return None
    if sorted(order) != sorted(names):
        logger.warning("tiebreak returned a non-permutation, keeping rule order")
        return None
    by_type: dict[str, list[_Candidate]] = {}
    for cand in candidates:
        by_type.setdefault(cand.chart_type, []).append(cand)
    return [by_type[name].pop(0) for name in order]


def recommend_for_result(
    column_names: list[str],
    column_kinds: list[str],
    rows: list[tuple[Any, ...]],
    task: str = "",
    gateway: LlmGateway | None = None,
) -> list[ChartRecommendation]:
    sig = classify_result(column_names, column_kinds, rows)
    return recommend(sig, task, gateway)
