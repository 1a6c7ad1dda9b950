"""Chart recommendation rule table, precedence, and the bounded tiebreak."""

from __future__ import annotations

import json

import pytest

from insight.charts import (
    CHART_TYPES,
    classify_result,
    recommend,
    recommend_for_result,
)
from insight.errors import EmptyResult
from insight.gateway import Purpose

from tests.fakes import ScriptedProvider, make_gateway


def sig_of(names, kinds, rows):
    return classify_result(list(names), list(kinds), [tuple(r) for r in rows])


def charts_of(recs):
    return [r.chart_type for r in recs]


# -- classification -------------------------------------------------------------------


def test_classify_counts_shape():
    rows = [("A", 1, "1994-01-05"), ("B", 2, "1994-02-05"), ("A", 3, "1994-03-05")]
    sig = sig_of(["status", "n", "day"], ["categorical", "numeric", "temporal"], rows)
    assert sig.row_count == 3
    assert sig.categorical_cols == 1
    assert sig.numeric_cols == 1
    assert sig.temporal_cols == 1
    assert sig.category_cardinality == 2
    assert sig.categorical_names == ["status"]
    assert sig.numeric_names == ["n"]
    assert sig.temporal_names == ["day"]


def test_classify_cardinality_uses_first_categorical():
    rows = [("A", "x"), ("B", "x"), ("C", "y")]
    sig = sig_of(["c1", "c2"], ["categorical", "categorical"], rows)
    assert sig.category_cardinality == 3


def test_classify_rejects_empty():
    with pytest.raises(EmptyResult):
        classify_result([], [], [])


# -- individual rules ----------------------------------------------------------------------


def test_rule_number_card_for_1x1():
    recs = recommend(sig_of(["n"], ["numeric"], [(42,)]))
    assert charts_of(recs) == ["number_card", "table"]
    assert recs[0].axis_bindings == {"value": "n"}
    assert recs[0].rule == "R6"


def test_one_by_one_categorical_is_also_a_number_card():
    recs = recommend(sig_of(["name"], ["categorical"], [("Prague",)]))
    assert charts_of(recs)[0] == "number_card"


def test_rule_line_for_temporal_numeric():
    rows = [("1994-01-05", 10.0), ("1994-02-05", 12.5)]
    recs = recommend(sig_of(["day", "value"], ["temporal", "numeric"], rows))
    assert charts_of(recs) == ["line", "table"]
    assert recs[0].axis_bindings == {"x": "day", "y": "value"}


def test_line_binds_series_for_small_category_set():
    rows = [("1994-01-05", "A", 1.0), ("1994-02-05", "B", 2.0)]
    sig = sig_of(["day", "status", "v"], ["temporal", "categorical", "numeric"], rows)
    recs = recommend(sig)
    line = recs[0]
    assert line.chart_type == "line"
    assert line.axis_bindings == {"x": "day", "y": "v", "series": "status"}


def test_line_skips_series_for_wide_category_set():
    rows = [(f"1994-01-{d:02d}", f"cat{d}", float(d)) for d in range(1, 10)]
    sig = sig_of(["day", "c", "v"], ["temporal", "categorical", "numeric"], rows)
    assert recommend(sig)[0].axis_bindings == {"x": "day", "y": "v"}


def test_rule_pie_bar_ordering_follows_numeric_name():
    rows = [(chr(65 + i), i + 1) for i in range(4)]
    # Aggregate-style name: the pie leads.
    recs = recommend(sig_of(["status", "cnt"], ["categorical", "numeric"], rows))
    assert charts_of(recs) == ["pie", "bar", "table"]
    assert recs[0].rule == recs[1].rule == "R1"
    # Plain measurement name: the bar leads.
    recs = recommend(sig_of(["status", "price"], ["categorical", "numeric"], rows))
    assert charts_of(recs) == ["bar", "pie", "table"]


def test_rule_bar_only_above_cardinality_eight():
    rows = [(f"cat{i}", i) for i in range(9)]
    recs = recommend(sig_of(["c", "total"], ["categorical", "numeric"], rows))
    assert charts_of(recs) == ["bar", "table"]
    assert recs[0].rule == "R2"


def test_rule_boundary_cardinality_eight_still_allows_pie():
    rows = [(f"cat{i}", i) for i in range(8)]
    recs = recommend(sig_of(["c", "total"], ["categorical", "numeric"], rows))
    assert "pie" in charts_of(recs)


def test_rule_scatter_for_two_numerics():
    rows = [(1.0, 2.0), (3.0, 4.0)]
    recs = recommend(sig_of(["got", "gpt"], ["numeric", "numeric"], rows))
    assert charts_of(recs) == ["scatter", "table"]
    assert recs[0].axis_bindings == {"x": "got", "y": "gpt"}


def test_scatter_blocked_by_extra_kinds():
    rows = [("A", 1.0, 2.0)]
    sig = sig_of(["c", "a", "b"], ["categorical", "numeric", "numeric"], rows)
    assert "scatter" not in charts_of(recommend(sig))


def test_rule_histogram_needs_many_rows():
    many = [(float(i),) for i in range(21)]
    recs = recommend(sig_of(["v"], ["numeric"], many))
    assert charts_of(recs) == ["histogram", "table"]

    few = [(float(i),) for i in range(20)]
    assert charts_of(recommend(sig_of(["v"], ["numeric"], few))) == ["table"]


def test_table_is_always_last_with_final_rank():
    cases = [
        (["n"], ["numeric"], [(1,)]),
        (["a", "b"], ["numeric", "numeric"], [(1, 2)]),
        (["x"], ["other"], [(b"",)]),
    ]
    for names, kinds, rows in cases:
        recs = recommend(sig_of(names, kinds, rows))
        assert recs[-1].chart_type == "table"
        assert recs[-1].rule == "R7"
        assert recs[-1].rank == len(recs)
        assert [r.rank for r in recs] == list(range(1, len(recs) + 1))
        assert all(r.chart_type in CHART_TYPES for r in recs)


def test_unmatched_shape_falls_back_to_table_alone():
    recs = recommend(sig_of(["x", "y"], ["other", "other"], [(b"", b"")]))
    assert charts_of(recs) == ["table"]


# -- multi-rule precedence and tiebreak ---------------------------------------------------


# Temporal + numeric + single small categorical + >20 rows fires R3 and
# R1 together (line first by precedence).
_MULTI_NAMES = ["day", "status", "total"]
_MULTI_KINDS = ["temporal", "categorical", "numeric"]
_MULTI_ROWS = [(f"1994-{m:02d}-01", ["A", "B"][m % 2], float(m)) for m in range(1, 13)]


def test_precedence_without_gateway():
    recs = recommend(sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS))
    assert charts_of(recs) == ["line", "pie", "bar", "table"]
    assert all(r.source == "rule" for r in recs)


def test_single_rule_never_calls_tiebreak():
    gateway = make_gateway()
    rows = [("A", 1), ("B", 2)]
    recs = recommend(sig_of(["status", "cnt"], ["categorical", "numeric"], rows), "q", gateway)
    # R1 alone fired, two candidates or not: zero model calls.
    assert charts_of(recs) == ["pie", "bar", "table"]
    assert gateway.calls_for(Purpose.CHART_TIEBREAK) == 0


def test_tiebreak_identity_keeps_order_and_marks_source():
    gateway = make_gateway()  # scripted tiebreak echoes the given order
    recs = recommend(sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "trend", gateway)
    assert gateway.calls_for(Purpose.CHART_TIEBREAK) == 1
    assert charts_of(recs) == ["line", "pie", "bar", "table"]
    assert [r.source for r in recs] == ["llm_tiebreak"] * 3 + ["rule"]


def test_tiebreak_permutation_is_honored():
    provider = ScriptedProvider()
    provider.overrides["chart_tiebreak"] = lambda req: json.dumps(
        {"order": ["bar", "pie", "line"]}
    )
    gateway = make_gateway(provider)
    recs = recommend(sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "q", gateway)
    assert charts_of(recs) == ["bar", "pie", "line", "table"]
    assert recs[0].rule == "R1"
    assert recs[2].rule == "R3"


def test_tiebreak_non_permutation_is_ignored():
    provider = ScriptedProvider()
    provider.overrides["chart_tiebreak"] = lambda req: json.dumps(
        {"order": ["bar", "pie", "histogram"]}
    )
    recs = recommend(
        sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "q", make_gateway(provider)
    )
    assert charts_of(recs) == ["line", "pie", "bar", "table"]
    assert all(r.source == "rule" for r in recs)

    dropper = ScriptedProvider()
    dropper.overrides["chart_tiebreak"] = lambda req: json.dumps({"order": ["line"]})
    recs = recommend(
        sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "q", make_gateway(dropper)
    )
    assert charts_of(recs) == ["line", "pie", "bar", "table"]


def test_tiebreak_failure_is_ignored():
    provider = ScriptedProvider()

    def boom(req):
        raise RuntimeError("provider fell over")

    provider.overrides["chart_tiebreak"] = boom
    recs = recommend(
        sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "q", make_gateway(provider)
    )
    assert charts_of(recs) == ["line", "pie", "bar", "table"]
    assert all(r.source == "rule" for r in recs)


def test_table_never_offered_to_tiebreak():
    provider = ScriptedProvider()
    seen_payloads = []

    def spy(req):
        user = next(c for r, c in req.messages if r == "user")
        from insight.prompts import parse_prompt_input

        seen_payloads.append(parse_prompt_input(user))
        return provider._chart_tiebreak(user, parse_prompt_input(user))

    provider.overrides["chart_tiebreak"] = spy
    recommend(sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS), "q", make_gateway(provider))
    assert seen_payloads
    assert "table" not in seen_payloads[0]["candidates"]
    assert seen_payloads[0]["candidates"] == ["line", "pie", "bar"]


def test_recommendations_are_deterministic():
    sig = sig_of(_MULTI_NAMES, _MULTI_KINDS, _MULTI_ROWS)
    assert recommend(sig) == recommend(sig)


def test_recommend_for_result_glue():
    rows = [("negative", 10), ("positive", 6), ("borderline", 3)]
    recs = recommend_for_result(["test_result", "cnt"], ["categorical", "numeric"], rows)
    assert charts_of(recs) == ["pie", "bar", "table"]
    assert recs[0].axis_bindings == {"x": "test_result", "y": "cnt"}
