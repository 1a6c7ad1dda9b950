"""Vector index contracts, checked against a brute-force oracle."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from insight.errors import DimensionMismatch, EmptyIndex, InvalidVector
from insight.vectors import VectorIndex


def brute_force_top_k(entries: dict[str, list[float]], query: list[float], k: int, exclude: str | None = None) -> list[str]:
    """Independent exhaustive scan in plain Python: cosine score per
    entry, sort by (-score, id)."""
    qnorm = math.sqrt(sum(v * v for v in query))
    scored = []
    for id, vec in entries.items():
        if id == exclude:
            continue
        dot = sum(a * b for a, b in zip(vec, query))
        norm = math.sqrt(sum(v * v for v in vec))
        scored.append((-dot / (norm * qnorm), id))
    scored.sort()
    return [id for _, id in scored[:k]]


def test_upsert_and_lookup():
    index = VectorIndex(3)
    index.upsert("a", [1.0, 0.0, 0.0], payload="alpha text")
    index.upsert("b", [0.0, 1.0, 0.0])
    assert len(index) == 2
    assert "a" in index and "c" not in index
    assert index.ids() == ["a", "b"]
    assert index.payload("a") == "alpha text"
    assert index.payload("b") == ""
    assert index.payload("missing") is None


def test_upsert_replaces():
    index = VectorIndex(2)
    index.upsert("a", [1.0, 0.0])
    index.upsert("a", [0.0, 1.0])
    assert len(index) == 1
    hits = index.top_k([0.0, 1.0], k=1)
    assert hits[0].id == "a"
    assert hits[0].score == pytest.approx(1.0)


def test_remove():
    index = VectorIndex(2)
    index.upsert("a", [1.0, 0.0])
    assert index.remove("a") is True
    assert index.remove("a") is False
    assert len(index) == 0


def test_validation_errors():
    with pytest.raises(ValueError):
        VectorIndex(0)
    index = VectorIndex(2)
    with pytest.raises(DimensionMismatch):
        index.upsert("a", [1.0, 2.0, 3.0])
    with pytest.raises(InvalidVector):
        index.upsert("a", [float("nan"), 1.0])
    with pytest.raises(InvalidVector):
        index.upsert("a", [0.0, 0.0])
    index.upsert("a", [1.0, 0.0])
    with pytest.raises(DimensionMismatch):
        index.top_k([1.0], k=1)
    with pytest.raises(InvalidVector):
        index.top_k([0.0, 0.0], k=1)
    with pytest.raises(InvalidVector):
        index.top_k([float("inf"), 1.0], k=1)
    with pytest.raises(ValueError):
        index.top_k([1.0, 0.0], k=-1)


def test_empty_index_and_k_zero():
    index = VectorIndex(2)
    with pytest.raises(EmptyIndex):
        index.top_k([1.0, 0.0], k=1)
    index.upsert("a", [1.0, 0.0])
    assert index.top_k([1.0, 0.0], k=0) == []
    # Excluding the only entry yields an empty answer, not an error.
    assert index.top_k([1.0, 0.0], k=3, exclude="a") == []


def test_k_larger_than_size():
    index = VectorIndex(2)
    index.upsert("a", [1.0, 0.0])
    index.upsert("b", [0.0, 1.0])
    assert len(index.top_k([1.0, 1.0], k=10)) == 2


def test_tie_break_by_id():
    index = VectorIndex(2)
    # Identical vectors under different ids: scores tie exactly.
    index.upsert("zeta", [1.0, 1.0])
    index.upsert("alpha", [1.0, 1.0])
    index.upsert("mid", [1.0, 1.0])
    hits = index.top_k([2.0, 2.0], k=3)
    assert [h.id for h in hits] == ["alpha", "mid", "zeta"]
    assert hits[0].score == hits[1].score == hits[2].score


def test_exclude_drops_exactly_one():
    index = VectorIndex(2)
    index.upsert("a", [1.0, 0.0])
    index.upsert("b", [0.9, 0.1])
    index.upsert("c", [0.0, 1.0])
    ids = [h.id for h in index.top_k([1.0, 0.0], k=3, exclude="a")]
    assert ids == ["b", "c"]


def test_query_count_tracks_searches():
    index = VectorIndex(2)
    index.upsert("a", [1.0, 0.0])
    assert index.query_count == 0
    index.top_k([1.0, 0.0], k=1)
    index.top_k([0.5, 0.5], k=1)
    assert index.query_count == 2
    # k=0 short-circuits without a scan.
    index.top_k([1.0, 0.0], k=0)
    assert index.query_count == 2


def test_scores_clipped_to_cosine_range():
    index = VectorIndex(4)
    rng = random.Random(3)
    for i in range(20):
        index.upsert(f"v{i}", [rng.uniform(-1, 1) for _ in range(4)])
    for hit in index.top_k([1.0, 1.0, 1.0, 1.0], k=20):
        assert -1.0 <= hit.score <= 1.0


@given(
    data=st.lists(
        st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=3),
        min_size=1,
        max_size=12,
    ),
    query=st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=3),
    k=st.integers(min_value=0, max_value=14),
)
def test_matches_brute_force_oracle(data, query, k):
    entries = {}
    index = VectorIndex(3)
    for i, vec in enumerate(data):
        if all(v == 0 for v in vec):
            continue
        values = [float(v) for v in vec]
        entries[f"id{i:02d}"] = values
        index.upsert(f"id{i:02d}", values)
    if not entries or all(v == 0 for v in query):
        return
    q = [float(v) for v in query]
    expected = brute_force_top_k(entries, q, k)
    got = [h.id for h in index.top_k(q, k=k)]
    assert got == expected


def test_oracle_equivalence_with_numpy_vectors():
    rng = np.random.default_rng(11)
    index = VectorIndex(8)
    entries = {}
    for i in range(30):
        vec = rng.normal(size=8)
        entries[f"n{i:02d}"] = [float(v) for v in vec]
        index.upsert(f"n{i:02d}", vec)
    for probe in range(50):
        q = [float(v) for v in rng.normal(size=8)]
        k = int(rng.integers(0, 31))
        assert [h.id for h in index.top_k(q, k=k)] == brute_force_top_k(entries, q, k)
