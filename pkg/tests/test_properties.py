"""Property-based invariants for the pure logic layers: partitioning,
the read-only statement gate, and column kind inference must hold for
arbitrary inputs, not only the curated fixtures."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from insight.catalog import ColumnDef, DatabaseSchema, TableDef
from insight.context import partition_columns
from insight.errors import NonReadOnly
from insight.sqlgen import ensure_read_only, infer_column_kinds


@st.composite
def random_schemas(draw):
    tables = []
    for t in range(draw(st.integers(min_value=1, max_value=6))):
        columns = [
            ColumnDef(name=f"c{t}_{i}", sql_type="TEXT", nullable=True)
            for i in range(draw(st.integers(min_value=1, max_value=12)))
        ]
        tables.append(TableDef(name=f"t{t}", columns=columns))
    return DatabaseSchema(database_name="prop", tables=tables)


@given(schema=random_schemas(), group_max=st.integers(min_value=1, max_value=15))
def test_partition_is_disjoint_covering_ordered_and_bounded(schema, group_max):
    groups = partition_columns(schema, group_max)
    seen: set[tuple[str, str]] = set()
    regrouped: dict[str, list[str]] = {}
    for table_name, cols in groups:
        assert 1 <= len(cols) <= group_max
        for col in cols:
            assert (table_name, col) not in seen
            seen.add((table_name, col))
        regrouped.setdefault(table_name, []).extend(cols)
    for table in schema.tables:
        assert regrouped[table.name] == table.column_names()


@given(sql=st.text(max_size=200))
def test_read_only_gate_is_total_and_idempotent(sql):
    """Arbitrary text either raises the gate's own error or comes back
    normalized; re-gating an accepted statement changes nothing."""
    try:
        accepted = ensure_read_only(sql)
    except NonReadOnly:
        return
    assert accepted == accepted.strip()
    assert not accepted.endswith(";")
    assert ensure_read_only(accepted) == accepted


@given(
    statement=st.sampled_from(
        [
            "DELETE FROM t",
            "UPDATE t SET a = 1",
            "INSERT INTO t VALUES (1)",
            "DROP TABLE t",
            "CREATE TABLE t (a INTEGER)",
            "PRAGMA user_version = 3",
            "ATTACH DATABASE 'x' AS y",
        ]
    ),
    prefix=st.sampled_from(["", " ", "\n\t", "/* hidden */ ", "-- note\n", "(", "(("]),
    suffix=st.sampled_from(["", ";", " ;", "\n-- trailing"]),
)
def test_gate_rejects_mutations_under_any_decoration(statement, prefix, suffix):
    with pytest.raises(NonReadOnly):
        ensure_read_only(prefix + statement + suffix)


_CELLS = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(10**9), max_value=10**9),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=12),
    st.binary(max_size=8),
)


@st.composite
def rectangular_results(draw):
    n_cols = draw(st.integers(min_value=1, max_value=4))
    n_rows = draw(st.integers(min_value=0, max_value=8))
    rows = [tuple(draw(_CELLS) for _ in range(n_cols)) for _ in range(n_rows)]
    return n_cols, rows


@given(data=rectangular_results())
def test_kind_inference_is_total_and_deterministic(data):
    n_cols, rows = data
    names = [f"col{i}" for i in range(n_cols)]
    kinds = infer_column_kinds(names, rows)
    assert len(kinds) == n_cols
    assert set(kinds) <= {"numeric", "temporal", "categorical", "other"}
    assert infer_column_kinds(names, rows) == kinds


@given(
    values=st.lists(
        st.one_of(
            st.integers(min_value=-(10**6), max_value=10**6),
            st.floats(allow_nan=False, allow_infinity=False),
        ),
        min_size=1,
        max_size=10,
    )
)
def test_pure_number_columns_are_numeric(values):
    assert infer_column_kinds(["v"], [(v,) for v in values]) == ["numeric"]


@given(dates=st.lists(st.dates(), min_size=1, max_size=10))
def test_iso_date_columns_are_temporal(dates):
    rows = [(d.isoformat(),) for d in dates]
    assert infer_column_kinds(["d"], rows) == ["temporal"]
