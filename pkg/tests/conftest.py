"""Shared fixtures: fixture databases, scripted gateways, and the
suite-wide guard that no write ever reached an engine connection."""

from __future__ import annotations

import pytest

from insight import engine as engine_module
from insight.context import PipelineConfig, generate_context
from insight.engine import SqliteEngine

from tests.dbs import build_financial_db, build_medical_db
from tests.fakes import ScriptedProvider, make_gateway


@pytest.fixture(scope="session")
def financial_db(tmp_path_factory) -> str:
    return build_financial_db(tmp_path_factory.mktemp("dbs") / "financial.db")


@pytest.fixture(scope="session")
def medical_db(tmp_path_factory) -> str:
    return build_medical_db(tmp_path_factory.mktemp("dbs") / "medical.db")


@pytest.fixture()
def financial_engine(financial_db) -> SqliteEngine:
    return SqliteEngine(financial_db)


@pytest.fixture()
def pipeline_cfg() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture(scope="session")
def financial_context(financial_db):
    """One context build over the financial fixture, shared by tests
    that only read it. Tests that count calls build their own."""
    gateway = make_gateway(ScriptedProvider())
    engine = SqliteEngine(financial_db)
    context, table_index, entity_index = generate_context(
        engine, gateway, PipelineConfig()
    )
    return {
        "context": context,
        "table_index": table_index,
        "entity_index": entity_index,
        "gateway": gateway,
        "engine": engine,
    }


@pytest.fixture(autouse=True, scope="session")
def mutation_guard():
    """The read-only authorizer must never see a write attempt from any
    test. Checked once, after the whole suite."""
    yield
    assert engine_module.MUTATION_ATTEMPTS == 0, (
        f"{engine_module.MUTATION_ATTEMPTS} write attempt(s) reached an engine connection"
    )
