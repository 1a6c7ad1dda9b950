"""Automated exploratory data analysis over relational databases.

Turns a database plus a natural-language question into validated SQL
and chart recommendations. The pipeline first generates a layered
context of the schema (column summaries, table descriptions, join
relationships, entities, database summary), then clarifies and
decomposes the question, selects the relevant schema subset, generates
SQL, validates it with an EXPLAIN-then-execute refinement chain and
recommends chart types for the result. All model traffic runs through
a record/replay gateway so everything is testable offline.
"""

from .catalog import (
    ColumnDef,
    DatabaseSchema,
    ForeignKey,
    SampledRows,
    TableDef,
    load_context,
    persist_context,
    serialize_context,
)
from .charts import ChartRecommendation, ShapeSignature, classify_result, recommend
from .config import ServiceConfig, load_config
from .context import (
    ColumnSummary,
    DatabaseSummary,
    EntitySet,
    PipelineConfig,
    SchemaContext,
    TableDescription,
    TableRelationship,
    generate_context,
)
from .engine import SqliteEngine
from .errors import InsightError
from .gateway import (
    Cassette,
    CassetteMode,
    EmbeddingVector,
    GatewayConfig,
    LlmExchange,
    LlmGateway,
    LlmRequest,
    Purpose,
)
from .questions import ClarifiedTask, UserQuestion, prepare_task
from .service import InsightService
from .sqlgen import (
    QueryResult,
    RefinementTrace,
    ResultColumn,
    SchemaSubset,
    SqlCandidate,
    TaskOutcome,
    answer_task,
)
from .vectors import RankedHit, VectorIndex

__version__ = "0.1.0"

__all__ = [
    "Cassette",
    "CassetteMode",
    "ChartRecommendation",
    "ClarifiedTask",
    "ColumnDef",
    "ColumnSummary",
    "DatabaseSchema",
    "DatabaseSummary",
    "EmbeddingVector",
    "EntitySet",
    "ForeignKey",
    "GatewayConfig",
    "InsightError",
    "InsightService",
    "LlmExchange",
    "LlmGateway",
    "LlmRequest",
    "PipelineConfig",
    "Purpose",
    "QueryResult",
    "RankedHit",
    "RefinementTrace",
    "ResultColumn",
    "SampledRows",
    "SchemaContext",
    "SchemaSubset",
    "ServiceConfig",
    "SqlCandidate",
    "ShapeSignature",
    "SqliteEngine",
    "TableDef",
    "TableDescription",
    "TableRelationship",
    "TaskOutcome",
    "UserQuestion",
    "VectorIndex",
    "answer_task",
    "classify_result",
    "generate_context",
    "load_config",
    "load_context",
    "persist_context",
    "prepare_task",
    "recommend",
    "serialize_context",
    "__version__",
]
