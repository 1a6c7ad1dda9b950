"""Exception hierarchy shared by every insight module.

Errors are grouped by the subsystem that raises them. Service code maps
most of these onto HTTP status codes; anything not mapped surfaces as a
failed turn with the error text attached.
"""


class InsightError(Exception):
    """Base class for all errors raised by this package."""


# --- database catalog / engine ---

class ConnectionFailed(InsightError):
    """The connection spec does not resolve to a reachable SQL engine."""


class PermissionDenied(InsightError):
    """Engine metadata views exist but are not readable."""


class UnknownTable(InsightError):
    """A table name does not exist in the introspected schema."""


class EngineError(InsightError):
    """An EXPLAIN or query execution was rejected by the engine.

    ``str(exc)`` carries the engine's error text, which is what the
    refinement chain feeds back to the model.
    """


class EngineUnavailable(InsightError):
    """The engine connection could not be (re)established."""


class NonReadOnly(InsightError):
    """A generated statement would mutate data and was rejected."""


class IoFailure(InsightError):
    """Reading or writing a context document failed."""


class VersionMismatch(InsightError):
    """A persisted context document carries an unsupported version tag."""


# --- llm gateway ---

class ProviderError(InsightError):
    """Transport or quota failure talking to the model provider."""


class Timeout(ProviderError):
    """The provider did not answer within the configured deadline."""


class CassetteMiss(InsightError):
    """Replay mode found no recorded response for a request."""


class MalformedOutput(InsightError):
    """Model output did not match the requested structure, even after
    one repair re-prompt."""


class EmptyInput(InsightError):
    """An operation was given empty text where content is required."""


class TokenBudgetExceeded(InsightError):
    """A request would exceed the configured context-window budget."""


# --- vector index ---

class DimensionMismatch(InsightError):
    """A vector does not match the index dimension."""


class InvalidVector(InsightError):
    """A zero or non-finite vector cannot participate in cosine search."""


class EmptyIndex(InsightError):
    """top_k with k > 0 was asked of an index with no entries."""


# --- context generation ---

class EmptySchema(InsightError):
    """The schema has no tables or no columns to work with."""


class NoUsableFields(InsightError):
    """Every column a model proposed for a table is nonexistent."""


class EmptyEntitySet(InsightError):
    """A database summary was requested without any extracted entities."""


class ContextGenerationFailed(InsightError):
    """A context-generation stage failed.

    Carries the failing ``stage``, the list of ``completed`` stages, and
    the original error as ``__cause__``, so callers can report partial
    progress.
    """

    def __init__(self, stage: str, completed: list[str], cause: Exception):
        super().__init__(f"context generation failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.completed = completed


# --- question pipeline ---

class OffTopic(InsightError):
    """The model judged the question unanswerable from this database.

    Soft outcome: the service surfaces ``suggestion`` to the user instead
    of treating the turn as a hard failure.
    """

    def __init__(self, suggestion: str):
        super().__init__(suggestion)
        self.suggestion = suggestion


# --- sql pipeline ---

class NoRelevantSchema(InsightError):
    """Schema filtering selected no tables; the question likely needs
    rephrasing against this database."""


class RefinementExhausted(InsightError):
    """Both refinement phases spent their round budget without a
    statement the engine accepts.

    ``trace`` holds the full refinement history when available.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class EmptyResult(InsightError):
    """A result with zero columns cannot be classified for charting."""


# --- session service ---

class UnknownDataset(InsightError):
    """No dataset registered under the given reference or name."""


class UnknownModel(InsightError):
    """The model id is not in the configured model list."""


class UnknownSession(InsightError):
    """No session with the given id."""


class UnknownTurn(InsightError):
    """No completed turn with the given id (failed turns are not
    bookmarkable)."""


class IndexOutOfRange(InsightError):
    """A bookmark referenced a sub-task index the turn does not have."""


class SessionBusy(InsightError):
    """The session already has a turn in flight."""


class NameConflict(InsightError):
    """A dataset with this name is already registered."""
