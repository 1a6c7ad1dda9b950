"""Question intake: clarification and decomposition.

A raw user question is first rewritten into an unambiguous, answerable
form (or rejected with a suggested alternative when the database cannot
answer it), then split into single-query sub-tasks when it genuinely
spans more than one query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .context import DatabaseSummary, PipelineConfig
from .errors import EmptyInput, OffTopic
from .gateway import LlmGateway, Purpose
from .prompts import clarify_prompt, decompose_prompt


@dataclass(frozen=True)
class UserQuestion:
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise EmptyInput("question is empty")


@dataclass
class ClarifiedTask:
    original: str
    clarified: str
    assumptions: list[str]
    needs_decomposition: bool
    sub_tasks: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.needs_decomposition != bool(self.sub_tasks):
            raise ValueError(
                "sub_tasks must be non-empty exactly when needs_decomposition is set"
            )

    def units(self) -> list[str]:
        """The questions actually sent to SQL generation."""
        return self.sub_tasks if self.needs_decomposition else [self.clarified]


def _summary_payload(summary: DatabaseSummary) -> dict:
    return {"summary": summary.text, "keywords": summary.keywords}


def clarify(
    question: UserQuestion, summary: DatabaseSummary, gateway: LlmGateway
) -> tuple[str, list[str]]:
    """Rewrite a question to be precise and answerable.

    Raises :class:`OffTopic` carrying the model's suggested alternative
    when the database cannot answer the question at all.
    """
    system, user = clarify_prompt(question.text, _summary_payload(summary))
    exchange = gateway.chat(Purpose.CLARIFY, system, user)
    parsed = gateway.parse_structured(
        exchange,
        {
            "answerable": "flag",
            "clarified": "string",
            "assumptions": "list",
            "suggestion": "string",
        },
    )
    if not parsed["answerable"]:
        raise OffTopic(str(parsed["suggestion"]).strip())
    assumptions = [str(a).strip() for a in parsed["assumptions"] if str(a).strip()]
    # An empty rewrite means the model judged the question already precise.
    clarified = str(parsed["clarified"]).strip() or question.text.strip()
    return clarified, assumptions


def decompose(
    clarified: str,
    summary: DatabaseSummary,
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> tuple[bool, list[str], list[str]]:
    """Split a clarified question into at most ``decompose_max_subtasks``
    sub-questions. Returns (needs_decomposition, sub_tasks, extra
    assumptions). Fewer than two sub-tasks collapses to no decomposition;
    more than the cap keeps the leading ones and records an assumption.
    """
    system, user = decompose_prompt(
        clarified, _summary_payload(summary), cfg.decompose_max_subtasks
    )
    exchange = gateway.chat(Purpose.DECOMPOSE, system, user)
    parsed = gateway.parse_structured(
        exchange, {"needs_decomposition": "flag", "sub_tasks": "list"}
    )
    sub_tasks = [str(t).strip() for t in parsed["sub_tasks"] if str(t).strip()]
    extra: list[str] = []
    if not parsed["needs_decomposition"] or len(sub_tasks) < 2:
        return False, [], extra
    if len(sub_tasks) > cfg.decompose_max_subtasks:
        extra.append(
            f"question was split into {len(sub_tasks)} parts; "
            f"only the first {cfg.decompose_max_subtasks} are answered"
        )
        sub_tasks = sub_tasks[: cfg.decompose_max_subtasks]
    return True, sub_tasks, extra


def prepare_task(
    question: UserQuestion,
    summary: DatabaseSummary,
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> ClarifiedTask:
    """Clarify then decompose; the standard intake path."""
    clarified, assumptions = clarify(question, summary, gateway)
    needs_split, sub_tasks, extra = decompose(clarified, summary, gateway, cfg)
    return ClarifiedTask(
        original=question.text,
        clarified=clarified,
        assumptions=assumptions + extra,
        needs_decomposition=needs_split,
        sub_tasks=sub_tasks,
    )
