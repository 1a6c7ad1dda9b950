"""Uniform access to chat-completion and embedding providers.

All model traffic in the pipeline flows through one :class:`LlmGateway`.
The gateway canonicalizes each request into a stable content hash and can
record the provider's answer into a cassette file, or replay a previously
recorded answer without touching the network at all. Replay mode is how
the whole pipeline runs deterministically offline.

Cassette files are append-only JSON lines; each line holds the replay
key, the purpose tag, the canonical request, the response text and the
token usage observed when it was recorded.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import httpx

from .errors import (
    CassetteMiss,
    EmptyInput,
    MalformedOutput,
    ProviderError,
    Timeout,
    TokenBudgetExceeded,
)


class Purpose(str, Enum):
    """Why a request is being made; every pipeline call carries one."""

    COLUMN_SUMMARY = "column_summary"
    TABLE_DESCRIPTION = "table_description"
    RELATIONSHIP = "relationship"
    ENTITY = "entity"
    DB_SUMMARY = "db_summary"
    CLARIFY = "clarify"
    DECOMPOSE = "decompose"
    SCHEMA_FILTER = "schema_filter"
    SQL_GEN = "sql_gen"
    REFINE = "refine"
    CHART_TIEBREAK = "chart_tiebreak"


# Deterministic stages get temperature 0; summary prose gets a little room.
_CREATIVE_PURPOSES = {
    Purpose.COLUMN_SUMMARY,
    Purpose.TABLE_DESCRIPTION,
    Purpose.ENTITY,
    Purpose.DB_SUMMARY,
}


def default_temperature(purpose: Purpose) -> float:
    return 0.3 if purpose in _CREATIVE_PURPOSES else 0.0


@dataclass(frozen=True)
class LlmRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    purpose: Purpose
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")


@dataclass
class LlmExchange:
    request: LlmRequest
    response_text: str
    token_usage: tuple[int, int]  # (prompt, completion)
    latency_ms: float


@dataclass
class EmbeddingVector:
    values: list[float]
    dimension: int

    def __post_init__(self):
        if len(self.values) != self.dimension:
            raise ValueError("dimension does not match value count")
        if any(v != v or v in (float("inf"), float("-inf")) for v in self.values):
            raise ValueError("embedding contains non-finite values")


def estimate_tokens(text: str) -> int:
    """Character-class token estimate: one per alphanumeric run, one per
    other non-space character. Cheap and stable across platforms."""
    return len(re.findall(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]", text))


_WS = re.compile(r"\s+")


def _collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def canonical_chat_request(request: LlmRequest) -> dict[str, Any]:
    """Whitespace-insensitive canonical form used for replay keys.

    Latency and provider metadata never enter the canonical form, so a
    key computed on one platform matches the same request everywhere.
    """
    return {
        "kind": "chat",
        "model": request.model_id,
        "purpose": request.purpose.value,
        "temperature": request.temperature,
        "max_output_tokens": request.max_output_tokens,
        "messages": [
            {"role": role, "content": _collapse_ws(content)}
            for role, content in request.messages
        ],
    }


def canonical_embed_request(model_id: str, text: str) -> dict[str, Any]:
    return {"kind": "embedding", "model": model_id, "text": _collapse_ws(text)}


def replay_key(canonical: dict[str, Any]) -> str:
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CassetteMode(str, Enum):
    RECORD = "record"
    REPLAY = "replay"
    PASSTHROUGH = "passthrough"


@dataclass
class CassetteEntry:
    key: str
    purpose: str
    request_canonical: dict[str, Any]
    response_text: str
    token_usage: tuple[int, int]


class Cassette:
    """Append-only store of canonicalized request/response pairs.

    In replay mode every lookup must hit; a miss means the test fixture
    and the pipeline disagree about what was asked, which is exactly the
    failure we want surfaced.
    """

    def __init__(self, path: str | os.PathLike[str], mode: CassetteMode):
        self.path = str(path)
        self.mode = mode
        self._entries: dict[str, CassetteEntry] = {}
        self._lock = threading.Lock()
        if os.path.exists(self.path):
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                entry = CassetteEntry(
                    key=raw["replay_key"],
                    purpose=raw["purpose_tag"],
                    request_canonical=raw["request_canonical"],
                    response_text=raw["response_text"],
                    token_usage=tuple(raw.get("token_usage", (0, 0))),
                )
                self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key: str) -> CassetteEntry | None:
        return self._entries.get(key)

    def record(self, entry: CassetteEntry) -> None:
        line = json.dumps(
            {
                "replay_key": entry.key,
                "purpose_tag": entry.purpose,
                "request_canonical": entry.request_canonical,
                "response_text": entry.response_text,
                "token_usage": list(entry.token_usage),
            },
            ensure_ascii=False,
        )
        with self._lock:
            self._entries[entry.key] = entry
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def entries_by_purpose(self, purpose: str) -> list[CassetteEntry]:
        return [e for e in self._entries.values() if e.purpose == purpose]


class HttpTransport:
    """Chat-completion style HTTP provider. The API key is read from the
    environment variable named in the gateway config, never stored."""

    def __init__(self, base_url: str, api_key: str | None, timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self._timeout = timeout_s

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def chat(self, request: LlmRequest) -> tuple[str, tuple[int, int]]:
        body = {
            "model": request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=self._headers(),
                timeout=self._timeout,
            )
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(str(exc)) from exc
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
        usage = data.get("usage", {})
        return text, (usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0))

    def embed(self, model_id: str, text: str) -> list[float]:
        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"model": model_id, "input": text},
                headers=self._headers(),
                timeout=self._timeout,
            )
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(str(exc)) from exc
        return resp.json()["data"][0]["embedding"]


@dataclass
class GatewayConfig:
    models: list[str]
    default_model: str = ""
    embed_model: str = "text-embed"
    embed_dimension: int = 64
    base_url: str = "http://localhost:8000/v1"
    api_key_env: str = "INSIGHT_LLM_KEY"
    token_budget: int = 24000
    in_flight_limit: int = 8
    request_timeout_s: float = 60.0

    def __post_init__(self):
        if not self.models:
            raise ValueError("at least one model must be configured")
        if not self.default_model:
            self.default_model = self.models[0]


_SHAPE_KINDS = ("text", "string", "flag", "count", "number", "list", "object")


def _value_matches(kind: str, value: Any) -> bool:
    if kind == "text":
        return isinstance(value, str) and bool(value.strip())
    if kind == "string":
        # Like text but an empty string is acceptable.
        return isinstance(value, str)
    if kind == "flag":
        return isinstance(value, bool)
    if kind == "count":
        return isinstance(value, int) and not isinstance(value, bool) and value >= 0
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "list":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    raise ValueError(f"unknown shape kind {kind!r}")


def extract_json(text: str) -> Any:
    """Pull the first JSON object or array out of model output that may be
    wrapped in code fences or prose."""
    stripped = text.strip()
    stripped = re.sub(r"^```[a-zA-Z]*\s*", "", stripped)
    stripped = re.sub(r"\s*```$", "", stripped)
    try:
        return json.loads(stripped)
    except json.JSONDecodeError:
        pass
    # Balanced-scan for the first {...} or [...] region.
    for opener, closer in (("{", "}"), ("[", "]")):
        start = text.find(opener)
        while start != -1:
            depth = 0
            in_str = False
            escape = False
            for i in range(start, len(text)):
                ch = text[i]
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
                        try:
                            return json.loads(text[start : i + 1])
                        except json.JSONDecodeError:
                            break
            start = text.find(opener, start + 1)
    raise MalformedOutput(f"no JSON structure found in response: {text[:200]!r}")


class LlmGateway:
    """Provider access with deterministic record/replay.

    ``transport`` is anything exposing ``chat(request)`` and
    ``embed(model_id, text)``; production uses :class:`HttpTransport`,
    tests inject fakes. In replay mode the transport is never touched.
    """

    def __init__(
        self,
        config: GatewayConfig,
        cassette: Cassette | None = None,
        transport: Any | None = None,
    ):
        self.config = config
        self.cassette = cassette
        self._transport = transport
        self._inflight = threading.Semaphore(config.in_flight_limit)
        # (purpose, model_id) per completed chat call; cheap introspection
        # for call-count contracts.
        self.call_log: list[tuple[str, str]] = []
        self._log_lock = threading.Lock()

    # -- construction helpers -------------------------------------------------

    @property
    def default_model(self) -> str:
        return self.config.default_model

    def for_model(self, model_id: str) -> "LlmGateway":
        """A view of this gateway with a different default model. Cassette,
        transport and counters are shared."""
        if model_id not in self.config.models:
            from .errors import UnknownModel

            raise UnknownModel(model_id)
        import copy

        clone = copy.copy(self)
        cfg = copy.copy(self.config)
        cfg.default_model = model_id
        clone.config = cfg
        return clone

    def _require_transport(self) -> Any:
        if self._transport is None:
            self._transport = HttpTransport(
                self.config.base_url,
                os.environ.get(self.config.api_key_env),
                self.config.request_timeout_s,
            )
        return self._transport

    # -- chat ------------------------------------------------------------------

    def chat(
        self,
        purpose: Purpose,
        system: str,
        user: str,
        model_id: str | None = None,
        temperature: float | None = None,
    ) -> LlmExchange:
        """Convenience wrapper building an LlmRequest with the configured
        defaults for the purpose."""
        request = LlmRequest(
            model_id=model_id or self.config.default_model,
            messages=(("system", system), ("user", user)),
            purpose=purpose,
            temperature=default_temperature(purpose) if temperature is None else temperature,
        )
        return self.complete(request)

    def complete(self, request: LlmRequest) -> LlmExchange:
        total = sum(estimate_tokens(content) for _, content in request.messages)
        if total > self.config.token_budget:
            raise TokenBudgetExceeded(
                f"request of ~{total} tokens exceeds budget {self.config.token_budget}"
            )
        canonical = canonical_chat_request(request)
        key = replay_key(canonical)

        mode = self.cassette.mode if self.cassette is not None else CassetteMode.PASSTHROUGH
        if mode is CassetteMode.REPLAY:
            entry = self.cassette.lookup(key)
            if entry is None:
                raise CassetteMiss(
                    f"no recorded response for {request.purpose.value} request {key[:12]}"
                )
            exchange = LlmExchange(request, entry.response_text, tuple(entry.token_usage), 0.0)
        else:
            start = time.monotonic()
            with self._inflight:
                text, usage = self._require_transport().chat(request)
            latency = (time.monotonic() - start) * 1000.0
            if mode is CassetteMode.RECORD:
                self.cassette.record(
                    CassetteEntry(key, request.purpose.value, canonical, text, usage)
                )
            exchange = LlmExchange(request, text, usage, latency)

        with self._log_lock:
            self.call_log.append((request.purpose.value, request.model_id))
        return exchange

    def calls_for(self, purpose: Purpose) -> int:
        with self._log_lock:
            return sum(1 for p, _ in self.call_log if p == purpose.value)

    # -- embeddings --------------------------------------------------------------

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise EmptyInput("cannot embed empty text")
        canonical = canonical_embed_request(self.config.embed_model, text)
        key = replay_key(canonical)
        mode = self.cassette.mode if self.cassette is not None else CassetteMode.PASSTHROUGH

        if mode is CassetteMode.REPLAY:
            entry = self.cassette.lookup(key)
            if entry is None:
                raise CassetteMiss(f"no recorded embedding for {key[:12]}")
            values = json.loads(entry.response_text)
        else:
            with self._inflight:
                values = self._require_transport().embed(self.config.embed_model, text)
            if mode is CassetteMode.RECORD:
                self.cassette.record(
                    CassetteEntry(key, "embedding", canonical, json.dumps(values), (0, 0))
                )
        return EmbeddingVector(values=list(values), dimension=len(values))

    # -- structured parsing --------------------------------------------------------

    def parse_structured(
        self, exchange: LlmExchange, expected_shape: dict[str, str]
    ) -> dict[str, Any]:
        """Parse the fields named in ``expected_shape`` out of a response.

        On a parse failure, exactly one repair re-prompt is issued asking
        for only the requested structure; a second failure raises
        :class:`MalformedOutput`.
        """
        for kind in expected_shape.values():
            if kind not in _SHAPE_KINDS:
                raise ValueError(f"unknown shape kind {kind!r}")
        try:
            return self._try_parse(exchange.response_text, expected_shape)
        except MalformedOutput as first_error:
            repair = self._repair_request(exchange, expected_shape)
            repaired = self.complete(repair)
            try:
                return self._try_parse(repaired.response_text, expected_shape)
            except MalformedOutput as second_error:
                raise MalformedOutput(
                    f"{second_error} (after one repair attempt; first failure: {first_error})"
                ) from second_error

    def _repair_request(
        self, exchange: LlmExchange, expected_shape: dict[str, str]
    ) -> LlmRequest:
        fields = ", ".join(f"{name} ({kind})" for name, kind in sorted(expected_shape.items()))
        messages = exchange.request.messages + (
            ("assistant", exchange.response_text),
            (
                "user",
                "Return only the requested structure as a single JSON object "
                f"with exactly these fields: {fields}. No prose.",
            ),
        )
        return LlmRequest(
            model_id=exchange.request.model_id,
            messages=messages,
            purpose=exchange.request.purpose,
            temperature=0.0,
            max_output_tokens=exchange.request.max_output_tokens,
        )

    @staticmethod
    def _try_parse(text: str, expected_shape: dict[str, str]) -> dict[str, Any]:
        data = extract_json(text)
        if not isinstance(data, dict):
            raise MalformedOutput(f"expected a JSON object, got {type(data).__name__}")
        out: dict[str, Any] = {}
        for name, kind in expected_shape.items():
            if name not in data:
                raise MalformedOutput(f"missing required field {name!r}")
            value = data[name]
            # Tolerate numeric strings for counts; anything else must match.
            if kind == "count" and isinstance(value, str) and value.isdigit():
                value = int(value)
            if not _value_matches(kind, value):
                raise MalformedOutput(f"field {name!r} is not a {kind}")
            out[name] = value
        return out


Transport = Callable[[LlmRequest], tuple[str, tuple[int, int]]]
