"""Service configuration: one YAML file drives the whole deployment.

The file names the engine URI for a default dataset, the provider base
URL and model list, the pipeline knobs, the cassette (path and mode) and
the session store path. Credentials never live in the file; only the
name of the environment variable holding the API key does.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .context import PipelineConfig
from .errors import IoFailure
from .gateway import Cassette, CassetteMode, GatewayConfig, LlmGateway


@dataclass
class ServiceConfig:
    gateway: GatewayConfig
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    engine_uri: str | None = None
    dataset_name: str | None = None
    cassette_path: str | None = None
    cassette_mode: str = "passthrough"
    store_path: str = "insight-sessions.db"
    host: str = "127.0.0.1"
    port: int = 8080
    # Pause each turn after clarification until the user confirms it.
    require_confirmation: bool = False

    def build_cassette(self) -> Cassette | None:
        if not self.cassette_path:
            return None
        return Cassette(self.cassette_path, CassetteMode(self.cassette_mode))

    def build_gateway(self, transport: Any | None = None) -> LlmGateway:
        return LlmGateway(self.gateway, self.build_cassette(), transport)


def _pipeline_from(raw: dict[str, Any]) -> PipelineConfig:
    known = {f for f in PipelineConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown pipeline settings: {sorted(unknown)}")
    return PipelineConfig(**raw)


def _gateway_from(raw: dict[str, Any]) -> GatewayConfig:
    known = {f for f in GatewayConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown provider settings: {sorted(unknown)}")
    return GatewayConfig(**raw)


def load_config(path: str | os.PathLike[str]) -> ServiceConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise IoFailure(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a mapping")

    provider = raw.get("provider") or {}
    if "models" not in provider:
        provider["models"] = ["default-model"]
    return ServiceConfig(
        gateway=_gateway_from(provider),
        pipeline=_pipeline_from(raw.get("pipeline") or {}),
        engine_uri=raw.get("engine_uri"),
        dataset_name=raw.get("dataset_name"),
        cassette_path=raw.get("cassette_path"),
        cassette_mode=raw.get("cassette_mode", "passthrough"),
        store_path=raw.get("store_path", "insight-sessions.db"),
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8080)),
        require_confirmation=bool(raw.get("require_confirmation", False)),
    )
