"""Service configuration: a YAML (or JSON) file with environment overrides.

Environment variables use the CONTACTGROUND_ prefix and win over the file;
the chat-backend credential is read from the environment variable named by
``llm.api_key_env`` and never lives in the file itself.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from .correction import Corrector
from .errors import ConfigError
from .intent import IntentRouter
from .llm import LLMGateway, OpenAICompatBackend, ScriptedBackend
from .prediction import Predictor
from .resolver import ContactResolver, FileSink, TcpSink
from .session import Orchestrator
from .vision import FixtureVisionBackend, RemoteVisionBackend

__all__ = ["AppConfig", "load_config", "build_orchestrator"]


@dataclass
class LLMSettings:
    kind: str = "scripted"  # scripted | openai
    script: str | None = None
    url: str | None = None
    model: str | None = None
    api_key_env: str = "CONTACTGROUND_API_KEY"
    temperature: float = 0.0
    retry_cap: int = 3


@dataclass
class VisionSettings:
    kind: str = "fixture"  # fixture | remote
    root: str | None = None
    segment_url: str | None = None
    detect_url: str | None = None


@dataclass
class SinkSettings:
    kind: str = "file"  # file | tcp
    path: str = "./contact_tasks"
    host: str | None = None
    port: int | None = None


@dataclass
class AppConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    llm: LLMSettings = field(default_factory=LLMSettings)
    vision: VisionSettings = field(default_factory=VisionSettings)
    sink: SinkSettings = field(default_factory=SinkSettings)
    trajectory_duration: float = 4.0
    sample_rate: float = 100.0
    depth_radius: int = 10
    static_dir: str | None = None


def _section(data: Mapping, key: str) -> dict:
    value = data.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"config section {key!r} must be a mapping")
    return dict(value)


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> AppConfig:
    env = dict(os.environ if env is None else env)
    data: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping at top level")

    config = AppConfig(
        host=data.get("host", "127.0.0.1"),
        port=int(data.get("port", 8000)),
        llm=LLMSettings(**_section(data, "llm")),
        vision=VisionSettings(**_section(data, "vision")),
        sink=SinkSettings(**_section(data, "sink")),
        trajectory_duration=float(data.get("trajectory_duration", 4.0)),
        sample_rate=float(data.get("sample_rate", 100.0)),
        depth_radius=int(data.get("depth_radius", 10)),
        static_dir=data.get("static_dir"),
    )

    def override(name: str, setter) -> None:
        value = env.get(f"CONTACTGROUND_{name}")
        if value is not None:
            setter(value)

    override("HOST", lambda v: setattr(config, "host", v))
    override("PORT", lambda v: setattr(config, "port", int(v)))
    override("LLM_KIND", lambda v: setattr(config.llm, "kind", v))
    override("LLM_SCRIPT", lambda v: setattr(config.llm, "script", v))
    override("LLM_URL", lambda v: setattr(config.llm, "url", v))
    override("LLM_MODEL", lambda v: setattr(config.llm, "model", v))
    override("LLM_TEMPERATURE", lambda v: setattr(config.llm, "temperature", float(v)))
    override("LLM_RETRY_CAP", lambda v: setattr(config.llm, "retry_cap", int(v)))
    override("VISION_KIND", lambda v: setattr(config.vision, "kind", v))
    override("VISION_ROOT", lambda v: setattr(config.vision, "root", v))
    override("SEGMENT_URL", lambda v: setattr(config.vision, "segment_url", v))
    override("DETECT_URL", lambda v: setattr(config.vision, "detect_url", v))
    override("SINK_KIND", lambda v: setattr(config.sink, "kind", v))
    override("SINK_PATH", lambda v: setattr(config.sink, "path", v))
    override("SINK_HOST", lambda v: setattr(config.sink, "host", v))
    override("SINK_PORT", lambda v: setattr(config.sink, "port", int(v)))
    override("TRAJECTORY_DURATION", lambda v: setattr(config, "trajectory_duration", float(v)))
    override("SAMPLE_RATE", lambda v: setattr(config, "sample_rate", float(v)))
    override("DEPTH_RADIUS", lambda v: setattr(config, "depth_radius", int(v)))
    override("STATIC_DIR", lambda v: setattr(config, "static_dir", v))
    return config


def _build_gateway(settings: LLMSettings, env: Mapping[str, str]) -> LLMGateway:
    if settings.kind == "scripted":
        if not settings.script:
            raise ConfigError("llm.kind 'scripted' needs llm.script (JSON file of matcher->reply)")
        try:
            script = json.loads(Path(settings.script).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load LLM script {settings.script}: {exc}") from exc
        if isinstance(script, list):
            script = [(m, r) for m, r in script]
        backend = ScriptedBackend(script)
    elif settings.kind == "openai":
        if not settings.url or not settings.model:
            raise ConfigError("llm.kind 'openai' needs llm.url and llm.model")
        backend = OpenAICompatBackend(
            settings.url, settings.model, api_key=env.get(settings.api_key_env, "")
        )
    else:
        raise ConfigError(f"unknown llm.kind {settings.kind!r}")
    return LLMGateway(backend, retry_cap=settings.retry_cap)


def _build_vision(settings: VisionSettings):
    if settings.kind == "fixture":
        if not settings.root:
            raise ConfigError("vision.kind 'fixture' needs vision.root")
        return FixtureVisionBackend(settings.root)
    if settings.kind == "remote":
        if not settings.segment_url or not settings.detect_url:
            raise ConfigError("vision.kind 'remote' needs segment_url and detect_url")
        return RemoteVisionBackend(settings.segment_url, settings.detect_url)
    raise ConfigError(f"unknown vision.kind {settings.kind!r}")


def _build_sink(settings: SinkSettings):
    if settings.kind == "file":
        return FileSink(settings.path)
    if settings.kind == "tcp":
        if not settings.host or not settings.port:
            raise ConfigError("sink.kind 'tcp' needs sink.host and sink.port")
        return TcpSink(settings.host, settings.port)
    raise ConfigError(f"unknown sink.kind {settings.kind!r}")


def build_orchestrator(config: AppConfig, env: Mapping[str, str] | None = None) -> Orchestrator:
    env = dict(os.environ if env is None else env)
    gateway = _build_gateway(config.llm, env)
    vision = _build_vision(config.vision)
    temperature = config.llm.temperature
    return Orchestrator(
        router=IntentRouter(gateway, temperature=temperature),
        predictor=Predictor(gateway, vision, temperature=temperature),
        corrector=Corrector(gateway, vision, temperature=temperature),
        resolver=ContactResolver(
            gateway,
            duration=config.trajectory_duration,
            sample_rate=config.sample_rate,
            depth_radius=config.depth_radius,
            temperature=temperature,
        ),
        sink=_build_sink(config.sink),
    )
