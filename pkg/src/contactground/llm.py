"""Chat-completion gateway: per-call system prompts, few-shot templates,
JSON-constrained output, and logit biasing.

Two backends ship here. ScriptedBackend returns canned replies for offline
determinism; OpenAICompatBackend talks to any chat-completions HTTP endpoint.
Neither enforces a grammar natively, so complete_structured() emulates
grammar acceptance by validating against a registered schema and re-prompting
up to a retry cap.
"""
from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import httpx
from pydantic import BaseModel, ValidationError

from .errors import (
    GatewayTransportError,
    SchemaNotRegisteredError,
    StructuredOutputError,
    TemplateError,
    UnscriptedInputError,
)

__all__ = [
    "ChatRequest",
    "StructuredReply",
    "PromptTemplate",
    "SchemaRegistry",
    "DEFAULT_REGISTRY",
    "register_schema",
    "render_template",
    "ScriptedBackend",
    "register_scripted_backend",
    "OpenAICompatBackend",
    "LLMGateway",
]

SHOTS_PER_TEMPLATE = 5

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_messages: Sequence[tuple[str, str]]
    schema: str
    logit_bias: Mapping[str, float] = field(default_factory=dict)
    temperature: float = 0.0

    def __post_init__(self):
        if not self.system_prompt.strip():
            raise ValueError("system_prompt must be non-empty")
        if not self.schema:
            raise ValueError("schema identifier must be non-empty")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")


@dataclass(frozen=True)
class StructuredReply:
    raw_text: str
    parsed: BaseModel
    attempts: int


@dataclass(frozen=True)
class PromptTemplate:
    """System-prompt body plus exactly five worked input/output examples."""

    name: str
    body: str
    shots: Sequence[tuple[str, str]]

    def __post_init__(self):
        if len(self.shots) != SHOTS_PER_TEMPLATE:
            raise ValueError(
                f"template {self.name!r} needs exactly {SHOTS_PER_TEMPLATE} shots, "
                f"got {len(self.shots)}"
            )


def render_template(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Fill `{name}` placeholders and append the five shots in fixed order.

    Only bare-identifier braces count as placeholders, so JSON snippets in
    the body (`{"key": ...}`) pass through untouched. The binding set must
    equal the placeholder set exactly.
    """
    placeholders = {m.group(1) for m in _PLACEHOLDER.finditer(template.body)}
    missing = placeholders - set(bindings)
    if missing:
        raise TemplateError(f"missing bindings for {sorted(missing)} in template {template.name!r}")
    extra = set(bindings) - placeholders
    if extra:
        raise TemplateError(f"unused bindings {sorted(extra)} for template {template.name!r}")
    text = _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.body)
    lines = [text, "", "Examples:"]
    for inp, out in template.shots:
        lines.append(f"Input: {inp}")
        lines.append(f"Output: {out}")
    return "\n".join(lines)


class SchemaRegistry:
    """Name -> pydantic model table for structured-output validation."""

    def __init__(self):
        self._models: dict[str, type[BaseModel]] = {}

    def register(self, name: str, model: type[BaseModel]) -> None:
        self._models[name] = model

    def resolve(self, name: str) -> type[BaseModel]:
        try:
            return self._models[name]
        except KeyError:
            raise SchemaNotRegisteredError(f"schema {name!r} is not registered") from None

    def __contains__(self, name: str) -> bool:
        return name in self._models


DEFAULT_REGISTRY = SchemaRegistry()


def register_schema(name: str, model: type[BaseModel]) -> None:
    DEFAULT_REGISTRY.register(name, model)


class LLMBackend(Protocol):
    def complete(self, request: ChatRequest) -> str:
        """Return the raw text of the model's reply."""
        ...


class ScriptedBackend:
    """Deterministic canned-reply backend for offline tests.

    Entries are (matcher, reply) pairs checked in registration order; the
    first match wins. A matcher of "*" matches everything, any other matcher
    matches when it occurs as a substring of the request text (system prompt
    plus all user messages). Replies given as mappings are serialized once at
    registration, so identical requests always see byte-identical text.
    """

    def __init__(self, script: Mapping[str, object] | Sequence[tuple[str, object]]):
        items = script.items() if isinstance(script, Mapping) else script
        self._entries: list[tuple[str, str]] = [
            (matcher, reply if isinstance(reply, str) else json.dumps(reply))
            for matcher, reply in items
        ]

    def complete(self, request: ChatRequest) -> str:
        haystack = "\n".join(
            [request.system_prompt] + [text for _, text in request.user_messages]
        )
        for matcher, reply in self._entries:
            if matcher == "*" or matcher in haystack:
                return reply
        raise UnscriptedInputError(
            f"no scripted reply matches request (last user text: "
            f"{request.user_messages[-1][1] if request.user_messages else ''!r})"
        )


def register_scripted_backend(
    script: Mapping[str, object] | Sequence[tuple[str, object]],
) -> ScriptedBackend:
    return ScriptedBackend(script)


class OpenAICompatBackend:
    """Chat-completions HTTP backend (OpenAI wire format).

    Logit bias is advisory: the wire format wants token-id keys, so only
    integer-like keys are forwarded; everything else is dropped and the
    schema constraint carries correctness.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("CONTACTGROUND_API_KEY", "")
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, request: ChatRequest) -> str:
        messages = [{"role": "system", "content": request.system_prompt}]
        messages += [{"role": role, "content": text} for role, text in request.user_messages]
        payload: dict = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "response_format": {"type": "json_object"},
        }
        bias = {k: v for k, v in request.logit_bias.items() if k.lstrip("-").isdigit()}
        if bias:
            payload["logit_bias"] = bias
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise GatewayTransportError(f"chat backend failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise GatewayTransportError(f"malformed chat response: {exc}") from exc


_REPAIR_NOTE = (
    "The previous reply was not valid for the required JSON schema ({error}). "
    "Reply again with only a JSON object matching the schema."
)


class LLMGateway:
    """Validate-and-retry wrapper giving every backend one structured contract."""

    def __init__(
        self,
        backend: LLMBackend,
        registry: SchemaRegistry = DEFAULT_REGISTRY,
        retry_cap: int = 3,
    ):
        if retry_cap < 1:
            raise ValueError("retry_cap must be >= 1")
        self.backend = backend
        self.registry = registry
        self.retry_cap = retry_cap

    def complete_structured(self, request: ChatRequest) -> StructuredReply:
        model = self.registry.resolve(request.schema)
        messages = list(request.user_messages)
        raw = ""
        error = ""
        for attempt in range(1, self.retry_cap + 1):
            attempt_request = (
                request
                if attempt == 1
                else ChatRequest(
                    system_prompt=request.system_prompt,
                    user_messages=messages,
                    schema=request.schema,
                    logit_bias=request.logit_bias,
                    temperature=request.temperature,
                )
            )
            raw = self.backend.complete(attempt_request)
            try:
                parsed = model.model_validate(json.loads(raw))
                return StructuredReply(raw_text=raw, parsed=parsed, attempts=attempt)
            except (json.JSONDecodeError, ValidationError) as exc:
                error = str(exc).splitlines()[0]
                messages = messages + [("user", _REPAIR_NOTE.format(error=error))]
        raise StructuredOutputError(
            f"model output failed schema {request.schema!r} after "
            f"{self.retry_cap} attempts: {error}",
            attempts=self.retry_cap,
            raw_text=raw,
        )
