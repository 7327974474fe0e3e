"""Route each operator utterance to Prediction, Correction, or Confirmation.

Classification is a single 5-shot LLM call with the reply schema closed over
the three category strings; token-level logit bias is attached as an
advisory hint for backends that support it. Only the current utterance is
used - history belongs to the downstream modules.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

from .llm import ChatRequest, LLMGateway
from .prompts import MODULE_SELECTOR, SCHEMA_INTENT, system_prompt

__all__ = ["IntentClass", "Utterance", "IntentRouter"]

CATEGORY_BIAS = 5.0


class IntentClass(enum.Enum):
    PREDICTION = "Prediction"
    CORRECTION = "Correction"
    CONFIRMATION = "Confirmation"


@dataclass(frozen=True)
class Utterance:
    text: str
    timestamp: float = field(default_factory=time.monotonic)

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("utterance text must be non-empty")


class IntentRouter:
    def __init__(self, gateway: LLMGateway, temperature: float = 0.0):
        self.gateway = gateway
        self.temperature = temperature
        self._system = system_prompt(MODULE_SELECTOR)
        self._bias = {c.value: CATEGORY_BIAS for c in IntentClass}

    def classify(self, utterance: Utterance) -> IntentClass:
        reply = self.gateway.complete_structured(
            ChatRequest(
                system_prompt=self._system,
                user_messages=[("user", utterance.text)],
                schema=SCHEMA_INTENT,
                logit_bias=self._bias,
                temperature=self.temperature,
            )
        )
        return IntentClass(reply.parsed.category)
