"""Adjust the current candidate pixel from a correction utterance.

Corrections may name objects ("move closer to the cup") or not ("a bit to
the right"); boxes are only fetched when objects are named. The model sees
the current target, any boxes, and the recent conversation so follow-ups
like "twice as much as before" stay meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import MissingDetectionError
from .expr import evaluate, parse
from .intent import Utterance
from .llm import ChatRequest, LLMGateway
from .prediction import PixelPoint, box_sentence, round_and_clamp
from .prompts import (
    CORRECTION_CALCULATOR,
    CORRECTION_OBJECTS,
    SCHEMA_OBJECT_MENTIONS,
    SCHEMA_POINT_EXPRS,
    system_prompt,
)
from .vision import ImageRef, VisionBackend, best_box, detect

__all__ = ["CorrectionContext", "Corrector", "HISTORY_WINDOW"]

# Turns of history rendered into the prompt; bounds token cost.
HISTORY_WINDOW = 10


@dataclass(frozen=True)
class CorrectionContext:
    current_target: PixelPoint
    history: tuple[tuple[str, PixelPoint], ...]
    image: ImageRef

    def __post_init__(self):
        if self.current_target is None:
            raise ValueError("corrections require a prior prediction")


def render_correction_prompt(
    ctx: CorrectionContext, box_lines: Sequence[str], utterance: Utterance
) -> str:
    parts = [f"Current target: [{ctx.current_target.u},{ctx.current_target.v}]."]
    parts.extend(box_lines)
    recent = ctx.history[-HISTORY_WINDOW:]
    if recent:
        turns = " ".join(
            f'{i}. "{text}" -> [{point.u},{point.v}].'
            for i, (text, point) in enumerate(recent, start=1)
        )
        parts.append(f"History: {turns}")
    parts.append(f"Instruction: {utterance.text}")
    return " ".join(parts)


class Corrector:
    def __init__(self, gateway: LLMGateway, vision: VisionBackend, temperature: float = 0.0):
        self.gateway = gateway
        self.vision = vision
        self.temperature = temperature
        self._objects_system = system_prompt(CORRECTION_OBJECTS)
        self._calculator_system = system_prompt(CORRECTION_CALCULATOR)

    def _named_objects(self, utterance: Utterance) -> list[str]:
        reply = self.gateway.complete_structured(
            ChatRequest(
                system_prompt=self._objects_system,
                user_messages=[("user", utterance.text)],
                schema=SCHEMA_OBJECT_MENTIONS,
                temperature=self.temperature,
            )
        )
        return list(reply.parsed.objects)

    def correct(self, ctx: CorrectionContext, utterance: Utterance) -> tuple[PixelPoint, bool]:
        objects = self._named_objects(utterance)
        box_lines: list[str] = []
        if objects:
            boxes = detect(self.vision, ctx.image, objects)
            for obj in objects:
                box = best_box(boxes, obj)
                if box is None:
                    raise MissingDetectionError(obj)
                box_lines.append(box_sentence(box))
        prompt_text = render_correction_prompt(ctx, box_lines, utterance)
        reply = self.gateway.complete_structured(
            ChatRequest(
                system_prompt=self._calculator_system,
                user_messages=[("user", prompt_text)],
                schema=SCHEMA_POINT_EXPRS,
                temperature=self.temperature,
            )
        )
        x = evaluate(parse(reply.parsed.x_expr))
        y = evaluate(parse(reply.parsed.y_expr))
        return round_and_clamp(x, y, ctx.image.width, ctx.image.height)
