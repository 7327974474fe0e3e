"""Turn a Prediction-class utterance plus the current image into a candidate
contact pixel.

The prompt analyzer decides between two branches: absolute positions ("on
the book") go through language-grounded segmentation and take the heatmap
argmax; relative positions ("left from the box") go through open-set
detection, a numeric prompt describing each box, and per-coordinate
arithmetic expressions from the model.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import MissingDetectionError
from .expr import evaluate, parse
from .intent import Utterance
from .llm import ChatRequest, LLMGateway
from .prompts import (
    PROMPT_ANALYZER,
    RELATIVE_CALCULATOR,
    SCHEMA_ANALYSIS,
    SCHEMA_POINT_EXPRS,
    system_prompt,
)
from .vision import BoundingBox, Heatmap, ImageRef, VisionBackend, best_box, detect, segment

__all__ = [
    "PositionType",
    "AnalysisResult",
    "PixelPoint",
    "PredictionOutcome",
    "Predictor",
    "heatmap_argmax",
    "box_sentence",
    "round_and_clamp",
]


class PositionType(enum.Enum):
    ABSOLUTE = "Absolute"
    RELATIVE = "Relative"


@dataclass(frozen=True)
class AnalysisResult:
    chain_of_thought: str
    objects: tuple[str, ...]
    position_type: PositionType

    def __post_init__(self):
        if not self.objects:
            raise ValueError("analysis must name at least one object")


@dataclass(frozen=True)
class PixelPoint:
    u: int  # column, x from left
    v: int  # row, y from top


@dataclass(frozen=True)
class PredictionOutcome:
    point: PixelPoint
    branch: PositionType
    analysis: AnalysisResult
    clamped: bool = False


def heatmap_argmax(heatmap: Heatmap) -> PixelPoint:
    """First maximum cell in row-major order, as (column, row)."""
    flat_index = int(np.argmax(heatmap.values))
    v, u = divmod(flat_index, heatmap.width)
    return PixelPoint(u=u, v=v)


def box_sentence(box: BoundingBox) -> str:
    """Numeric-prompt line for one detection, e.g.
    "Cup is at [100,150] with width=120 and height=90."
    """
    label = box.label[:1].upper() + box.label[1:]
    return (
        f"{label} is at [{round(box.x)},{round(box.y)}] "
        f"with width={round(box.width)} and height={round(box.height)}."
    )


def round_and_clamp(x: float, y: float, width: int, height: int) -> tuple[PixelPoint, bool]:
    """Round to whole pixels and clamp into the image; flags when clamping moved the point."""
    u = int(round(x))
    v = int(round(y))
    cu = min(max(u, 0), width - 1)
    cv = min(max(v, 0), height - 1)
    return PixelPoint(u=cu, v=cv), (cu != u or cv != v)


class Predictor:
    def __init__(self, gateway: LLMGateway, vision: VisionBackend, temperature: float = 0.0):
        self.gateway = gateway
        self.vision = vision
        self.temperature = temperature
        self._analyzer_system = system_prompt(PROMPT_ANALYZER)
        self._calculator_system = system_prompt(RELATIVE_CALCULATOR)

    def analyze_prompt(self, utterance: Utterance) -> AnalysisResult:
        reply = self.gateway.complete_structured(
            ChatRequest(
                system_prompt=self._analyzer_system,
                user_messages=[("user", utterance.text)],
                schema=SCHEMA_ANALYSIS,
                temperature=self.temperature,
            )
        )
        return AnalysisResult(
            chain_of_thought=reply.parsed.chain_of_thought,
            objects=tuple(reply.parsed.objects),
            position_type=PositionType(reply.parsed.position_type),
        )

    def predict_absolute(self, image: ImageRef, object_desc: str) -> PixelPoint:
        heatmap = segment(self.vision, image, object_desc)
        return heatmap_argmax(heatmap)

    def predict_relative(
        self, image: ImageRef, analysis: AnalysisResult, utterance: Utterance
    ) -> tuple[PixelPoint, bool]:
        if analysis.position_type is not PositionType.RELATIVE:
            raise ValueError("relative branch called with a non-relative analysis")
        boxes = detect(self.vision, image, analysis.objects)
        sentences = []
        for obj in analysis.objects:
            box = best_box(boxes, obj)
            if box is None:
                raise MissingDetectionError(obj)
            sentences.append(box_sentence(box))
        prompt_text = " ".join(sentences) + " " + utterance.text
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
        return round_and_clamp(x, y, image.width, image.height)

    def predict(self, image: ImageRef, utterance: Utterance) -> PredictionOutcome:
        analysis = self.analyze_prompt(utterance)
        if analysis.position_type is PositionType.ABSOLUTE:
            point = self.predict_absolute(image, analysis.objects[0])
            clamped = False
        else:
            point, clamped = self.predict_relative(image, analysis, utterance)
        return PredictionOutcome(
            point=point, branch=analysis.position_type, analysis=analysis, clamped=clamped
        )
