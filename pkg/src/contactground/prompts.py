"""Built-in system-prompt templates and their structured-reply schemas.

Every pipeline stage has one template (body plus exactly five worked
examples) and one pydantic schema its replies must validate against. The
schemas are registered with the default registry at import time.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

from .errors import ExpressionParseError
from .expr import parse as parse_expression
from .llm import PromptTemplate, register_schema, render_template

SCHEMA_INTENT = "intent-category"
SCHEMA_ANALYSIS = "prompt-analysis"
SCHEMA_POINT_EXPRS = "point-expressions"
SCHEMA_OBJECT_MENTIONS = "object-mentions"
SCHEMA_EFFECTOR = "effector-selection"


class IntentReply(BaseModel):
    category: Literal["Prediction", "Correction", "Confirmation"]


class AnalysisReply(BaseModel):
    chain_of_thought: str = ""
    objects: list[str] = Field(min_length=1)
    position_type: Literal["Absolute", "Relative"]

    @field_validator("objects")
    @classmethod
    def _no_blank_objects(cls, objects: list[str]) -> list[str]:
        cleaned = [o.strip() for o in objects]
        if any(not o for o in cleaned):
            raise ValueError("object descriptions must be non-blank")
        return cleaned


class PointExprReply(BaseModel):
    x_expr: str
    y_expr: str

    @field_validator("x_expr", "y_expr")
    @classmethod
    def _parseable(cls, text: str) -> str:
        try:
            parse_expression(text)
        except ExpressionParseError as exc:
            # pydantic only treats ValueError as a validation failure
            raise ValueError(f"not a closed arithmetic expression: {exc}") from exc
        return text


class ObjectMentionsReply(BaseModel):
    objects: list[str] = Field(default_factory=list)

    @field_validator("objects")
    @classmethod
    def _drop_blanks(cls, objects: list[str]) -> list[str]:
        return [o.strip() for o in objects if o.strip()]


class EffectorReply(BaseModel):
    end_effector: Literal["LeftHand", "RightHand", "LeftFoot", "RightFoot"]
    task_type: Literal["SupportContact", "Reach"]


register_schema(SCHEMA_INTENT, IntentReply)
register_schema(SCHEMA_ANALYSIS, AnalysisReply)
register_schema(SCHEMA_POINT_EXPRS, PointExprReply)
register_schema(SCHEMA_OBJECT_MENTIONS, ObjectMentionsReply)
register_schema(SCHEMA_EFFECTOR, EffectorReply)


MODULE_SELECTOR = PromptTemplate(
    name="module-selector",
    body=(
        "You are the routing stage of a robot contact-placement assistant.\n"
        "Classify the operator's message into exactly one category:\n"
        '- "Prediction": the operator asks for a contact at a new location.\n'
        '- "Correction": the operator adjusts the currently proposed location.\n'
        '- "Confirmation": the operator accepts the currently proposed location.\n'
        'Respond with only a JSON object: {"category": "Prediction" | "Correction" | "Confirmation"}'
    ),
    shots=[
        ("Put your left palm on the table", '{"category": "Prediction"}'),
        ("a bit to the left", '{"category": "Correction"}'),
        ("perfect, do it", '{"category": "Confirmation"}'),
        ("Lean on the shelf, right of the vase", '{"category": "Prediction"}'),
        ("move it closer to the jar", '{"category": "Correction"}'),
    ],
)

PROMPT_ANALYZER = PromptTemplate(
    name="prompt-analyzer",
    body=(
        "You analyze an instruction asking a robot to place a contact point in an image.\n"
        "Decide whether the requested position is Absolute (the contact lies on a named\n"
        "object) or Relative (the contact is expressed by a spatial relation to one or\n"
        "more objects), and list the object descriptions exactly as the operator states\n"
        "them, in order of mention. Think step by step before answering.\n"
        "Respond with only a JSON object:\n"
        '{"chain_of_thought": "...", "objects": ["..."], "position_type": "Absolute" | "Relative"}'
    ),
    shots=[
        (
            "put your palm on the red plate",
            '{"chain_of_thought": "The contact is on the plate itself.", '
            '"objects": ["red plate"], "position_type": "Absolute"}',
        ),
        (
            "right of the kettle",
            '{"chain_of_thought": "The contact sits beside the kettle, not on it.", '
            '"objects": ["kettle"], "position_type": "Relative"}',
        ),
        (
            "between the mug and the tray",
            '{"chain_of_thought": "The contact lies between two objects.", '
            '"objects": ["mug", "tray"], "position_type": "Relative"}',
        ),
        (
            "lean on the windowsill",
            '{"chain_of_thought": "The contact is on the windowsill surface.", '
            '"objects": ["windowsill"], "position_type": "Absolute"}',
        ),
        (
            "just under the shelf",
            '{"chain_of_thought": "The contact is below the shelf.", '
            '"objects": ["shelf"], "position_type": "Relative"}',
        ),
    ],
)

RELATIVE_CALCULATOR = PromptTemplate(
    name="relative-calculator",
    body=(
        "You compute a contact pixel from bounding boxes and a spatial instruction.\n"
        "Boxes are written as: <Object> is at [x,y] with width=w and height=h.\n"
        "[x,y] is the top-left corner in pixels; x grows to the right and y grows\n"
        "downward. Give one arithmetic expression per coordinate using only numbers,\n"
        "+ - * / and parentheses. Do not compute the final numbers yourself.\n"
        'Respond with only a JSON object: {"x_expr": "...", "y_expr": "..."}'
    ),
    shots=[
        (
            "Cup is at [100,150] with width=120 and height=90. Place your hand left from the cup.",
            '{"x_expr": "100 - 60", "y_expr": "150 + 90/2"}',
        ),
        (
            "Box is at [300,200] with width=80 and height=40. Touch the top of the box.",
            '{"x_expr": "300 + 80/2", "y_expr": "200"}',
        ),
        (
            "Mug is at [140,170] with width=40 and height=50. "
            "Tray is at [360,180] with width=80 and height=60. "
            "Place a contact between the mug and the tray.",
            '{"x_expr": "((140 + 40/2) + (360 + 80/2)) / 2", '
            '"y_expr": "((170 + 50/2) + (180 + 60/2)) / 2"}',
        ),
        (
            "Plate is at [500,400] with width=100 and height=100. Lean right from the plate.",
            '{"x_expr": "500 + 100 + 50", "y_expr": "400 + 100/2"}',
        ),
        (
            "Stool is at [220,340] with width=60 and height=80. Put your foot just below the stool.",
            '{"x_expr": "220 + 60/2", "y_expr": "340 + 80 + 20"}',
        ),
    ],
)

CORRECTION_OBJECTS = PromptTemplate(
    name="correction-objects",
    body=(
        "You list the physical objects mentioned in a correction to a robot's proposed\n"
        "contact point. Corrections often mention no object at all; then the list is\n"
        "empty. Respond with only a JSON object: {\"objects\": [\"...\"]}"
    ),
    shots=[
        ("a bit to the right", '{"objects": []}'),
        ("move closer to the mug", '{"objects": ["mug"]}'),
        ("twice as far as last time", '{"objects": []}'),
        ("shift it toward the red tray, just a little", '{"objects": ["red tray"]}'),
        ("higher, away from the bowl", '{"objects": ["bowl"]}'),
    ],
)

CORRECTION_CALCULATOR = PromptTemplate(
    name="correction-calculator",
    body=(
        "You correct a previously proposed contact pixel using the operator's feedback.\n"
        "You receive the current target, bounding boxes when objects were mentioned\n"
        "(written as <Object> is at [x,y] with width=w and height=h), and the\n"
        "conversation so far. [x,y] is the top-left corner in pixels; x grows to the\n"
        "right and y grows downward. Give one arithmetic expression per coordinate\n"
        "using only numbers, + - * / and parentheses. Do not compute the final numbers\n"
        "yourself. Respond with only a JSON object: {\"x_expr\": \"...\", \"y_expr\": \"...\"}"
    ),
    shots=[
        (
            "Current target: [300,200]. Instruction: a bit to the right",
            '{"x_expr": "300 + 40", "y_expr": "200"}',
        ),
        (
            'Current target: [340,200]. History: 1. "a bit to the right" -> [340,200]. '
            "Instruction: twice as far as last time",
            '{"x_expr": "340 + 80", "y_expr": "200"}',
        ),
        (
            "Current target: [520,380]. Mug is at [140,170] with width=40 and height=50. "
            "Instruction: move closer to the mug",
            '{"x_expr": "(520 + (140 + 40/2)) / 2", "y_expr": "(380 + (170 + 50/2)) / 2"}',
        ),
        (
            "Current target: [100,500]. Instruction: a little higher, please",
            '{"x_expr": "100", "y_expr": "500 - 30"}',
        ),
        (
            "Current target: [640,360]. Instruction: down and slightly left",
            '{"x_expr": "640 - 25", "y_expr": "360 + 40"}',
        ),
    ],
)

EFFECTOR_SELECTOR = PromptTemplate(
    name="effector-selector",
    body=(
        "You pick which end-effector a humanoid robot should use for a confirmed\n"
        "contact, and whether the contact is a support (bracing or leaning to keep\n"
        "balance) or a reach (moving to touch or grasp a goal).\n"
        "Respond with only a JSON object:\n"
        '{"end_effector": "LeftHand" | "RightHand" | "LeftFoot" | "RightFoot", '
        '"task_type": "SupportContact" | "Reach"}'
    ),
    shots=[
        (
            "lean your right hand on the table edge",
            '{"end_effector": "RightHand", "task_type": "SupportContact"}',
        ),
        (
            "with your left hand, grab the mug",
            '{"end_effector": "LeftHand", "task_type": "Reach"}',
        ),
        (
            "brace on the wall with the left hand",
            '{"end_effector": "LeftHand", "task_type": "SupportContact"}',
        ),
        (
            "step on the ledge with your right foot",
            '{"end_effector": "RightFoot", "task_type": "SupportContact"}',
        ),
        (
            "reach the switch with your right hand",
            '{"end_effector": "RightHand", "task_type": "Reach"}',
        ),
    ],
)

TEMPLATES = {
    t.name: t
    for t in (
        MODULE_SELECTOR,
        PROMPT_ANALYZER,
        RELATIVE_CALCULATOR,
        CORRECTION_OBJECTS,
        CORRECTION_CALCULATOR,
        EFFECTOR_SELECTOR,
    )
}


def system_prompt(template: PromptTemplate) -> str:
    """Render a placeholder-free template into its final system prompt."""
    return render_template(template, {})
