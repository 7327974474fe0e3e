from __future__ import annotations

import numpy as np
import pytest

from contactground.errors import (
    DegenerateHeatmapError,
    MissingDetectionError,
    StructuredOutputError,
)
from contactground.intent import Utterance
from contactground.llm import LLMGateway, register_scripted_backend
from contactground.prediction import (
    AnalysisResult,
    PixelPoint,
    PositionType,
    Predictor,
    box_sentence,
    heatmap_argmax,
    round_and_clamp,
)
from contactground.vision import BoundingBox, Heatmap

from conftest import CountingVisionBackend, FixtureBuilder, gaussian_map, make_image
from oracles import argmax_scan, argmax_scan_sparse


def predictor(script, vision) -> Predictor:
    return Predictor(LLMGateway(register_scripted_backend(script)), vision)


@pytest.mark.parametrize(
    "text,objects,position",
    [
        ("place your hand on the book", ["book"], "Absolute"),
        ("left from the box", ["box"], "Relative"),
        ("between the cup and the bowl", ["cup", "bowl"], "Relative"),
    ],
)
def test_analyze_prompt_examples(text, objects, position, fixture_builder):
    script = {
        text: {
            "chain_of_thought": "reasoning",
            "objects": objects,
            "position_type": position,
        }
    }
    p = predictor(script, fixture_builder.backend())
    analysis = p.analyze_prompt(Utterance(text))
    assert list(analysis.objects) == objects
    assert analysis.position_type is PositionType(position)
    assert analysis.chain_of_thought == "reasoning"


def test_analysis_requires_objects():
    with pytest.raises(ValueError):
        AnalysisResult(chain_of_thought="", objects=(), position_type=PositionType.ABSOLUTE)


def test_argmax_single_peak():
    values = np.zeros((8, 8))
    values[3, 5] = 1.0
    assert heatmap_argmax(Heatmap(values=values)) == PixelPoint(u=5, v=3)


def test_argmax_uniform_ties_to_origin():
    values = np.full((6, 9), 0.25)
    assert heatmap_argmax(Heatmap(values=values)) == PixelPoint(u=0, v=0)


def test_argmax_gaussian_bump_matches_exhaustive_scan():
    values = gaussian_map(1280, 720, 400, 300, sigma=40.0)
    point = heatmap_argmax(Heatmap(values=values))
    assert (point.u, point.v) == (400, 300)
    r, c = argmax_scan(values.tolist())
    assert (point.u, point.v) == (c, r)


def test_argmax_matches_sparse_oracle_with_ties():
    rng = np.random.default_rng(7)
    for _ in range(50):
        h = int(rng.integers(1, 40))
        w = int(rng.integers(1, 40))
        values = np.zeros((h, w))
        entries = {}
        for _ in range(int(rng.integers(0, 12))):
            r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
            val = float(rng.choice([0.25, 0.5, 0.5, 1.0]))  # duplicates force ties
            values[r, c] = val
            entries[(r, c)] = val
        point = heatmap_argmax(Heatmap(values=values))
        er, ec = argmax_scan_sparse((h, w), entries)
        assert (point.v, point.u) == (er, ec)


def test_predict_absolute_via_fixture(fixture_builder: FixtureBuilder):
    img = make_image(64, 48, "abs")
    values = np.zeros((48, 64))
    values[20, 31] = 1.0
    fixture_builder.add_heatmap("abs", "book", values)
    p = predictor({}, fixture_builder.backend())
    assert p.predict_absolute(img, "book") == PixelPoint(u=31, v=20)


def test_predict_absolute_degenerate(fixture_builder):
    img = make_image(8, 8, "deg")
    fixture_builder.add_heatmap("deg", "book", np.zeros((8, 8)))
    p = predictor({}, fixture_builder.backend())
    with pytest.raises(DegenerateHeatmapError):
        p.predict_absolute(img, "book")


def test_box_sentence_format():
    box = BoundingBox(label="cup", x=100, y=150, width=120, height=90)
    assert box_sentence(box) == "Cup is at [100,150] with width=120 and height=90."
    tall = BoundingBox(label="red plate", x=10.4, y=19.6, width=30, height=40)
    assert box_sentence(tall) == "Red plate is at [10,20] with width=30 and height=40."


def test_predict_relative_cup_example(fixture_builder: FixtureBuilder):
    img = make_image(640, 480, "rel")
    fixture_builder.add_boxes(
        "rel", "cup", [{"x": 100, "y": 150, "width": 120, "height": 90, "confidence": 0.9}]
    )
    text = "Place your hand left from the cup."
    script = {text: {"x_expr": "100 - 60", "y_expr": "150 + 90/2"}}
    p = predictor(script, fixture_builder.backend())
    analysis = AnalysisResult("", ("cup",), PositionType.RELATIVE)
    point, clamped = p.predict_relative(img, analysis, Utterance(text))
    # hand check: 100-60 = 40, 150+45 = 195
    assert point == PixelPoint(u=40, v=195)
    assert not clamped


def test_predict_relative_sends_numeric_prompt(fixture_builder):
    img = make_image(640, 480, "relprompt")
    fixture_builder.add_boxes("relprompt", "cup", [{"x": 100, "y": 150, "width": 120, "height": 90}])
    captured = {}

    class Spy:
        def complete(self, request):
            captured.setdefault("texts", []).append(request.user_messages[-1][1])
            return '{"x_expr": "1", "y_expr": "2"}'

    p = Predictor(LLMGateway(Spy()), fixture_builder.backend())
    analysis = AnalysisResult("", ("cup",), PositionType.RELATIVE)
    p.predict_relative(img, analysis, Utterance("Place your hand left from the cup."))
    assert captured["texts"][-1] == (
        "Cup is at [100,150] with width=120 and height=90. Place your hand left from the cup."
    )


def test_predict_relative_between_two_boxes(fixture_builder):
    img = make_image(640, 480, "between")
    fixture_builder.add_boxes("between", "cup", [{"x": 180, "y": 280, "width": 40, "height": 40}])
    fixture_builder.add_boxes("between", "bowl", [{"x": 380, "y": 280, "width": 40, "height": 40}])
    text = "between the cup and the bowl"
    script = {text: {"x_expr": "(200+400)/2", "y_expr": "(300+300)/2"}}
    p = predictor(script, fixture_builder.backend())
    analysis = AnalysisResult("", ("cup", "bowl"), PositionType.RELATIVE)
    point, _ = p.predict_relative(img, analysis, Utterance(text))
    assert point == PixelPoint(u=300, v=300)


def test_predict_relative_clamps_and_flags(fixture_builder):
    img = make_image(64, 48, "clamp")
    fixture_builder.add_boxes("clamp", "cup", [{"x": 5, "y": 5, "width": 10, "height": 10}])
    script = {"*": {"x_expr": "5 - 30", "y_expr": "10"}}
    p = predictor(script, fixture_builder.backend())
    analysis = AnalysisResult("", ("cup",), PositionType.RELATIVE)
    point, clamped = p.predict_relative(img, analysis, Utterance("left of the cup"))
    assert point == PixelPoint(u=0, v=10)
    assert clamped


def test_predict_relative_missing_detection_names_object(fixture_builder):
    img = make_image(64, 48, "nodet")
    fixture_builder.add_boxes("nodet", "cup", [{"x": 1, "y": 1, "width": 2, "height": 2}])
    p = predictor({"*": {"x_expr": "1", "y_expr": "1"}}, fixture_builder.backend())
    analysis = AnalysisResult("", ("unicorn",), PositionType.RELATIVE)
    with pytest.raises(MissingDetectionError) as exc:
        p.predict_relative(img, analysis, Utterance("left of the unicorn"))
    assert "unicorn" in str(exc.value)


def test_round_and_clamp():
    point, clamped = round_and_clamp(-25.0, 10.0, 64, 48)
    assert (point.u, point.v, clamped) == (0, 10, True)
    point, clamped = round_and_clamp(63.4, 47.6, 64, 48)
    assert (point.u, point.v, clamped) == (63, 47, True)  # 47.6 rounds to 48, clamped
    point, clamped = round_and_clamp(10.2, 20.8, 64, 48)
    assert (point.u, point.v, clamped) == (10, 21, False)


def test_predict_dispatches_absolute(fixture_builder):
    img = make_image(32, 32, "dispatch_a")
    values = np.zeros((32, 32))
    values[7, 9] = 0.8
    fixture_builder.add_heatmap("dispatch_a", "book", values)
    counting = CountingVisionBackend(fixture_builder.backend())
    text = "place your hand on the book"
    script = {
        text: {"chain_of_thought": "", "objects": ["book"], "position_type": "Absolute"}
    }
    p = predictor(script, counting)
    outcome = p.predict(img, Utterance(text))
    assert outcome.point == PixelPoint(u=9, v=7)
    assert outcome.branch is PositionType.ABSOLUTE
    # absolute branch never calls detection
    assert counting.detect_calls == 0
    assert counting.segment_calls == 1


def test_predict_dispatches_relative(fixture_builder):
    img = make_image(64, 48, "dispatch_r")
    fixture_builder.add_boxes("dispatch_r", "box", [{"x": 30, "y": 20, "width": 10, "height": 10}])
    counting = CountingVisionBackend(fixture_builder.backend())
    text = "left from the box"
    script = {
        text: {
            "chain_of_thought": "",
            "objects": ["box"],
            "position_type": "Relative",
            "x_expr": "30 - 8",
            "y_expr": "20 + 10/2",
        }
    }
    p = predictor(script, counting)
    outcome = p.predict(img, Utterance(text))
    assert outcome.point == PixelPoint(u=22, v=25)
    assert outcome.branch is PositionType.RELATIVE
    # relative branch never calls segmentation
    assert counting.segment_calls == 0
    assert counting.detect_calls == 1


def test_predict_empty_object_list_fails_before_vision(fixture_builder):
    counting = CountingVisionBackend(fixture_builder.backend())
    script = {"*": {"chain_of_thought": "", "objects": [], "position_type": "Absolute"}}
    p = predictor(script, counting)
    with pytest.raises(StructuredOutputError):
        p.predict(make_image(8, 8, "noobj"), Utterance("do something"))
    assert counting.segment_calls == 0 and counting.detect_calls == 0


def test_relative_result_always_in_bounds(fixture_builder):
    img = make_image(100, 80, "bounds")
    fixture_builder.add_boxes("bounds", "cup", [{"x": 10, "y": 10, "width": 10, "height": 10}])
    rng = np.random.default_rng(13)
    analysis = AnalysisResult("", ("cup",), PositionType.RELATIVE)
    for _ in range(50):
        x = float(rng.uniform(-1e4, 1e4))
        y = float(rng.uniform(-1e4, 1e4))
        script = {"*": {"x_expr": f"{x:.3f}", "y_expr": f"{y:.3f}"}}
        p = predictor(script, fixture_builder.backend())
        point, clamped = p.predict_relative(img, analysis, Utterance("anywhere"))
        assert 0 <= point.u < 100 and 0 <= point.v < 80
        in_range = 0 <= round(x) <= 99 and 0 <= round(y) <= 79
        assert clamped == (not in_range)
