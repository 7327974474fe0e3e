"""Generate a self-contained offline demo workspace.

Produces a synthetic tabletop scene, vision fixtures for it, a matching
point cloud and extrinsics, a scripted chat backend covering a short
dialogue, and a config file the service can run directly. Everything works
without any model backend.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .resolver import CameraExtrinsics, PointCloud, dump_point_cloud
from .vision import write_heatmap_png

__all__ = ["make_demo", "DEMO_DIALOGUE"]

WIDTH, HEIGHT = 640, 480
IMAGE_ID = "scene"

# (utterance, scripted reply) in dialogue order; the script file stores them
# reversed so follow-up turns are matched before the history they quote.
DEMO_DIALOGUE: list[tuple[str, dict]] = [
    (
        "Put your right hand on the book",
        {
            "category": "Prediction",
            "chain_of_thought": "The contact is on the book itself.",
            "objects": ["book"],
            "position_type": "Absolute",
            "end_effector": "RightHand",
            "task_type": "SupportContact",
        },
    ),
    (
        "Place your hand left from the cup",
        {
            "category": "Prediction",
            "chain_of_thought": "The contact is beside the cup.",
            "objects": ["cup"],
            "position_type": "Relative",
            "x_expr": "120 - 40",
            "y_expr": "280 + 80/2",
            "end_effector": "RightHand",
            "task_type": "SupportContact",
        },
    ),
    (
        "Move a bit to the right",
        {"category": "Correction", "objects": [], "x_expr": "460 + 40", "y_expr": "350"},
    ),
    (
        "move it closer to the cup",
        {
            "category": "Correction",
            "objects": ["cup"],
            "x_expr": "(500 + 160) / 2",
            "y_expr": "(350 + 320) / 2",
        },
    ),
    ("looks good, go ahead", {"category": "Confirmation"}),
]


def _draw_scene() -> Image.Image:
    img = Image.new("RGB", (WIDTH, HEIGHT), (235, 235, 228))
    draw = ImageDraw.Draw(img)
    draw.rectangle([0, 240, WIDTH, HEIGHT], fill=(186, 140, 99))  # table
    draw.rectangle([360, 300, 560, 400], fill=(178, 34, 34))  # book
    draw.rectangle([370, 310, 550, 318], fill=(215, 205, 180))  # page edge
    draw.ellipse([120, 280, 200, 360], fill=(70, 90, 160))  # cup
    draw.ellipse([138, 290, 182, 310], fill=(40, 55, 110))  # cup opening
    return img


def make_demo(outdir: str | Path) -> Path:
    """Write the demo workspace; returns the path of the generated config."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    scene = _draw_scene()
    scene.save(outdir / "scene.png")

    fixture_dir = outdir / "fixtures" / IMAGE_ID
    fixture_dir.mkdir(parents=True, exist_ok=True)

    us = np.arange(WIDTH)[None, :]
    vs = np.arange(HEIGHT)[:, None]
    book_center = (460, 350)
    heat = np.exp(-(((us - book_center[0]) ** 2 + (vs - book_center[1]) ** 2) / (2 * 35.0**2)))
    write_heatmap_png(fixture_dir / "book.png", heat)
    (fixture_dir / "heatmaps.json").write_text(json.dumps({"book": "book.png"}, indent=2))
    boxes = {
        "cup": [{"x": 120, "y": 280, "width": 80, "height": 80, "confidence": 0.95}],
        "book": [{"x": 360, "y": 300, "width": 200, "height": 100, "confidence": 0.9}],
    }
    (fixture_dir / "boxes.json").write_text(json.dumps(boxes, indent=2))

    # fronto-parallel plane 1.5 m away, 2 mm per pixel
    points = np.stack(
        [
            (us.repeat(HEIGHT, axis=0) - WIDTH / 2) * 0.002,
            (vs.repeat(WIDTH, axis=1) - HEIGHT / 2) * 0.002,
            np.full((HEIGHT, WIDTH), 1.5),
        ],
        axis=2,
    )
    cloud = PointCloud(points=points, valid=np.ones((HEIGHT, WIDTH), dtype=bool))
    (outdir / "cloud.bin").write_bytes(dump_point_cloud(cloud))

    extrinsics = CameraExtrinsics(origin=np.array([0.2, 0.0, 0.4]), rotation=np.eye(3))
    (outdir / "extrinsics.json").write_text(json.dumps(extrinsics.to_json(), indent=2))

    script = [[text, reply] for text, reply in reversed(DEMO_DIALOGUE)]
    (outdir / "llm_script.json").write_text(json.dumps(script, indent=2))

    config = {
        "host": "127.0.0.1",
        "port": 8000,
        "llm": {"kind": "scripted", "script": str(outdir / "llm_script.json")},
        "vision": {"kind": "fixture", "root": str(outdir / "fixtures")},
        "sink": {"kind": "file", "path": str(outdir / "tasks")},
        "trajectory_duration": 4.0,
    }
    config_path = outdir / "config.yaml"
    config_path.write_text(json.dumps(config, indent=2))
    return config_path
