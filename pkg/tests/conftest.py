from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from contactground.vision import (
    FixtureVisionBackend,
    ImageRef,
    write_heatmap_png,
)


def make_image(width: int = 64, height: int = 48, image_id: str = "img") -> ImageRef:
    rng = np.random.default_rng(abs(hash(image_id)) % (2**31))
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return ImageRef(id=image_id, pixels=pixels)


def gaussian_map(width: int, height: int, cu: int, cv: int, sigma: float = 5.0) -> np.ndarray:
    us = np.arange(width)[None, :]
    vs = np.arange(height)[:, None]
    d2 = (us - cu) ** 2 + (vs - cv) ** 2
    return np.exp(-d2 / (2.0 * sigma**2))


class FixtureBuilder:
    """Writes sidecar directories in the layout FixtureVisionBackend reads."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def add_heatmap(self, image_id: str, query: str, values: np.ndarray) -> None:
        directory = self.root / image_id
        directory.mkdir(parents=True, exist_ok=True)
        index_path = directory / "heatmaps.json"
        index = json.loads(index_path.read_text()) if index_path.exists() else {}
        filename = f"heatmap_{len(index):03d}.png"
        write_heatmap_png(directory / filename, values)
        index[query] = filename
        index_path.write_text(json.dumps(index))

    def add_boxes(self, image_id: str, query: str, boxes: list[dict]) -> None:
        directory = self.root / image_id
        directory.mkdir(parents=True, exist_ok=True)
        boxes_path = directory / "boxes.json"
        table = json.loads(boxes_path.read_text()) if boxes_path.exists() else {}
        table.setdefault(query, []).extend(boxes)
        boxes_path.write_text(json.dumps(table))

    def backend(self) -> FixtureVisionBackend:
        return FixtureVisionBackend(self.root)


@pytest.fixture
def fixture_builder(tmp_path) -> FixtureBuilder:
    return FixtureBuilder(tmp_path / "vision_fixtures")


class CountingVisionBackend:
    """Wraps a backend and counts segmentation/detection calls."""

    def __init__(self, inner):
        self.inner = inner
        self.segment_calls = 0
        self.detect_calls = 0

    def segment_raw(self, image, query):
        self.segment_calls += 1
        return self.inner.segment_raw(image, query)

    def detect_raw(self, image, queries):
        self.detect_calls += 1
        return self.inner.detect_raw(image, queries)


class CollectingSink:
    """In-memory task sink recording every delivered payload."""

    def __init__(self):
        self.payloads: list[bytes] = []

    def deliver(self, payload: bytes) -> str:
        self.payloads.append(payload)
        return f"memory:{len(self.payloads) - 1}"


def dialogue_script(turns: list[tuple[str, dict]]) -> list[tuple[str, dict]]:
    """Scripted-backend entries for a dialogue, registered in reverse.

    Correction prompts embed earlier utterances as history text, so an
    earlier turn's matcher would shadow a later turn under first-match-wins.
    Registering the later turns first keeps each utterance bound to its own
    reply.
    """
    return [(text, reply) for text, reply in reversed(turns)]


def make_frame(image, extrinsics=None, cloud_points=None):
    from contactground.resolver import CameraExtrinsics, PointCloud
    from contactground.session import FrameBundle

    h, w = image.height, image.width
    if cloud_points is None:
        us = np.arange(w, dtype=np.float64)[None, :].repeat(h, axis=0)
        vs = np.arange(h, dtype=np.float64)[:, None].repeat(w, axis=1)
        cloud_points = np.stack([us * 0.01, vs * 0.01, np.full((h, w), 1.5)], axis=2)
    cloud = PointCloud(points=cloud_points, valid=np.ones((h, w), dtype=bool))
    if extrinsics is None:
        extrinsics = CameraExtrinsics(origin=np.zeros(3), rotation=np.eye(3))
    return FrameBundle(image=image, cloud=cloud, extrinsics=extrinsics)


def synthetic_dataset(
    root: Path,
    records: int = 10,
    width: int = 100,
    height: int = 80,
    mask_w: int = 40,
    mask_h: int = 26,
) -> Path:
    """Write a JSONL manifest of flat images with rectangular masks.

    Mask area fraction is exactly (mask_w*mask_h)/(width*height); offsets
    start at 1 so the origin pixel is never inside a mask. Categories
    alternate absolute/relative.
    """
    from PIL import Image

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(records):
        image_name = f"img_{i:03d}.png"
        mask_name = f"mask_{i:03d}.png"
        Image.new("RGB", (width, height), (120, 120, 120)).save(root / image_name)
        mask = np.zeros((height, width), dtype=np.uint8)
        ox = 1 + (i * 7) % (width - mask_w - 1)
        oy = 1 + (i * 5) % (height - mask_h - 1)
        mask[oy : oy + mask_h, ox : ox + mask_w] = 255
        Image.fromarray(mask).save(root / mask_name)
        lines.append(
            json.dumps(
                {
                    "image": image_name,
                    "mask": mask_name,
                    "prompt": f"place a contact in region {i}",
                    "category": "absolute" if i % 2 == 0 else "relative",
                }
            )
        )
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def build_orchestrator(script, vision_backend, sink=None, **resolver_kw):
    from contactground.correction import Corrector
    from contactground.intent import IntentRouter
    from contactground.llm import LLMGateway, register_scripted_backend
    from contactground.prediction import Predictor
    from contactground.resolver import ContactResolver
    from contactground.session import Orchestrator

    gateway = LLMGateway(register_scripted_backend(script))
    return Orchestrator(
        router=IntentRouter(gateway),
        predictor=Predictor(gateway, vision_backend),
        corrector=Corrector(gateway, vision_backend),
        resolver=ContactResolver(gateway, **resolver_kw),
        sink=sink if sink is not None else CollectingSink(),
    )
