"""Language-grounded segmentation (text -> heatmap) and open-set detection
(text -> bounding boxes) behind one backend interface.

The file-fixture backend makes the whole pipeline runnable offline: each
image id owns a sidecar directory holding heatmaps as 16-bit grayscale PNGs
(value/65535 -> activation, keyed through heatmaps.json) and detections in
boxes.json keyed by the exact query string. The remote backend talks to
model servers over HTTP.
"""
from __future__ import annotations

import base64
import io
import json
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np
from PIL import Image

from .errors import DegenerateHeatmapError, VisionBackendError, VisionUnavailableError

__all__ = [
    "ImageRef",
    "Heatmap",
    "BoundingBox",
    "VisionBackend",
    "FixtureVisionBackend",
    "RemoteVisionBackend",
    "SplitVisionBackend",
    "segment",
    "detect",
    "best_box",
    "read_heatmap_png",
    "write_heatmap_png",
]


@dataclass(frozen=True)
class ImageRef:
    """An RGB raster plus the id under which backends know it."""

    id: str
    pixels: np.ndarray  # H x W x 3, uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected HxWx3 raster, got shape {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_png_bytes(cls, data: bytes, image_id: str | None = None) -> "ImageRef":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        return cls(id=image_id or uuid.uuid4().hex, pixels=np.asarray(img))

    @classmethod
    def from_file(cls, path: str | Path, image_id: str | None = None) -> "ImageRef":
        path = Path(path)
        return cls.from_png_bytes(path.read_bytes(), image_id or path.stem)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels).save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class Heatmap:
    """Per-pixel activations in [0,1], same size as the source image."""

    values: np.ndarray  # H x W, float64

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"expected 2-D activation map, got shape {vals.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("activations must lie in [0,1]")
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BoundingBox:
    label: str
    x: float
    y: float
    width: float
    height: float
    confidence: float = 1.0

    def center(self) -> tuple[float, float]:
        return (self.x + self.width / 2.0, self.y + self.height / 2.0)

    def clipped(self, image_width: int, image_height: int) -> "BoundingBox | None":
        """Clip to image bounds; None when nothing of the box remains."""
        x0 = min(max(self.x, 0.0), float(image_width))
        y0 = min(max(self.y, 0.0), float(image_height))
        x1 = min(max(self.x + self.width, 0.0), float(image_width))
        y1 = min(max(self.y + self.height, 0.0), float(image_height))
        if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
            return None
        return BoundingBox(
            label=self.label,
            x=x0,
            y=y0,
            width=x1 - x0,
            height=y1 - y0,
            confidence=min(max(self.confidence, 0.0), 1.0),
        )


class VisionBackend(Protocol):
    def segment_raw(self, image: ImageRef, query: str) -> np.ndarray:
        """Raw activation map (any size, values already in [0,1])."""
        ...

    def detect_raw(self, image: ImageRef, queries: Sequence[str]) -> list[BoundingBox]:
        """Unclipped candidate boxes labeled with their query text."""
        ...


def segment(backend: VisionBackend, image: ImageRef, query: str) -> Heatmap:
    """Segment and post-process: upscale to image size, keep values in [0,1].

    Raises DegenerateHeatmapError when the map has no activation at all so
    callers can distinguish "model saw nothing" from transport failures.
    """
    raw = np.asarray(backend.segment_raw(image, query), dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise VisionBackendError(f"segmentation returned shape {raw.shape}")
    if raw.shape != (image.height, image.width):
        resized = Image.fromarray(raw.astype(np.float32), mode="F").resize(
            (image.width, image.height), Image.BILINEAR
        )
        raw = np.asarray(resized, dtype=np.float64)
    raw = np.clip(raw, 0.0, 1.0)
    if float(raw.max(initial=0.0)) <= 0.0:
        raise DegenerateHeatmapError(f"query {query!r} produced an all-zero map")
    return Heatmap(values=raw)


def detect(backend: VisionBackend, image: ImageRef, queries: Sequence[str]) -> list[BoundingBox]:
    """Detect objects for each query.

    Results are grouped per query in query order, highest confidence first
    within a group, and every box is clipped to image bounds. A query with
    no detections simply contributes nothing.
    """
    if not queries:
        raise ValueError("queries must be non-empty")
    raw = backend.detect_raw(image, list(queries))
    by_query: dict[str, list[BoundingBox]] = {q: [] for q in queries}
    for box in raw:
        clipped = box.clipped(image.width, image.height)
        if clipped is not None and clipped.label in by_query:
            by_query[clipped.label].append(clipped)
    out: list[BoundingBox] = []
    for q in queries:
        out.extend(sorted(by_query[q], key=lambda b: -b.confidence))
    return out


def best_box(boxes: Sequence[BoundingBox], query: str) -> BoundingBox | None:
    """Highest-confidence box for a query, honoring detect()'s ordering."""
    for box in boxes:
        if box.label == query:
            return box
    return None


def write_heatmap_png(path: str | Path, values: np.ndarray) -> None:
    """Store activations in [0,1] as a 16-bit grayscale PNG."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise ValueError("activations must lie in [0,1]")
    encoded = np.round(arr * 65535.0).astype(np.uint16)
    Image.fromarray(encoded).save(Path(path), format="PNG")


def read_heatmap_png(path: str | Path) -> np.ndarray:
    try:
        return read_heatmap_png_bytes(Path(path).read_bytes())
    except VisionBackendError as exc:
        raise VisionBackendError(f"{exc} (file {path})") from None


class FixtureVisionBackend:
    """Sidecar-directory fixture store.

    Layout per image id:
        <root>/<image_id>/heatmaps.json   {query: png filename}
        <root>/<image_id>/<name>.png      16-bit grayscale activation
        <root>/<image_id>/boxes.json      {query: [{x,y,width,height,confidence}]}
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _image_dir(self, image: ImageRef) -> Path:
        directory = self.root / image.id
        if not directory.is_dir():
            raise VisionBackendError(f"image {image.id!r} has no fixture directory")
        return directory

    def segment_raw(self, image: ImageRef, query: str) -> np.ndarray:
        directory = self._image_dir(image)
        index_path = directory / "heatmaps.json"
        if not index_path.is_file():
            raise VisionBackendError(f"image {image.id!r} has no heatmap fixtures")
        index = json.loads(index_path.read_text())
        if query not in index:
            raise VisionBackendError(f"no heatmap fixture for query {query!r} on image {image.id!r}")
        return read_heatmap_png(directory / index[query])

    def detect_raw(self, image: ImageRef, queries: Sequence[str]) -> list[BoundingBox]:
        directory = self._image_dir(image)
        boxes_path = directory / "boxes.json"
        if not boxes_path.is_file():
            return []
        table = json.loads(boxes_path.read_text())
        out: list[BoundingBox] = []
        for query in queries:
            for rec in table.get(query, []):
                out.append(
                    BoundingBox(
                        label=query,
                        x=float(rec["x"]),
                        y=float(rec["y"]),
                        width=float(rec["width"]),
                        height=float(rec["height"]),
                        confidence=float(rec.get("confidence", 1.0)),
                    )
                )
        return out


class RemoteVisionBackend:
    """HTTP backend. Segmentation: POST {image: b64 PNG, query} -> PNG body.
    Detection: POST {image: b64 PNG, queries: [..]} -> JSON box list."""

    def __init__(
        self,
        segment_url: str,
        detect_url: str,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.segment_url = segment_url
        self.detect_url = detect_url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _image_payload(self, image: ImageRef) -> str:
        return base64.b64encode(image.to_png_bytes()).decode("ascii")

    def segment_raw(self, image: ImageRef, query: str) -> np.ndarray:
        try:
            response = self._client.post(
                self.segment_url,
                json={"image": self._image_payload(image), "query": query},
            )
            response.raise_for_status()
            return read_heatmap_png_bytes(response.content)
        except httpx.HTTPError as exc:
            raise VisionUnavailableError(f"segmentation backend failed: {exc}") from exc

    def detect_raw(self, image: ImageRef, queries: Sequence[str]) -> list[BoundingBox]:
        try:
            response = self._client.post(
                self.detect_url,
                json={"image": self._image_payload(image), "queries": list(queries)},
            )
            response.raise_for_status()
            records = response.json()
        except httpx.HTTPError as exc:
            raise VisionUnavailableError(f"detection backend failed: {exc}") from exc
        try:
            return [
                BoundingBox(
                    label=str(rec["label"]),
                    x=float(rec["x"]),
                    y=float(rec["y"]),
                    width=float(rec["width"]),
                    height=float(rec["height"]),
                    confidence=float(rec.get("confidence", 1.0)),
                )
                for rec in records
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise VisionBackendError(f"malformed detection response: {exc}") from exc


class SplitVisionBackend:
    """Route segmentation and detection to two different backends.

    Model combinations routinely pair one segmenter with an unrelated
    detector, and they rarely live behind the same endpoint.
    """

    def __init__(self, segmenter: VisionBackend, detector: VisionBackend):
        self.segmenter = segmenter
        self.detector = detector

    def segment_raw(self, image: ImageRef, query: str) -> np.ndarray:
        return self.segmenter.segment_raw(image, query)

    def detect_raw(self, image: ImageRef, queries: Sequence[str]) -> list[BoundingBox]:
        return self.detector.detect_raw(image, queries)


def read_heatmap_png_bytes(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    arr = np.asarray(img, dtype=np.float64)
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        return arr / 65535.0
    if img.mode == "L":
        return arr / 255.0
    raise VisionBackendError(f"unsupported heatmap PNG mode {img.mode!r}")
