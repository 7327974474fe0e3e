"""Benchmark harness: image/prompt/mask datasets, mask-containment scoring,
and success-rate aggregation across repeated runs.

A prediction succeeds when its pixel lands inside the record's annotated
acceptable-area mask. Per-run success rates are aggregated per category
(absolute, relative, overall) as median and quartiles; a uniform random
point sampler provides the baseline.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from PIL import Image

from .errors import BackendUnavailableError, ContactGroundError, DatasetError
from .intent import Utterance
from .prediction import PixelPoint, Predictor
from .vision import ImageRef

__all__ = [
    "DatasetRecord",
    "CategoryStats",
    "BenchmarkReport",
    "PredictionPipeline",
    "PredictorPipeline",
    "load_dataset",
    "score_prediction",
    "evaluate_combination",
    "random_baseline",
    "render_report_table",
]

CATEGORIES = ("absolute", "relative")


@dataclass(frozen=True)
class DatasetRecord:
    image_path: Path
    mask_path: Path
    prompt: str
    category: str  # "absolute" | "relative"
    image: ImageRef
    mask: np.ndarray  # H x W bool

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise DatasetError(f"unknown category {self.category!r} for {self.image_path}")
        if self.mask.shape != (self.image.height, self.image.width):
            raise DatasetError(
                f"mask {self.mask_path} is {self.mask.shape[1]}x{self.mask.shape[0]}, "
                f"image is {self.image.width}x{self.image.height}"
            )
        if not self.mask.any():
            raise DatasetError(f"mask {self.mask_path} has no positive pixels")


def _load_mask(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("L"))
    return arr > 0


def load_dataset(manifest_path: str | Path) -> list[DatasetRecord]:
    """Load a JSON-Lines manifest: one {image, mask, prompt, category} per line,
    paths relative to the manifest file."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    records: list[DatasetRecord] = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            image_path = base / entry["image"]
            mask_path = base / entry["mask"]
            prompt = entry["prompt"]
            category = str(entry["category"]).lower()
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{manifest_path}:{lineno}: bad record: {exc}") from exc
        if not image_path.is_file():
            raise DatasetError(f"{manifest_path}:{lineno}: missing image {image_path}")
        if not mask_path.is_file():
            raise DatasetError(f"{manifest_path}:{lineno}: missing mask {mask_path}")
        records.append(
            DatasetRecord(
                image_path=image_path,
                mask_path=mask_path,
                prompt=prompt,
                category=category,
                image=ImageRef.from_file(image_path),
                mask=_load_mask(mask_path),
            )
        )
    return records


def category_counts(records: Sequence[DatasetRecord]) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for record in records:
        counts[record.category] += 1
    return counts


def score_prediction(record: DatasetRecord, point: PixelPoint) -> bool:
    """Success iff the mask is positive at the predicted pixel."""
    return bool(record.mask[point.v, point.u])


class PredictionPipeline(Protocol):
    def predict_pixel(self, image: ImageRef, prompt: str) -> PixelPoint:
        ...


class PredictorPipeline:
    """Adapts the grounded predictor to the harness interface."""

    def __init__(self, predictor: Predictor):
        self.predictor = predictor

    def predict_pixel(self, image: ImageRef, prompt: str) -> PixelPoint:
        return self.predictor.predict(image, Utterance(prompt)).point


@dataclass(frozen=True)
class CategoryStats:
    median: float
    q25: float
    q75: float

    def __post_init__(self):
        for value in (self.median, self.q25, self.q75):
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"success rates must lie in [0,1], got {value}")


def _stats(rates: Sequence[float]) -> CategoryStats:
    q25, median, q75 = np.percentile(np.asarray(rates, dtype=np.float64), [25, 50, 75])
    return CategoryStats(median=float(median), q25=float(q25), q75=float(q75))


@dataclass(frozen=True)
class BenchmarkReport:
    combination: str
    runs: int
    record_count: int
    counts: dict[str, int]
    per_category: dict[str, CategoryStats]  # keys: absolute, relative, overall
    per_run_rates: dict[str, list[float]] = field(default_factory=dict)
    partial: bool = False

    def to_json(self) -> dict:
        return {
            "combination": self.combination,
            "runs": self.runs,
            "record_count": self.record_count,
            "counts": dict(self.counts),
            "per_category": {
                name: {"median": s.median, "q25": s.q25, "q75": s.q75}
                for name, s in self.per_category.items()
            },
            "per_run_rates": {k: list(v) for k, v in self.per_run_rates.items()},
            "partial": self.partial,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BenchmarkReport":
        return cls(
            combination=data["combination"],
            runs=int(data["runs"]),
            record_count=int(data["record_count"]),
            counts={k: int(v) for k, v in data["counts"].items()},
            per_category={
                name: CategoryStats(median=s["median"], q25=s["q25"], q75=s["q75"])
                for name, s in data["per_category"].items()
            },
            per_run_rates={k: [float(x) for x in v] for k, v in data.get("per_run_rates", {}).items()},
            partial=bool(data.get("partial", False)),
        )


def _aggregate(
    combination: str,
    records: Sequence[DatasetRecord],
    run_successes: list[list[bool]],
    partial: bool,
) -> BenchmarkReport:
    counts = category_counts(records)
    rates: dict[str, list[float]] = {"overall": []}
    for name in CATEGORIES:
        if counts[name]:
            rates[name] = []
    for successes in run_successes:
        total = 0
        hits = 0
        per_cat = {name: [0, 0] for name in CATEGORIES}
        for record, success in zip(records, successes):
            total += 1
            hits += success
            per_cat[record.category][0] += success
            per_cat[record.category][1] += 1
        rates["overall"].append(hits / total)
        for name in CATEGORIES:
            got, n = per_cat[name]
            if n:
                rates[name].append(got / n)
    per_category = {name: _stats(values) for name, values in rates.items()}
    return BenchmarkReport(
        combination=combination,
        runs=len(run_successes),
        record_count=len(records),
        counts=counts,
        per_category=per_category,
        per_run_rates=rates,
        partial=partial,
    )


def evaluate_combination(
    pipeline: PredictionPipeline,
    records: Sequence[DatasetRecord],
    runs: int = 5,
    seed: int = 0,
    combination: str = "pipeline",
) -> BenchmarkReport:
    """Run every record through the pipeline `runs` times and aggregate.

    Per-record pipeline errors count as failures so denominators stay
    comparable across combinations; an unreachable backend aborts and flags
    the report as partial. The seed is recorded for reproducibility; the
    pipeline itself decides whether it is stochastic.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not records:
        raise DatasetError("no records to evaluate")
    run_successes: list[list[bool]] = []
    partial = False
    for _ in range(runs):
        successes: list[bool] = []
        try:
            for record in records:
                try:
                    point = pipeline.predict_pixel(record.image, record.prompt)
                except BackendUnavailableError:
                    raise
                except ContactGroundError:
                    successes.append(False)
                    continue
                successes.append(score_prediction(record, point))
        except BackendUnavailableError:
            partial = True
            break
        run_successes.append(successes)
    if not run_successes:
        raise BackendUnavailableError(
            f"backend unavailable before any complete run of {combination!r}"
        )
    return _aggregate(combination, records, run_successes, partial)


def random_baseline(
    records: Sequence[DatasetRecord],
    runs: int = 5,
    seed: int = 0,
    combination: str = "random point sampling",
) -> BenchmarkReport:
    """Uniform pixel sampling per record per run, same aggregation."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not records:
        raise DatasetError("no records to evaluate")
    rng = np.random.default_rng(seed)
    run_successes = []
    for _ in range(runs):
        successes = []
        for record in records:
            u = int(rng.integers(0, record.image.width))
            v = int(rng.integers(0, record.image.height))
            successes.append(score_prediction(record, PixelPoint(u=u, v=v)))
        run_successes.append(successes)
    return _aggregate(combination, records, run_successes, partial=False)


def render_report_table(reports: Sequence[BenchmarkReport]) -> str:
    """Human-readable success-rate table, one row per combination."""

    def cell(report: BenchmarkReport, name: str) -> str:
        stats = report.per_category.get(name)
        if stats is None:
            return "-"
        return f"{stats.median:.2f} [{stats.q25:.2f}, {stats.q75:.2f}]"

    headers = ["combination", "absolute", "relative", "overall", "runs", "records"]
    rows = [
        [
            report.combination + (" (partial)" if report.partial else ""),
            cell(report, "absolute"),
            cell(report, "relative"),
            cell(report, "overall"),
            str(report.runs),
            str(report.record_count),
        ]
        for report in reports
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)
