from __future__ import annotations

import json

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given, settings, strategies as st

from contactground.bench import (
    BenchmarkReport,
    category_counts,
    evaluate_combination,
    load_dataset,
    random_baseline,
    render_report_table,
    score_prediction,
)
from contactground.cli import main as cli_main
from contactground.config import load_config, build_orchestrator as build_from_config
from contactground.errors import BackendUnavailableError, DatasetError, DegenerateHeatmapError
from contactground.prediction import PixelPoint

from conftest import synthetic_dataset
from oracles import percentile_sorted


class FixedPipeline:
    """Always predicts the same pixel."""

    def __init__(self, u, v):
        self.point = PixelPoint(u=u, v=v)

    def predict_pixel(self, image, prompt):
        return self.point


class MaskCenterPipeline:
    """Cheats by reading each record's mask; always lands inside."""

    def __init__(self, records):
        self.centers = {
            record.prompt: tuple(int(c[0]) for c in np.nonzero(record.mask))
            for record in records
        }

    def predict_pixel(self, image, prompt):
        v, u = self.centers[prompt]
        return PixelPoint(u=u, v=v)


def test_load_dataset_counts(tmp_path):
    manifest = synthetic_dataset(tmp_path / "data", records=4)
    records = load_dataset(manifest)
    assert len(records) == 4
    assert category_counts(records) == {"absolute": 2, "relative": 2}


def test_load_dataset_missing_manifest(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nope.jsonl")


def test_load_dataset_dimension_mismatch_names_record(tmp_path):
    from PIL import Image

    root = tmp_path / "data"
    manifest = synthetic_dataset(root, records=2)
    Image.new("L", (10, 10), 255).save(root / "mask_001.png")  # wrong size
    with pytest.raises(DatasetError) as exc:
        load_dataset(manifest)
    assert "mask_001" in str(exc.value)


def test_load_dataset_empty_mask_rejected(tmp_path):
    from PIL import Image

    root = tmp_path / "data"
    manifest = synthetic_dataset(root, records=2)
    Image.new("L", (100, 80), 0).save(root / "mask_000.png")
    with pytest.raises(DatasetError) as exc:
        load_dataset(manifest)
    assert "no positive pixels" in str(exc.value)


def test_load_dataset_bad_category(tmp_path):
    root = tmp_path / "data"
    manifest = synthetic_dataset(root, records=1)
    entry = json.loads(manifest.read_text().splitlines()[0])
    entry["category"] = "sideways"
    manifest.write_text(json.dumps(entry) + "\n")
    with pytest.raises(DatasetError):
        load_dataset(manifest)


def test_score_prediction(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=1))
    record = records[0]
    vs, us = np.nonzero(record.mask)
    inside = PixelPoint(u=int(us[0]), v=int(vs[0]))
    assert score_prediction(record, inside)
    assert not score_prediction(record, PixelPoint(u=0, v=0))
    # one pixel left of the mask's left edge fails
    left_edge = PixelPoint(u=int(us.min()) - 1, v=int(vs[0]))
    assert not score_prediction(record, left_edge)
    # degenerate full-image mask always succeeds
    full = type(record)(
        image_path=record.image_path,
        mask_path=record.mask_path,
        prompt=record.prompt,
        category=record.category,
        image=record.image,
        mask=np.ones_like(record.mask),
    )
    assert score_prediction(full, PixelPoint(u=0, v=0))


def test_evaluate_combination_always_inside(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=6))
    report = evaluate_combination(MaskCenterPipeline(records), records, runs=3, seed=1)
    for name in ("absolute", "relative", "overall"):
        assert report.per_category[name].median == 1.0
    assert report.runs == 3
    assert report.record_count == 6
    assert report.counts["absolute"] + report.counts["relative"] == 6


def test_evaluate_combination_always_origin(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=6))
    report = evaluate_combination(FixedPipeline(0, 0), records, runs=2, seed=1)
    assert report.per_category["overall"].median == 0.0


def test_pipeline_errors_count_as_failures(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=4))

    class FlakyPipeline(MaskCenterPipeline):
        def predict_pixel(self, image, prompt):
            if prompt.endswith("0"):
                raise DegenerateHeatmapError("nothing segmented")
            return super().predict_pixel(image, prompt)

    report = evaluate_combination(FlakyPipeline(records), records, runs=1, seed=0)
    assert report.per_run_rates["overall"] == [0.75]


def test_backend_unavailable_aborts_with_partial_report(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=4))

    class DyingPipeline(MaskCenterPipeline):
        def __init__(self, records):
            super().__init__(records)
            self.calls = 0

        def predict_pixel(self, image, prompt):
            self.calls += 1
            if self.calls > 6:  # dies during the second run
                raise BackendUnavailableError("backend gone")
            return super().predict_pixel(image, prompt)

    report = evaluate_combination(DyingPipeline(records), records, runs=3, seed=0)
    assert report.partial
    assert report.runs == 1

    class DeadPipeline:
        def predict_pixel(self, image, prompt):
            raise BackendUnavailableError("never up")

    with pytest.raises(BackendUnavailableError):
        evaluate_combination(DeadPipeline(), records, runs=2, seed=0)


def test_random_baseline_full_mask_is_always_success(tmp_path):
    manifest = synthetic_dataset(tmp_path / "data", records=3, mask_w=98, mask_h=78)
    records = load_dataset(manifest)
    for record in records:
        record.mask[:] = True
    report = random_baseline(records, runs=4, seed=9)
    assert report.per_category["overall"].median == 1.0


def test_random_baseline_matches_area_fraction(tmp_path):
    # masks cover exactly 13% of each image; 50 records x 20 runs = 1000 samples
    manifest = synthetic_dataset(tmp_path / "data", records=50)
    records = load_dataset(manifest)
    report = random_baseline(records, runs=20, seed=123)
    pooled = float(np.mean([r for rates in [report.per_run_rates["overall"]] for r in rates]))
    assert abs(pooled - 0.13) <= 0.02
    assert abs(report.per_category["overall"].median - 0.13) <= 0.02


def test_random_baseline_deterministic_under_seed(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=5))
    a = random_baseline(records, runs=3, seed=42)
    b = random_baseline(records, runs=3, seed=42)
    assert a == b
    c = random_baseline(records, runs=3, seed=43)
    assert a.per_run_rates != c.per_run_rates


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_quartiles_match_sort_based_oracle(rates):
    stats = __import__("contactground.bench", fromlist=["_stats"])._stats(rates)
    assert stats.q25 == pytest.approx(percentile_sorted(rates, 25), abs=1e-12)
    assert stats.median == pytest.approx(percentile_sorted(rates, 50), abs=1e-12)
    assert stats.q75 == pytest.approx(percentile_sorted(rates, 75), abs=1e-12)


def test_report_json_round_trip(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=4))
    report = random_baseline(records, runs=2, seed=7)
    again = BenchmarkReport.from_json(json.loads(json.dumps(report.to_json())))
    assert again == report


def test_render_report_table(tmp_path):
    records = load_dataset(synthetic_dataset(tmp_path / "data", records=4))
    report = random_baseline(records, runs=2, seed=7)
    table = render_report_table([report])
    assert "combination" in table and "overall" in table
    assert "random point sampling" in table


def test_cli_bench_random_and_report(tmp_path):
    manifest = synthetic_dataset(tmp_path / "data", records=6)
    out = tmp_path / "report.json"
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        ["bench", "random", "--manifest", str(manifest), "--runs", "3", "--seed", "1",
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert out.exists()
    result = runner.invoke(cli_main, ["bench", "report", "--in", str(out)])
    assert result.exit_code == 0, result.output
    assert "random point sampling" in result.output


def test_cli_bench_run_with_scripted_pipeline(tmp_path, fixture_builder):
    root = tmp_path / "data"
    manifest = synthetic_dataset(root, records=2)
    records = load_dataset(manifest)
    # fixture heatmaps centered inside each record's mask
    for record in records:
        vs, us = np.nonzero(record.mask)
        values = np.zeros((record.image.height, record.image.width))
        values[int(vs[0]), int(us[0])] = 1.0
        fixture_builder.add_heatmap(record.image_path.stem, record.prompt.split()[-1], values)
    # dataset image ids come from file stems; rewrite fixture ids to match
    script = {
        record.prompt: {
            "objects": [record.prompt.split()[-1]],
            "position_type": "Absolute",
            "chain_of_thought": "",
        }
        for record in records
    }
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    out = tmp_path / "run_report.json"
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "bench", "run",
            "--manifest", str(manifest),
            "--llm", f"scripted:{script_path}",
            "--seg", f"fixture:{fixture_builder.root}",
            "--det", f"fixture:{fixture_builder.root}",
            "--runs", "2", "--seed", "0",
            "--label", "scripted offline",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    report = BenchmarkReport.from_json(json.loads(out.read_text()))
    assert report.combination == "scripted offline"
    assert report.per_category["overall"].median == 1.0


def test_cli_make_fixtures_builds_runnable_demo(tmp_path):
    runner = CliRunner()
    result = runner.invoke(cli_main, ["make-fixtures", str(tmp_path / "demo")])
    assert result.exit_code == 0, result.output
    config = load_config(tmp_path / "demo" / "config.yaml", env={})
    orchestrator = build_from_config(config, env={})
    assert orchestrator is not None
    assert (tmp_path / "demo" / "scene.png").exists()
    assert (tmp_path / "demo" / "cloud.bin").exists()
