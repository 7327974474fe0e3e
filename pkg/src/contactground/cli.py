"""Command-line entry points: the service and the benchmark harness."""
from __future__ import annotations

import json
import os
from pathlib import Path

import click

from . import service
from .bench import (
    BenchmarkReport,
    PredictorPipeline,
    category_counts,
    evaluate_combination,
    load_dataset,
    random_baseline,
    render_report_table,
)
from .config import load_config
from .demo import DEMO_DIALOGUE, make_demo
from .llm import LLMGateway, OpenAICompatBackend, ScriptedBackend
from .prediction import Predictor
from .vision import FixtureVisionBackend, RemoteVisionBackend, SplitVisionBackend


@click.group()
def main():
    """Language-guided contact placement tools."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML/JSON config file; CONTACTGROUND_* env vars override it.")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--static-dir", default=None, help="Operator-console assets to serve at /.")
def serve(config_path, host, port, static_dir):
    """Run the HTTP session service."""
    config = load_config(config_path)
    if host is not None:
        config.host = host
    if port is not None:
        config.port = port
    if static_dir is not None:
        config.static_dir = static_dir
    service.serve(config)


@main.command("make-fixtures")
@click.argument("outdir", type=click.Path())
def make_fixtures(outdir):
    """Generate an offline demo workspace (scene, fixtures, script, config)."""
    config_path = make_demo(Path(outdir))
    click.echo(f"demo written under {outdir}")
    click.echo(f"run the service with:  contactground serve --config {config_path}")
    click.echo("then create a session from scene.png / cloud.bin / extrinsics.json")
    click.echo(f"(use image id 'scene'); scripted utterances: "
               f"{', '.join(repr(t) for t, _ in DEMO_DIALOGUE)}")


def _parse_spec(option: str, spec: str) -> tuple[str, str]:
    kind, sep, value = spec.partition(":")
    if not sep or not value:
        raise click.BadParameter(f"{option} must look like kind:value, got {spec!r}")
    return kind, value


def _gateway_from_spec(spec: str, model: str | None) -> LLMGateway:
    kind, value = _parse_spec("--llm", spec)
    if kind == "scripted":
        try:
            script = json.loads(Path(value).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise click.BadParameter(f"cannot load scripted replies from {value}: {exc}")
        if isinstance(script, list):
            script = [(m, r) for m, r in script]
        return LLMGateway(ScriptedBackend(script))
    if kind == "openai":
        if not model:
            raise click.BadParameter("--llm openai:URL needs --model")
        api_key = os.environ.get("CONTACTGROUND_API_KEY", "")
        return LLMGateway(OpenAICompatBackend(value, model, api_key=api_key))
    raise click.BadParameter(f"unknown LLM backend kind {kind!r}")


def _vision_half(option: str, spec: str):
    kind, value = _parse_spec(option, spec)
    if kind == "fixture":
        return kind, value, FixtureVisionBackend(value)
    if kind == "remote":
        return kind, value, RemoteVisionBackend(value, value)
    raise click.BadParameter(f"unknown vision backend kind {kind!r}")


def _vision_from_specs(seg_spec: str, det_spec: str):
    seg_kind, seg_value, seg_backend = _vision_half("--seg", seg_spec)
    det_kind, det_value, det_backend = _vision_half("--det", det_spec)
    if seg_kind == det_kind == "fixture" and seg_value == det_value:
        return seg_backend
    if seg_kind == det_kind == "remote":
        return RemoteVisionBackend(seg_value, det_value)
    return SplitVisionBackend(segmenter=seg_backend, detector=det_backend)


def _write_report(report: BenchmarkReport, out_path: str | None) -> None:
    click.echo(render_report_table([report]))
    if out_path:
        Path(out_path).write_text(json.dumps(report.to_json(), indent=2))
        click.echo(f"report written to {out_path}")


@main.group()
def bench():
    """Dataset evaluation: success rates per model combination."""


@bench.command("run")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--llm", "llm_spec", required=True, help="scripted:FILE or openai:URL")
@click.option("--model", default=None, help="model name for openai backends")
@click.option("--seg", "seg_spec", required=True, help="fixture:DIR or remote:URL")
@click.option("--det", "det_spec", required=True, help="fixture:DIR or remote:URL")
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--label", default=None, help="combination label for the report")
@click.option("--out", "out_path", type=click.Path(), default=None)
def bench_run(manifest, llm_spec, model, seg_spec, det_spec, runs, seed, label, out_path):
    """Evaluate one LLM + detector + segmenter combination."""
    records = load_dataset(manifest)
    counts = category_counts(records)
    click.echo(f"loaded {len(records)} records "
               f"({counts['absolute']} absolute, {counts['relative']} relative)")
    gateway = _gateway_from_spec(llm_spec, model)
    vision = _vision_from_specs(seg_spec, det_spec)
    pipeline = PredictorPipeline(Predictor(gateway, vision))
    combination = label or f"{llm_spec} + {det_spec} + {seg_spec}"
    report = evaluate_combination(pipeline, records, runs=runs, seed=seed, combination=combination)
    _write_report(report, out_path)


@bench.command("random")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def bench_random(manifest, runs, seed, out_path):
    """Uniform random point sampling baseline."""
    records = load_dataset(manifest)
    report = random_baseline(records, runs=runs, seed=seed)
    _write_report(report, out_path)


@bench.command("report")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
def bench_report(in_path):
    """Render stored report JSON (single report or a list) as a table."""
    data = json.loads(Path(in_path).read_text())
    if isinstance(data, dict):
        data = [data]
    reports = [BenchmarkReport.from_json(entry) for entry in data]
    click.echo(render_report_table(reports))


if __name__ == "__main__":
    main()
