"""``factpipe`` command line: check, bench, inspect, record-fixtures.

Exit codes: 0 success, 2 pipeline error or partial batch, 3 usage/config error.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import sys
from pathlib import Path
from typing import Any

import click

from factpipe.claims import Claim, Dataset, canonical_json
from factpipe.config import PipelineConfig
from factpipe.errors import ConfigError, FactpipeError, FormatError, PipelineError, StorageError
from factpipe.evaluation import build_report, load_dataset, stratified_sample, write_report
from factpipe.orchestrator import Pipeline, RunTrace, build_services, record_fixtures
from factpipe.retrieval.store import EVIDENCE_FILE, EvidenceStore

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 2, 3
TRACES_DIR = "traces"


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _style(text: str, **kw: Any) -> str:
    return text if os.environ.get("NO_COLOR") else click.style(text, **kw)


def _label_color(label: str) -> str:
    return {"Supported": "green", "NotSupported": "red"}.get(label, "yellow")


def _load_config(path: str | None, **overrides: Any) -> PipelineConfig:
    try:
        config = PipelineConfig.load(path) if path else PipelineConfig()
        fixtures = overrides.pop("fixtures_dir", None)
        if fixtures is not None:
            overrides.update(fixtures_dir=fixtures, offline_mode=True)
        return config.with_overrides(**overrides)
    except ConfigError as exc:
        raise _Fail(EXIT_USAGE, f"config error: {exc}") from exc


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                      help="JSON run configuration.")(fn)
    fn = click.option("--fixtures", "fixtures_dir", type=click.Path(file_okay=False),
                      help="Replay this fixture bundle (implies offline mode).")(fn)
    fn = click.option("--data-dir", type=click.Path(file_okay=False),
                      help="Where evidence is stored.")(fn)
    fn = click.option("-k", "--k-queries", type=int, help="Search questions per subclaim (1-5).")(fn)
    return fn


def _write_json(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _fresh_store(run_dir: Path) -> EvidenceStore:
    path = run_dir / EVIDENCE_FILE
    if path.exists():
        path.unlink()
    return EvidenceStore(path)


def _build_pipeline(config: PipelineConfig, store: EvidenceStore) -> Pipeline:
    try:
        return Pipeline(config, build_services(config, store))
    except ConfigError as exc:
        raise _Fail(EXIT_USAGE, f"config error: {exc}") from exc


class _Cli(click.Group):
    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted.", err=True)
            sys.exit(EXIT_USAGE)
        except _Fail as exc:
            click.echo(str(exc), err=True)
            sys.exit(exc.code)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


@click.group(cls=_Cli)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Decompose, research and judge factual claims."""
    if verbose:
        import logging

        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


# -- check -------------------------------------------------------------------

def _claim_from_flags(text: str | None, claim_file: str | None, claim_id: str | None,
                      dataset: str | None) -> Claim:
    if (text is None) == (claim_file is None):
        raise click.UsageError("give exactly one of --claim or --claim-file")
    if claim_file is not None:
        try:
            raw = Path(claim_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise click.UsageError(f"cannot read {claim_file}: {exc}") from exc
        if claim_file.endswith(".json"):
            try:
                doc = json.loads(raw)
                text, claim_id = doc["text"], claim_id or doc.get("id")
            except (ValueError, KeyError, TypeError) as exc:
                raise click.UsageError(f"{claim_file}: expected {{\"text\": ...}} ({exc})") from exc
        else:
            text = raw
    assert text is not None
    if not text.strip():
        raise click.BadParameter("claim text must be non-empty", param_hint="--claim")
    cid = claim_id or "claim-" + hashlib.sha256(text.strip().encode("utf-8")).hexdigest()[:12]
    try:
        origin = Dataset.parse(dataset) if dataset else None
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--dataset") from exc
    return Claim(cid, text.strip(), origin)


def _print_verdict(claim: Claim, verdict) -> None:
    label = verdict.label.value
    click.echo(f"Claim:   {claim.text}")
    click.echo(f"ID:      {claim.id}")
    click.echo("Verdict: " + _style(label, fg=_label_color(label), bold=True))
    if verdict.composite_explanation:
        click.echo("")
        click.echo(verdict.composite_explanation)


@main.command()
@click.option("--claim", "claim_text", help="Claim text.")
@click.option("--claim-file", type=click.Path(dir_okay=False), help="File holding the claim.")
@click.option("--claim-id", help="Identifier used for stored evidence.")
@click.option("--dataset", help="Benchmark the claim comes from (sets the search cutoff).")
@click.option("--json", "as_json", is_flag=True, help="Print the verdict as canonical JSON.")
@_config_options
def check(claim_text, claim_file, claim_id, dataset, as_json, config_path, fixtures_dir,
          data_dir, k_queries) -> int:
    """Verify a single claim."""
    claim = _claim_from_flags(claim_text, claim_file, claim_id, dataset)
    config = _load_config(config_path, fixtures_dir=fixtures_dir, data_dir=data_dir,
                          k_queries=k_queries)
    run_dir = Path(config.data_dir) / claim.id
    pipeline = _build_pipeline(config, _fresh_store(run_dir))
    try:
        verdict, trace = pipeline.run_claim(claim)
    except PipelineError as exc:
        trace = getattr(exc, "trace", RunTrace(claim.id))
        _write_json(run_dir / TRACES_DIR / f"{claim.id}.json", trace.to_dict())
        raise _Fail(EXIT_PIPELINE, f"error: {exc}") from exc
    _write_json(run_dir / TRACES_DIR / f"{claim.id}.json", trace.to_dict())
    if as_json:
        click.echo(verdict.to_json())
    else:
        _print_verdict(claim, verdict)
    return EXIT_OK


# -- bench -------------------------------------------------------------------

def _load_baseline(path: str | None) -> tuple[dict[str, float] | None, str | None]:
    if path is None:
        return None, None
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        scores = {str(k): float(v) for k, v in doc["scores"].items()}
        return scores, str(doc.get("name", "baseline"))
    except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
        raise _Fail(EXIT_USAGE, f"bad baseline file {path}: {exc}") from exc


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(dir_okay=False),
              help="Benchmark JSONL file.")
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["jsonl"]), show_default=True)
@click.option("--sample", type=int, help="Stratified sample size (default: all).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--baseline", type=click.Path(dir_okay=False),
              help='JSON {"name": ..., "scores": {stratum: f1}} to compare against.')
@click.option("--method", default="MAS", show_default=True, help="Name for this system's column.")
@_config_options
def bench(dataset_path, fmt, sample, seed, out_dir, baseline, method, config_path, fixtures_dir,
          data_dir, k_queries) -> int:
    """Run a benchmark file and write report.json / report.txt."""
    try:
        examples = load_dataset(dataset_path, fmt)
    except FormatError as exc:
        raise _Fail(EXIT_USAGE, f"dataset error: {exc}") from exc
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"cannot read dataset: {exc}") from exc
    if sample is not None:
        if not 0 < sample <= len(examples):
            raise _Fail(EXIT_USAGE, f"--sample must be within 1..{len(examples)}")
        examples = stratified_sample(examples, sample, seed)
    scores, baseline_name = _load_baseline(baseline)
    config = _load_config(config_path, fixtures_dir=fixtures_dir, data_dir=data_dir,
                          k_queries=k_queries)
    out = Path(out_dir)
    if (out / TRACES_DIR).exists():
        shutil.rmtree(out / TRACES_DIR)
    pipeline = _build_pipeline(config, _fresh_store(out))
    results = pipeline.run_batch([e.to_claim() for e in examples])
    for r in results:
        _write_json(out / TRACES_DIR / f"{r.claim.id}.json", r.trace.to_dict(timings=False))
    (out / "verdicts.jsonl").write_text(
        "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in results),
        encoding="utf-8")
    report = build_report(examples, results, scores, method, baseline_name)
    json_path, text_path = write_report(report, out)
    click.echo(text_path.read_text(encoding="utf-8"), nl=False)
    click.echo(f"\nwrote {json_path} and {text_path}")
    failed = sum(not r.ok for r in results)
    if failed:
        click.echo(f"{failed} of {len(results)} claims failed", err=True)
        return EXIT_PIPELINE
    return EXIT_OK


# -- inspect -------------------------------------------------------------------

@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(),
              help="Run directory (holds evidence.jsonl).")
@click.option("--claim-id", required=True)
@click.option("--json", "as_json", is_flag=True, help="One JSON record per line.")
def inspect(run_dir, claim_id, as_json) -> int:
    """List stored evidence for one claim in append order."""
    root = Path(run_dir)
    if not root.is_dir():
        raise _Fail(EXIT_USAGE, f"no such run directory: {run_dir}")
    try:
        records = EvidenceStore(root / EVIDENCE_FILE).load_all()
    except StorageError as exc:
        raise _Fail(EXIT_USAGE, str(exc)) from exc
    known = {r.subclaim_ref.claim_id for r in records}
    known |= {p.stem for p in (root / TRACES_DIR).glob("*.json")}
    if not known:
        click.echo("no records")
        return EXIT_OK
    if claim_id not in known:
        raise _Fail(EXIT_PIPELINE, f"unknown claim id {claim_id!r}")
    mine = [r for r in records if r.subclaim_ref.claim_id == claim_id]
    if not mine:
        click.echo("no records")
        return EXIT_OK
    if as_json:
        for r in mine:
            click.echo(json.dumps(r.to_dict(), ensure_ascii=False))
        return EXIT_OK
    for r in mine:
        passage = r.passage if r.passage is not None else "(no relevant passage)"
        click.echo(_style(f"[subclaim {r.subclaim_ref.index}] {r.query}", bold=True))
        click.echo(f"  url:         {r.url}")
        click.echo(f"  credibility: {r.credibility.summary()}")
        click.echo(f"  retrieved:   {r.retrieved_at.isoformat()}")
        click.echo("  passage:     " + passage.replace("\n", "\n               "))
    return EXIT_OK


# -- record-fixtures -------------------------------------------------------------

@main.command("record-fixtures")
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--claim", "claim_text", required=True)
@click.option("--claim-id")
@click.option("--dataset")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def record_fixtures_cmd(config_path, claim_text, claim_id, dataset, out_dir) -> int:
    """Run one claim against live services and save a replayable bundle."""
    claim = _claim_from_flags(claim_text, None, claim_id, dataset)
    config = _load_config(config_path)
    if config.offline_mode:
        raise _Fail(EXIT_USAGE, "record-fixtures needs a live (non-offline) configuration")
    try:
        bundle, verdict = record_fixtures(config, claim, out_dir)
    except ConfigError as exc:
        raise _Fail(EXIT_USAGE, f"config error: {exc}") from exc
    except FactpipeError as exc:
        raise _Fail(EXIT_PIPELINE, f"error: {exc}") from exc
    click.echo(canonical_json({"claim_id": claim.id, "label": verdict.label.value,
                               "llm": len(bundle.llm), "search": len(bundle.search),
                               "pages": len(bundle.pages), "mbfc": len(bundle.mbfc)}))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    main()
