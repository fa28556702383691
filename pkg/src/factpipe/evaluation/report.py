"""Benchmark report: per-stratum Macro F1, baseline deltas, retrieval accounting."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from factpipe.claims import ClaimLabel
from factpipe.evaluation.datasets import DatasetExample
from factpipe.evaluation.metrics import macro_f1
from factpipe.orchestrator import ClaimResult, RunTrace

OVERALL = "overall"


def score_delta(score: float, baseline: float) -> float:
    """Difference as printed in a 3-decimal table."""
    return round(round(score, 3) - round(baseline, 3), 3)


def format_score(score: float, baseline: float | None = None) -> str:
    if baseline is None:
        return f"{score:.3f}"
    return f"{score:.3f} ({score_delta(score, baseline):+.3f})"


@dataclass(frozen=True)
class StratumRow:
    stratum: str
    n: int
    macro_f1: float | None
    baseline: float | None = None

    @property
    def delta(self) -> float | None:
        if self.macro_f1 is None or self.baseline is None:
            return None
        return score_delta(self.macro_f1, self.baseline)

    @property
    def display(self) -> str:
        return "n/a" if self.macro_f1 is None else format_score(self.macro_f1, self.baseline)

    def to_dict(self) -> dict[str, Any]:
        return {"stratum": self.stratum, "n": self.n,
                "macro_f1": None if self.macro_f1 is None else round(self.macro_f1, 6),
                "baseline": self.baseline, "delta": self.delta, "display": self.display}


def stratum_rows(examples: Sequence[DatasetExample], results: Sequence[ClaimResult],
                 baseline: Mapping[str, float] | None = None) -> list[StratumRow]:
    """One row per stratum (first-seen order) plus an overall row.

    Claims that errored have no prediction and are left out of the score.
    """
    baseline = baseline or {}
    by_id = {r.claim.id: r for r in results}
    strata: dict[str, list[tuple[Any, Any]]] = {}
    counts: dict[str, int] = {}
    for ex in examples:
        counts[ex.stratum] = counts.get(ex.stratum, 0) + 1
        res = by_id.get(ex.id)
        pairs = strata.setdefault(ex.stratum, [])
        if res is not None and res.verdict is not None:
            pairs.append((res.verdict.label, ex.gold_label))
    rows = []
    all_pairs = []
    for stratum, pairs in strata.items():
        all_pairs.extend(pairs)
        f1 = macro_f1([p for p, _ in pairs], [g for _, g in pairs]) if pairs else None
        rows.append(StratumRow(stratum, counts[stratum], f1, baseline.get(stratum)))
    if len(strata) > 1 or OVERALL in baseline:
        f1 = (macro_f1([p for p, _ in all_pairs], [g for _, g in all_pairs])
              if all_pairs else None)
        rows.append(StratumRow(OVERALL, len(examples), f1, baseline.get(OVERALL)))
    return rows


def _accounting(traces: Sequence[RunTrace]) -> dict[str, Any]:
    subclaims = sum(t.subclaims for t in traces)
    dropped = sum(t.dropped for t in traces)
    hits = sum(t.hits for t in traces)
    credible = sum(t.credible_hits for t in traces)
    return {
        "verifiability": {
            "subclaims": subclaims,
            "verifiable": subclaims - dropped,
            "dropped": dropped,
            "unclassified": sum(t.unclassified for t in traces),
            "dropped_ratio": round(dropped / subclaims, 6) if subclaims else 0.0,
        },
        "credibility": {
            "hits": hits,
            "credible_hits": credible,
            "credible_ratio": round(credible / hits, 6) if hits else 0.0,
        },
        "queries": sum(t.queries for t in traces),
        "records": sum(t.records for t in traces),
    }


def build_report(examples: Sequence[DatasetExample], results: Sequence[ClaimResult],
                 baseline: Mapping[str, float] | None = None, method: str = "MAS",
                 baseline_name: str | None = None) -> dict[str, Any]:
    rows = stratum_rows(examples, results, baseline)
    labels = [r.verdict.label for r in results if r.verdict is not None]
    return {
        "method": method,
        "baseline_name": baseline_name,
        "claims": len(results),
        "errors": [{"claim_id": r.claim.id, "stage": r.error.stage, "message": str(r.error)}
                   for r in results if r.error is not None],
        "no_verifiable_content": sum(lbl is ClaimLabel.NO_VERIFIABLE_CONTENT for lbl in labels),
        "strata": [row.to_dict() for row in rows],
        **_accounting([r.trace for r in results]),
    }


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*headers), "  ".join("-" * w for w in widths)]
    lines.extend(fmt.format(*r) for r in rows)
    return [line.rstrip() for line in lines]


def render_text(report: Mapping[str, Any]) -> str:
    base = report.get("baseline_name") or "baseline"
    method = report.get("method", "MAS")
    rows = [[s["stratum"], str(s["n"]), s["display"],
             "-" if s["baseline"] is None else f"{s['baseline']:.3f}"]
            for s in report["strata"]]
    lines = _table(["Stratum", "N", f"{method} Macro F1", base], rows)
    v, c = report["verifiability"], report["credibility"]
    lines += ["", *_table(["Accounting", "Value"], [
        ["subclaims", str(v["subclaims"])],
        ["verifiable subclaims", str(v["verifiable"])],
        ["dropped (non-verifiable)", str(v["dropped"])],
        ["unclassified", str(v["unclassified"])],
        ["search hits", str(c["hits"])],
        ["credible hits", str(c["credible_hits"])],
        ["credible ratio", f"{c['credible_ratio']:.3f}"],
        ["no verifiable content", str(report["no_verifiable_content"])],
        ["errored claims", str(len(report["errors"]))],
    ])]
    return "\n".join(lines) + "\n"


def write_report(report: Mapping[str, Any], out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, text_path = out / "report.json", out / "report.txt"
    json_path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    text_path.write_text(render_text(report), encoding="utf-8")
    return json_path, text_path
