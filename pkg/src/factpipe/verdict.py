"""Verdict prediction: evidence cells, per-subclaim judging, claim-level composition."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

from factpipe.claims import (
    Claim,
    ClaimLabel,
    ClaimVerdict,
    GoldLabel,
    Subclaim,
    SubclaimRef,
    SubclaimVerdict,
    aggregate_verdicts,
)
from factpipe.errors import NoJsonFound, VerdictParseError
from factpipe.llm.gateway import ChatBackend, ask
from factpipe.llm.jsonparse import extract_json_object
from factpipe.llm.templates import VERDICT_PREDICTION
from factpipe.retrieval.store import EvidenceRecord

NO_EVIDENCE = "NO RELEVANT EVIDENCE RETRIEVED"
INSUFFICIENT_EXPLANATION = (
    "No credible evidence could be retrieved for this subclaim, so it cannot be "
    "confirmed; insufficient evidence is classified as not_supported."
)
NO_VERIFIABLE_EXPLANATION = (
    "The claim contains no objectively verifiable subclaims, so no evidence-based "
    "verdict was produced."
)

_LABELS = {"supported": GoldLabel.SUPPORTED, "not_supported": GoldLabel.NOT_SUPPORTED}


@dataclass(frozen=True)
class CellEntry:
    query: str
    url: str
    passage: str
    credibility: str

    def to_dict(self) -> dict[str, str]:
        return {"query": self.query, "url": self.url, "passage": self.passage,
                "credibility": self.credibility}


@dataclass(frozen=True)
class EvidenceCell:
    subclaim: str
    entries: tuple[CellEntry, ...]
    subclaim_ref: SubclaimRef | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"subclaim": self.subclaim, "evidence": [e.to_dict() for e in self.entries]}

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def build_cell(subclaim: Subclaim, evidence: Sequence[EvidenceRecord]) -> EvidenceCell:
    """Bundle a subclaim's records, grouped by query in first-seen order."""
    for r in evidence:
        if r.subclaim_ref != subclaim.ref:
            raise ValueError(f"record for {r.subclaim_ref} passed with subclaim {subclaim.ref}")
    order: dict[str, list[EvidenceRecord]] = {}
    for r in evidence:
        order.setdefault(r.query, []).append(r)
    entries = tuple(
        CellEntry(query=r.query, url=r.url,
                  passage=r.passage if r.passage else NO_EVIDENCE,
                  credibility=r.credibility.summary())
        for group in order.values() for r in group
    )
    return EvidenceCell(subclaim.predicate.raw_line, entries, subclaim.ref)


def verdict_bindings(claim: Claim, cell: EvidenceCell) -> dict[str, str]:
    return {"claim": claim.text.strip(), "cell": cell.serialize()}


def parse_verdict_reply(reply: str) -> tuple[GoldLabel, str]:
    try:
        doc = extract_json_object(reply)
    except NoJsonFound as exc:
        raise VerdictParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise VerdictParseError("verdict reply is not a JSON object")
    raw_label = doc.get("label")
    if not isinstance(raw_label, str):
        raise VerdictParseError("verdict reply has no string 'label'")
    key = raw_label.strip().lower().replace(" ", "_").replace("-", "_")
    if key not in _LABELS:
        raise VerdictParseError(f"unknown verdict label {raw_label!r}")
    explanation = doc.get("explanation")
    if not isinstance(explanation, str) or not explanation.strip():
        explanation = "(the model gave no explanation)"
    return _LABELS[key], explanation.strip()


def judge_subclaim(claim: Claim, cell: EvidenceCell, backend: ChatBackend,
                   model_id: str = "") -> SubclaimVerdict:
    """Label one subclaim from its evidence cell.

    Empty cells are decided locally as not supported; the backend is only
    consulted when there is evidence to weigh.
    """
    if cell.subclaim_ref is None:
        raise ValueError("cell has no subclaim reference")
    if not cell.entries:
        return SubclaimVerdict(cell.subclaim_ref, GoldLabel.NOT_SUPPORTED, INSUFFICIENT_EXPLANATION)
    reply = ask(backend, VERDICT_PREDICTION, verdict_bindings(claim, cell), model_id)
    label, explanation = parse_verdict_reply(reply)
    return SubclaimVerdict(cell.subclaim_ref, label, explanation)


def compose_claim_verdict(claim: Claim, subclaim_verdicts: Sequence[SubclaimVerdict],
                          subclaims: Sequence[Subclaim] = ()) -> ClaimVerdict:
    """Fold subclaim verdicts into the claim label and a readable explanation."""
    ordered = sorted(subclaim_verdicts, key=lambda v: v.subclaim_ref.index)
    label = aggregate_verdicts(ordered)
    if label is ClaimLabel.NO_VERIFIABLE_CONTENT:
        return ClaimVerdict(claim.id, label, (), NO_VERIFIABLE_EXPLANATION)
    lines_by_index = {s.index: s.predicate.raw_line for s in subclaims}
    sections = []
    for v in ordered:
        head = lines_by_index.get(v.subclaim_ref.index, f"subclaim {v.subclaim_ref.index}")
        sections.append(f"{head}\n  [{v.label.value}] {v.explanation}")
    return ClaimVerdict(claim.id, label, tuple(ordered), "\n\n".join(sections))
