"""Input ingestion: FOL decomposition and verifiability filtering."""

from __future__ import annotations

import logging
import re
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

from factpipe.claims import (
    Claim,
    Subclaim,
    Verifiability,
    parse_decomposition,
    subclaims_from_predicates,
)
from factpipe.errors import EmptyDecomposition, UnparseableClassification
from factpipe.llm.gateway import ChatBackend, ask
from factpipe.llm.templates import DECOMPOSITION, VERIFIABILITY_CLASSIFICATION

logger = logging.getLogger(__name__)

# NON-VERIFIABLE must be tried before VERIFIABLE, which it contains.
_TOKEN = re.compile(
    r"(?<![A-Za-z])(non[-\s_]?verifiable|not\s+verifiable|unverifiable|verifiable)(?![A-Za-z])",
    re.IGNORECASE,
)


def decomposition_bindings(claim: Claim) -> dict[str, str]:
    return {"claim": claim.text.strip()}


def verifiability_bindings(subclaim: Subclaim) -> dict[str, str]:
    return {"claim": subclaim.predicate.verification_goal}


def parse_classification(reply: str) -> Verifiability:
    """Map a classifier reply to an enum by its first VERIFIABLE-ish token."""
    m = _TOKEN.search(reply or "")
    if m is None:
        raise UnparseableClassification(f"no VERIFIABLE/NON-VERIFIABLE token in {reply[:80]!r}")
    return (Verifiability.VERIFIABLE if m.group(1).lower() == "verifiable"
            else Verifiability.NON_VERIFIABLE)


@dataclass(frozen=True)
class IngestionResult:
    """Verifiable subclaims, plus any the classifier could not label.

    ``unclassified`` subclaims are kept out of ``subclaims`` but are still
    verified downstream (see ``to_verify``).
    """

    claim_id: str
    subclaims: tuple[Subclaim, ...]
    dropped_count: int
    unclassified: tuple[Subclaim, ...] = ()
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if any(s.verifiability is not Verifiability.VERIFIABLE for s in self.subclaims):
            raise ValueError("retained subclaims must all be Verifiable")

    @property
    def decomposed_count(self) -> int:
        return len(self.subclaims) + self.dropped_count + len(self.unclassified)

    @property
    def to_verify(self) -> tuple[Subclaim, ...]:
        return tuple(sorted(self.subclaims + self.unclassified, key=lambda s: s.index))

    def to_dict(self) -> dict[str, Any]:
        return {"claim_id": self.claim_id, "subclaims": [s.to_dict() for s in self.subclaims],
                "dropped_count": self.dropped_count,
                "unclassified": [s.to_dict() for s in self.unclassified],
                "warnings": list(self.warnings)}


class IngestionAgent:
    def __init__(self, backend: ChatBackend, model_id: str = "", max_workers: int = 4,
                 retry: Callable[[str, Callable[[], Any]], Any] | None = None):
        self.backend = backend
        self.model_id = model_id
        self.max_workers = max_workers
        # orchestrator hook: retry(stage_name, thunk)
        self._retry = retry or (lambda _stage, thunk: thunk())

    def decompose(self, claim: Claim) -> list[Subclaim]:
        def attempt() -> list[Subclaim]:
            reply = ask(self.backend, DECOMPOSITION, decomposition_bindings(claim), self.model_id)
            predicates, malformed = parse_decomposition(reply)
            for exc in malformed:
                logger.warning("claim %s: dropped malformed predicate line: %s", claim.id, exc)
            return subclaims_from_predicates(claim.id, predicates)

        subclaims = self._retry("decomposition", attempt)
        if not subclaims:
            raise EmptyDecomposition(f"claim {claim.id} decomposed into no predicates")
        return subclaims

    def classify_verifiability(self, subclaim: Subclaim) -> Subclaim:
        """Return a copy with verifiability set.

        On an unparseable reply the subclaim comes back Unclassified with the
        raw reply as its explanation; callers keep it and verify it anyway.
        """
        if subclaim.verifiability is not Verifiability.UNCLASSIFIED:
            raise ValueError(f"subclaim {subclaim.index} is already classified")
        reply = self._retry(
            "classification",
            lambda: ask(self.backend, VERIFIABILITY_CLASSIFICATION,
                        verifiability_bindings(subclaim), self.model_id),
        )
        explanation = reply.strip()
        try:
            label = parse_classification(reply)
        except UnparseableClassification:
            return replace(subclaim, classifier_explanation=explanation or None)
        return replace(subclaim, verifiability=label, classifier_explanation=explanation or None)

    def ingest(self, claim: Claim) -> IngestionResult:
        subclaims = self.decompose(claim)
        with ThreadPoolExecutor(max_workers=max(1, self.max_workers)) as pool:
            classified = list(pool.map(self.classify_verifiability, subclaims))
        verifiable = tuple(s for s in classified if s.verifiability is Verifiability.VERIFIABLE)
        unclassified = tuple(s for s in classified
                             if s.verifiability is Verifiability.UNCLASSIFIED)
        warnings = tuple(f"subclaim {s.index} could not be classified; verifying it anyway"
                         for s in unclassified)
        for w in warnings:
            logger.warning("claim %s: %s", claim.id, w)
        return IngestionResult(
            claim_id=claim.id,
            subclaims=verifiable,
            dropped_count=sum(s.verifiability is Verifiability.NON_VERIFIABLE for s in classified),
            unclassified=unclassified,
            warnings=warnings,
        )
