"""Evidence seeking: search, credibility gate, full-text fetch, passage extraction."""

from __future__ import annotations

import datetime as dt
import hashlib
import logging
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

from factpipe.claims import Subclaim
from factpipe.credibility import CredibilityEngine
from factpipe.errors import FactpipeError
from factpipe.llm.gateway import ChatBackend, ask
from factpipe.llm.templates import CONTENT_RETRIEVAL
from factpipe.queries import QuerySet
from factpipe.retrieval.fetch import Fetcher
from factpipe.retrieval.search import SearchClient, SearchHit, SearchRequest
from factpipe.retrieval.store import EvidenceRecord, MonotonicClock, StampingSink

logger = logging.getLogger(__name__)

_NONE_REPLY = re.compile(r"""^["'`]*\s*none\s*[.!]?\s*["'`]*$""", re.IGNORECASE)


def extraction_bindings(query: str, content: str) -> dict[str, str]:
    return {"query": query, "content": content}


def extract_relevant(query: str, content: str, backend: ChatBackend,
                     model_id: str = "") -> str | None:
    """Ask the extraction model for the passages of ``content`` relevant to ``query``.

    A bare ``None`` reply means nothing relevant was found.
    """
    if not content or not content.strip():
        raise ValueError("extract_relevant needs non-empty content")
    reply = ask(backend, CONTENT_RETRIEVAL, extraction_bindings(query, content), model_id)
    text = reply.strip()
    if not text or _NONE_REPLY.match(text):
        return None
    return text


def select_credible(hits: Sequence[SearchHit], cred: CredibilityEngine) -> list[SearchHit]:
    """Order-preserving filter keeping hits from credible publishers."""
    kept = []
    for hit in hits:
        try:
            ok = cred.is_credible(hit.domain)
        except FactpipeError as exc:
            logger.warning("credibility lookup for %s failed (%s); treating as not credible",
                           hit.domain, exc)
            ok = False
        if ok:
            kept.append(hit)
    return kept


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class GatherResult:
    records: list[EvidenceRecord] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    hits: int = 0
    credible_hits: int = 0


@dataclass
class EvidenceSettings:
    num_results: int = 10
    region: str = "us"
    temporal_bound: dt.date | None = None
    top_m: int = 1


class EvidenceAgent:
    def __init__(self, search: SearchClient, credibility: CredibilityEngine, fetcher: Fetcher,
                 extractor: ChatBackend, settings: EvidenceSettings | None = None,
                 clock: MonotonicClock | None = None, model_id: str = "",
                 retry: Callable[[str, Callable[[], Any]], Any] | None = None,
                 sink: StampingSink | None = None):
        self.search = search
        self.credibility = credibility
        self.fetcher = fetcher
        self.extractor = extractor
        self.settings = settings or EvidenceSettings()
        self.clock = clock or MonotonicClock()
        self.model_id = model_id
        self._retry = retry or (lambda _stage, thunk: thunk())
        # when set, records are persisted as soon as they are made
        self.sink = sink

    def _one_query(self, subclaim: Subclaim, query: str, out: GatherResult) -> None:
        request = SearchRequest(query, self.settings.num_results, self.settings.region,
                                self.settings.temporal_bound)
        hits = self._retry("search", lambda: self.search.search(request))
        credible = select_credible(hits, self.credibility)
        out.hits += len(hits)
        out.credible_hits += len(credible)
        if not credible:
            out.diagnostics.append(f"query {query!r}: no credible hits among {len(hits)}")
            return
        for hit in credible[: self.settings.top_m]:
            try:
                text = self.fetcher.fetch_full_text(hit.url)
            except FactpipeError as exc:
                out.diagnostics.append(f"query {query!r}: fetch failed: {exc}")
                continue
            if not text.strip():
                out.diagnostics.append(f"query {query!r}: {hit.url} has no visible text")
                continue
            passage = self._retry(
                "extraction",
                lambda text=text: extract_relevant(query, text, self.extractor, self.model_id))
            record = EvidenceRecord(
                subclaim_ref=subclaim.ref,
                query=query,
                url=hit.url,
                domain=hit.domain,
                credibility=self.credibility.assess(hit.domain).rating,
                passage=passage,
                retrieved_at=self.clock.now(),
                content_hash=content_hash(text),
            )
            out.records.append(self.sink.emit(record) if self.sink else record)

    def gather_evidence(self, subclaim: Subclaim, queryset: QuerySet) -> GatherResult:
        """One record per query from its top-ranked credible hit.

        A failing query only adds a diagnostic; the subclaim carries on.
        """
        if not queryset.queries:
            raise ValueError("queryset must be non-empty")
        out = GatherResult()
        for query in queryset.queries:
            try:
                self._one_query(subclaim, query, out)
            except FactpipeError as exc:
                out.diagnostics.append(f"query {query!r}: {type(exc).__name__}: {exc}")
        for d in out.diagnostics:
            logger.info("subclaim %s/%d: %s", subclaim.claim_id, subclaim.index, d)
        return out


def gather_evidence(subclaim: Subclaim, queryset: QuerySet, agent: EvidenceAgent) -> GatherResult:
    return agent.gather_evidence(subclaim, queryset)
