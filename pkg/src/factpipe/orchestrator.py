"""Pipeline coordination: ingestion, query generation, evidence, verdict."""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

import httpx

from factpipe.claims import Claim, ClaimVerdict, GoldLabel, Subclaim, SubclaimVerdict
from factpipe.config import PipelineConfig
from factpipe.credibility import (
    CredibilityEngine,
    FixtureMbfcClient,
    HttpMbfcClient,
    MbfcClient,
    RecordingMbfcClient,
)
from factpipe.errors import ConfigError, FactpipeError, ParseError, PipelineError, TransportError
from factpipe.fixtures import FixtureBundle, RecordingTransport
from factpipe.ingestion import IngestionAgent, IngestionResult
from factpipe.llm.gateway import (
    ChatBackend,
    Gateway,
    HttpChatBackend,
    RecordingBackend,
    TokenBucket,
)
from factpipe.queries import QueryAgent, QuerySet
from factpipe.retrieval.evidence import EvidenceAgent, EvidenceSettings, GatherResult
from factpipe.retrieval.fetch import Fetcher, HttpFetcher
from factpipe.retrieval.search import SearchClient, cutoff_for
from factpipe.retrieval.store import (
    EvidenceRepository,
    EvidenceStore,
    MonotonicClock,
    StampingSink,
)
from factpipe.verdict import build_cell, compose_claim_verdict, judge_subclaim

logger = logging.getLogger(__name__)

T = TypeVar("T")

STAGES = ("ingestion", "query", "evidence", "verdict")
PARSE_FAILURE_EXPLANATION = (
    "The verdict model's reply could not be parsed after a retry; "
    "the subclaim is treated as not supported."
)


@dataclass
class RunTrace:
    claim_id: str
    timings: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, list[str]] = field(default_factory=dict)
    subclaims: int = 0
    dropped: int = 0
    unclassified: int = 0
    queries: int = 0
    hits: int = 0
    credible_hits: int = 0
    records: int = 0

    def note(self, stage: str, message: str) -> None:
        self.diagnostics.setdefault(stage, []).append(message)

    @property
    def counts(self) -> dict[str, int]:
        return {"subclaims": self.subclaims, "dropped": self.dropped,
                "unclassified": self.unclassified, "queries": self.queries,
                "hits": self.hits, "credible_hits": self.credible_hits, "records": self.records}

    @property
    def credible_ratio(self) -> float:
        return self.credible_hits / self.hits if self.hits else 0.0

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        doc: dict[str, Any] = {"claim_id": self.claim_id, "counts": self.counts,
                               "diagnostics": {k: list(v) for k, v in self.diagnostics.items()}}
        if timings:
            doc["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return doc

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunTrace":
        return cls(claim_id=d["claim_id"], timings=dict(d.get("timings", {})),
                   diagnostics={k: list(v) for k, v in d.get("diagnostics", {}).items()},
                   **d["counts"])


@dataclass(frozen=True)
class ClaimResult:
    """One batch entry: a verdict, or the error that stopped the claim."""

    claim: Claim
    verdict: ClaimVerdict | None
    trace: RunTrace
    error: PipelineError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict[str, Any]:
        return {"claim_id": self.claim.id,
                "verdict": self.verdict.to_dict() if self.verdict else None,
                "error": ({"stage": self.error.stage, "message": str(self.error)}
                          if self.error else None)}


@dataclass
class Services:
    """External collaborators for one run."""

    gateway: Gateway
    search: SearchClient
    credibility: CredibilityEngine
    fetcher: Fetcher
    store: EvidenceStore
    clock: MonotonicClock = field(default_factory=MonotonicClock)
    sink: StampingSink = field(init=False)

    def __post_init__(self):
        self.sink = StampingSink(self.store, self.clock)


def build_services(config: PipelineConfig, store: EvidenceStore | None = None,
                   run_id: str = "default", *,
                   llm: ChatBackend | None = None,
                   search_transport: httpx.BaseTransport | None = None,
                   page_transport: httpx.BaseTransport | None = None,
                   mbfc: MbfcClient | None = None) -> Services:
    """Wire services from ``config``.

    Offline runs replay the fixture bundle at ``config.fixtures_dir``; any
    explicitly injected collaborator wins over both fixtures and live clients.
    """
    if store is None:
        store = EvidenceRepository(config.data_dir).store(run_id)
    overrides: dict[str, ChatBackend] = {}
    if config.offline_mode:
        try:
            bundle = FixtureBundle.load(config.fixtures_dir or "")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load fixtures from {config.fixtures_dir}: {exc}") from exc
        default = llm or bundle.llm_backend()
        search_transport = search_transport or bundle.search_transport()
        page_transport = page_transport or bundle.page_transport()
        mbfc = mbfc or bundle.mbfc_client()
    else:
        if llm is not None:
            default = llm
        else:
            default = HttpChatBackend(config.backend_for("default"))
            overrides = {r: HttpChatBackend(b) for r, b in config.backends.items()
                         if r != "default"}
        if mbfc is None:
            if config.mbfc.db_path:
                mbfc = FixtureMbfcClient.from_file(config.mbfc.db_path)
            elif config.mbfc.endpoint:
                mbfc = HttpMbfcClient(config.mbfc.endpoint, config.mbfc.api_key_env_var)
            else:
                raise ConfigError("live runs need mbfc.endpoint or mbfc.db_path")
    search = SearchClient(config.search.endpoint, config.search.api_key_env_var,
                          client=httpx.Client(transport=search_transport) if search_transport
                          else None, timeout=config.search.timeout)
    fetcher = HttpFetcher(client=httpx.Client(transport=page_transport) if page_transport else None,
                          timeout=config.fetch.timeout, max_bytes=config.fetch.max_bytes,
                          max_redirects=config.fetch.max_redirects,
                          max_parallel=config.parallelism.fetches)
    bucket = TokenBucket(config.rate_limit_per_second) if config.rate_limit_per_second else None
    gateway = Gateway(default=default, overrides=overrides,
                      model_ids={r: config.backend_for(r).model_id
                                 for r in ("ingestion", "query", "extraction", "verdict", "judge")},
                      bucket=bucket)
    credibility = CredibilityEngine(mbfc, threshold=config.mbfc.fallback_threshold)
    return Services(gateway, search, credibility, fetcher, store)


class _Deadline:
    def __init__(self, seconds: float, clock: Callable[[], float] = time.monotonic):
        self._clock = clock
        self._end = clock() + seconds

    def check(self, stage: str) -> None:
        if self._clock() > self._end:
            raise PipelineError(stage, "claim timeout exceeded")


class Pipeline:
    """Runs claims through the four stages with retries and a per-claim deadline.

    ``on_event(kind, detail)`` receives ``stage_start``/``stage_end`` and
    ``persisted`` notifications, in order, for instrumentation.
    """

    def __init__(self, config: PipelineConfig, services: Services,
                 sleep: Callable[[float], None] = time.sleep,
                 on_event: Callable[[str, str], None] | None = None):
        self.config = config
        self.services = services
        self._sleep = sleep
        self._on_event = on_event or (lambda _kind, _detail: None)

    # -- retry policy -------------------------------------------------------

    def _retrying(self, deadline: _Deadline) -> Callable[[str, Callable[[], T]], T]:
        retries = self.config.retries

        def retry(stage: str, thunk: Callable[[], T]) -> T:
            parse_left, transport_left, attempt = retries.parse, retries.transport, 0
            while True:
                deadline.check(stage)
                try:
                    return thunk()
                except ParseError as exc:
                    if parse_left <= 0:
                        raise
                    parse_left -= 1
                    logger.info("%s: parse failure (%s), retrying", stage, exc)
                except TransportError as exc:
                    if transport_left <= 0:
                        raise
                    transport_left -= 1
                    backoff = retries.backoff
                    delay = backoff[min(attempt, len(backoff) - 1)] if backoff else 0.0
                    attempt += 1
                    logger.info("%s: transport failure (%s), retrying in %.1fs", stage, exc, delay)
                    self._sleep(delay)

        return retry

    # -- stages ---------------------------------------------------------------

    def _fan_out(self, fn: Callable[[Subclaim], T], subclaims: Sequence[Subclaim]) -> list[T]:
        if len(subclaims) <= 1:
            return [fn(s) for s in subclaims]
        with ThreadPoolExecutor(max_workers=self.config.parallelism.subclaims) as pool:
            return list(pool.map(fn, subclaims))

    def _stage(self, name: str, trace: RunTrace, deadline: _Deadline, fn: Callable[[], T]) -> T:
        deadline.check(name)
        self._on_event("stage_start", name)
        start = time.perf_counter()
        try:
            return fn()
        except PipelineError:
            raise
        except FactpipeError as exc:
            trace.note(name, f"{type(exc).__name__}: {exc}")
            raise PipelineError(name, exc) from exc
        finally:
            trace.timings[name] = time.perf_counter() - start
            self._on_event("stage_end", name)

    def run_claim(self, claim: Claim) -> tuple[ClaimVerdict, RunTrace]:
        trace = RunTrace(claim.id)
        try:
            return self._run(claim, trace), trace
        except PipelineError as exc:
            exc.trace = trace  # type: ignore[attr-defined]
            raise

    def _run(self, claim: Claim, trace: RunTrace) -> ClaimVerdict:
        cfg, svc = self.config, self.services
        deadline = _Deadline(cfg.claim_timeout)
        retry = self._retrying(deadline)
        gw = svc.gateway

        ingestion = IngestionAgent(gw.backend("ingestion"), gw.model_ids.get("ingestion", ""),
                                   max_workers=cfg.parallelism.subclaims, retry=retry)
        result: IngestionResult = self._stage("ingestion", trace, deadline,
                                              lambda: ingestion.ingest(claim))
        trace.subclaims = result.decomposed_count
        trace.dropped = result.dropped_count
        trace.unclassified = len(result.unclassified)
        for w in result.warnings:
            trace.note("ingestion", w)
        subclaims = result.to_verify
        if not subclaims:
            trace.note("ingestion", "no verifiable subclaims; skipping retrieval")
            return compose_claim_verdict(claim, [])

        querier = QueryAgent(gw.backend("query"), gw.model_ids.get("query", ""), retry=retry)
        querysets: list[QuerySet] = self._stage(
            "query", trace, deadline,
            lambda: self._fan_out(lambda s: querier.generate_queries(s, cfg.k_queries), subclaims))
        trace.queries = sum(len(q.queries) for q in querysets)

        settings = EvidenceSettings(num_results=cfg.search.num_results, region=cfg.search.region,
                                    temporal_bound=cutoff_for(cfg.dataset or claim.origin_dataset),
                                    top_m=cfg.top_m)
        evidence = EvidenceAgent(svc.search, svc.credibility, svc.fetcher,
                                 gw.backend("extraction"), settings, svc.clock,
                                 gw.model_ids.get("extraction", ""), retry=retry, sink=svc.sink)
        by_ref = {q.subclaim_ref: q for q in querysets}

        def gather_all() -> list[GatherResult]:
            # the sink has written every record by the time this returns
            gathered = self._fan_out(lambda s: evidence.gather_evidence(s, by_ref[s.ref]),
                                     subclaims)
            self._on_event("persisted", claim.id)
            return gathered

        gathered = self._stage("evidence", trace, deadline, gather_all)
        for g in gathered:
            trace.hits += g.hits
            trace.credible_hits += g.credible_hits
            trace.records += len(g.records)
            for d in g.diagnostics:
                trace.note("evidence", d)
        records_for = {s.ref: g.records for s, g in zip(subclaims, gathered, strict=True)}

        judge = gw.backend("verdict")
        judge_model = gw.model_ids.get("verdict", "")

        def judge_one(sub: Subclaim) -> SubclaimVerdict:
            cell = build_cell(sub, records_for[sub.ref])
            try:
                return retry("verdict", lambda: judge_subclaim(claim, cell, judge, judge_model))
            except ParseError as exc:
                trace.note("verdict", f"subclaim {sub.index}: {exc}")
                return SubclaimVerdict(sub.ref, GoldLabel.NOT_SUPPORTED, PARSE_FAILURE_EXPLANATION)

        verdicts = self._stage("verdict", trace, deadline, lambda: self._fan_out(judge_one, subclaims))
        return compose_claim_verdict(claim, verdicts, subclaims)

    def run_batch(self, claims: Sequence[Claim]) -> list[ClaimResult]:
        """Run claims concurrently; results keep input order and failures stay per-claim."""

        def one(claim: Claim) -> ClaimResult:
            try:
                verdict, trace = self.run_claim(claim)
                return ClaimResult(claim, verdict, trace)
            except PipelineError as exc:
                return ClaimResult(claim, None, getattr(exc, "trace", RunTrace(claim.id)), exc)
            except Exception as exc:  # noqa: BLE001 - a batch must survive any one claim
                logger.exception("claim %s crashed", claim.id)
                return ClaimResult(claim, None, RunTrace(claim.id), PipelineError("internal", exc))

        if not claims:
            return []
        with ThreadPoolExecutor(max_workers=self.config.parallelism.claims) as pool:
            return list(pool.map(one, claims))


def run_claim(claim: Claim, config: PipelineConfig, services: Services | None = None,
              ) -> tuple[ClaimVerdict, RunTrace]:
    return Pipeline(config, services or build_services(config)).run_claim(claim)


def run_batch(claims: Sequence[Claim], config: PipelineConfig,
              services: Services | None = None) -> list[ClaimResult]:
    return Pipeline(config, services or build_services(config)).run_batch(claims)


def record_fixtures(config: PipelineConfig, claim: Claim, out_dir: str | Path, *,
                    llm: ChatBackend | None = None,
                    search_transport: httpx.BaseTransport | None = None,
                    page_transport: httpx.BaseTransport | None = None,
                    mbfc: MbfcClient | None = None,
                    store: EvidenceStore | None = None) -> tuple[FixtureBundle, ClaimVerdict]:
    """Run ``claim`` live and save every exchange as a replayable bundle in ``out_dir``."""
    if config.offline_mode:
        raise ConfigError("record-fixtures needs a live configuration")
    bundle = FixtureBundle()
    base = build_services(config, store or EvidenceStore(Path(out_dir) / "evidence.jsonl"),
                          llm=llm, search_transport=search_transport,
                          page_transport=page_transport, mbfc=mbfc)
    recording_llm = RecordingBackend(base.gateway.default)
    base.gateway.default = recording_llm
    base.gateway.overrides = {r: RecordingBackend(b) for r, b in base.gateway.overrides.items()}
    recording_mbfc = RecordingMbfcClient(base.credibility.client)
    base.credibility.client = recording_mbfc
    base.search._client = httpx.Client(transport=RecordingTransport(
        search_transport or httpx.HTTPTransport(), bundle, "search"))
    base.fetcher = HttpFetcher(
        client=httpx.Client(transport=RecordingTransport(
            page_transport or httpx.HTTPTransport(), bundle, "pages")),
        timeout=config.fetch.timeout, max_bytes=config.fetch.max_bytes,
        max_redirects=config.fetch.max_redirects, max_parallel=config.parallelism.fetches)
    verdict, _trace = Pipeline(config, base).run_claim(claim)
    bundle.llm.update(recording_llm.recorded)
    for backend in base.gateway.overrides.values():
        bundle.llm.update(backend.recorded)  # type: ignore[attr-defined]
    for domain, reply in recording_mbfc.recorded.items():
        if reply is not None:
            bundle.mbfc[domain] = dict(reply)
    bundle.save(out_dir)
    (Path(out_dir) / "claim.json").write_text(json.dumps(claim.to_dict(), indent=2) + "\n",
                                              encoding="utf-8")
    return bundle, verdict
