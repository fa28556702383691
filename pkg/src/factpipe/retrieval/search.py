"""Serper-style web search with dataset-specific date cut-offs."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import httpx

from factpipe.claims import Dataset
from factpipe.credibility import normalize_domain
from factpipe.errors import (
    AuthFailure,
    MalformedResponse,
    QuotaExceeded,
    RateLimited,
    Timeout,
    TransportError,
)

logger = logging.getLogger(__name__)

SERPER_ENDPOINT = "https://google.serper.dev/search"

# Latest date each benchmark's evidence may come from (temporal-leakage guard).
DATASET_CUTOFFS: dict[Dataset, dt.date] = {
    Dataset.FEVEROUS: dt.date(2021, 10, 12),
    Dataset.HOVER: dt.date(2020, 11, 16),
    Dataset.SCIFACT_OPEN: dt.date(2020, 10, 3),
}

_TBS = re.compile(r"^cdr:1,cd_max:(\d{2})/(\d{2})/(\d{4})$")


def cutoff_for(dataset: Dataset | None) -> dt.date | None:
    return DATASET_CUTOFFS.get(dataset) if dataset else None


def encode_tbs(upper: dt.date) -> str:
    """Google custom-date-range filter with only an upper bound."""
    return f"cdr:1,cd_max:{upper.month:02d}/{upper.day:02d}/{upper.year:04d}"


def decode_tbs(tbs: str) -> dt.date:
    m = _TBS.match(tbs.strip())
    if m is None:
        raise ValueError(f"not a cd_max date-range filter: {tbs!r}")
    month, day, year = (int(g) for g in m.groups())
    return dt.date(year, month, day)


@dataclass(frozen=True)
class SearchRequest:
    query: str
    num_results: int = 10
    region: str = "us"
    temporal_bound: dt.date | None = None

    def __post_init__(self):
        if not self.query or not self.query.strip():
            raise ValueError("search query must be non-empty")
        if not 1 <= self.num_results <= 100:
            raise ValueError("num_results must be within 1..100")
        if self.temporal_bound is not None and (
            not isinstance(self.temporal_bound, dt.date) or isinstance(self.temporal_bound, dt.datetime)
        ):
            raise ValueError("temporal_bound must be a calendar date")

    def payload(self) -> dict[str, Any]:
        body: dict[str, Any] = {"q": self.query, "num": self.num_results, "gl": self.region}
        if self.temporal_bound is not None:
            body["tbs"] = encode_tbs(self.temporal_bound)
        return body


def payload_key(payload: Mapping[str, Any]) -> str:
    """Fixture key for a search payload."""
    blob = json.dumps(dict(payload), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class SearchHit:
    url: str
    title: str
    snippet: str
    rank: int
    domain: str

    def to_dict(self) -> dict[str, Any]:
        return {"url": self.url, "title": self.title, "snippet": self.snippet,
                "rank": self.rank, "domain": self.domain}


def parse_organic(doc: Any) -> list[SearchHit]:
    if not isinstance(doc, Mapping):
        raise MalformedResponse("search reply is not a JSON object")
    organic = doc.get("organic", [])
    if not isinstance(organic, list):
        raise MalformedResponse("'organic' is not a list")
    hits: list[SearchHit] = []
    for entry in organic:
        if not isinstance(entry, Mapping) or not isinstance(entry.get("link"), str):
            logger.debug("skipping organic entry without a link: %r", entry)
            continue
        try:
            domain = normalize_domain(entry["link"])
        except ValueError:
            continue
        hits.append(SearchHit(url=entry["link"], title=str(entry.get("title", "")),
                              snippet=str(entry.get("snippet", "")), rank=len(hits) + 1,
                              domain=domain))
    return hits


class SearchClient:
    """POSTs ``{"q", "num", "gl", "tbs"}`` to a Serper-compatible endpoint.

    Pass an ``httpx.Client`` with a replay transport to run offline.
    """

    def __init__(self, endpoint: str = SERPER_ENDPOINT, api_key_env_var: str = "SERPER_API_KEY",
                 client: httpx.Client | None = None, timeout: float = 15.0):
        self.endpoint = endpoint
        self.api_key_env_var = api_key_env_var
        self._client = client or httpx.Client()
        self.timeout = timeout

    def search(self, request: SearchRequest) -> list[SearchHit]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env_var)
        if key:
            headers["X-API-KEY"] = key
        try:
            resp = self._client.post(self.endpoint, json=request.payload(), headers=headers,
                                     timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise Timeout(f"search timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"search request failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"search API rejected credentials ({resp.status_code})")
        if resp.status_code == 402:
            raise QuotaExceeded("search API credits exhausted")
        if resp.status_code == 429:
            raise RateLimited("search API rate limited the request")
        if resp.status_code >= 400:
            raise TransportError(f"search API returned {resp.status_code}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise MalformedResponse("search reply is not JSON") from exc
        return parse_organic(doc)
