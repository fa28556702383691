"""Publisher credibility: MBFC category filter with a heuristic fallback."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Protocol
from urllib.parse import urlsplit

import httpx

from factpipe.errors import AuthFailure, QuotaExceeded, TransportError

logger = logging.getLogger(__name__)


class Factuality(str, Enum):
    VERY_HIGH = "VeryHigh"
    HIGH = "High"
    MOSTLY_FACTUAL = "MostlyFactual"
    MIXED = "Mixed"
    LOW = "Low"
    VERY_LOW = "VeryLow"
    UNKNOWN = "Unknown"


class Bias(str, Enum):
    LEAST_BIASED = "LeastBiased"
    LEFT_CENTER = "LeftCenter"
    RIGHT_CENTER = "RightCenter"
    LEFT = "Left"
    RIGHT = "Right"
    EXTREME_LEFT = "ExtremeLeft"
    EXTREME_RIGHT = "ExtremeRight"
    PRO_SCIENCE = "ProScience"
    QUESTIONABLE = "Questionable"
    SATIRE = "Satire"
    CONSPIRACY_PSEUDOSCIENCE = "ConspiracyPseudoscience"
    UNKNOWN = "Unknown"


class RatingSource(str, Enum):
    MBFC_LISTED = "MbfcListed"
    FALLBACK = "Fallback"


ACCEPTED_FACTUALITY = frozenset({Factuality.VERY_HIGH, Factuality.HIGH, Factuality.MOSTLY_FACTUAL})
ACCEPTED_BIAS = frozenset({Bias.LEAST_BIASED, Bias.LEFT_CENTER, Bias.RIGHT_CENTER, Bias.PRO_SCIENCE})

_FACTUALITY_NAMES = {
    "very high": Factuality.VERY_HIGH,
    "high": Factuality.HIGH,
    "mostly factual": Factuality.MOSTLY_FACTUAL,
    "mixed": Factuality.MIXED,
    "low": Factuality.LOW,
    "very low": Factuality.VERY_LOW,
}
_BIAS_NAMES = {
    "least biased": Bias.LEAST_BIASED,
    "left center": Bias.LEFT_CENTER,
    "right center": Bias.RIGHT_CENTER,
    "left": Bias.LEFT,
    "right": Bias.RIGHT,
    "extremely left": Bias.EXTREME_LEFT,
    "extreme left": Bias.EXTREME_LEFT,
    "extremely right": Bias.EXTREME_RIGHT,
    "extreme right": Bias.EXTREME_RIGHT,
    "pro science": Bias.PRO_SCIENCE,
    "questionable": Bias.QUESTIONABLE,
    "questionable source": Bias.QUESTIONABLE,
    "satire": Bias.SATIRE,
    "conspiracy pseudoscience": Bias.CONSPIRACY_PSEUDOSCIENCE,
}


def _category_key(value: str) -> str:
    # "Left-Center", "left_center", "LeftCenter" -> "left center"
    spaced = re.sub(r"(?<=[a-z])(?=[A-Z])", " ", value.strip())
    return re.sub(r"[\s\-_]+", " ", spaced).lower()


def parse_factuality(value: Any) -> Factuality:
    if not isinstance(value, str):
        return Factuality.UNKNOWN
    return _FACTUALITY_NAMES.get(_category_key(value), Factuality.UNKNOWN)


def parse_bias(value: Any) -> Bias:
    if not isinstance(value, str):
        return Bias.UNKNOWN
    return _BIAS_NAMES.get(_category_key(value), Bias.UNKNOWN)


def normalize_domain(value: str) -> str:
    """Lower-cased host with scheme, credentials, port, path and ``www.`` removed.

    >>> normalize_domain("HTTPS://Example-News.com/path")
    'example-news.com'
    """
    text = (value or "").strip()
    if not text:
        raise ValueError("empty domain")
    if "//" not in text:
        text = "//" + text
    host = urlsplit(text).hostname or ""
    host = host.strip().rstrip(".").lower()
    while host.startswith("www."):
        host = host[4:]
    if not host or "/" in host:
        raise ValueError(f"cannot extract a domain from {value!r}")
    return host


def parent_domains(domain: str) -> list[str]:
    """``a.b.example.com`` -> [a.b.example.com, b.example.com, example.com]."""
    labels = domain.split(".")
    if len(labels) <= 2:
        return [domain]
    return [".".join(labels[i:]) for i in range(len(labels) - 1)]


@dataclass(frozen=True)
class CredibilityRating:
    domain: str
    factuality: Factuality = Factuality.UNKNOWN
    bias: Bias = Bias.UNKNOWN
    source: RatingSource = RatingSource.FALLBACK

    def __post_init__(self):
        if not self.domain or "/" in self.domain:
            raise ValueError(f"invalid rating domain {self.domain!r}")

    def summary(self) -> str:
        if self.source is RatingSource.FALLBACK:
            return "not listed by MBFC; passed fallback credibility assessment"
        return f"MBFC factuality {self.factuality.value}, bias {self.bias.value}"

    def to_dict(self) -> dict[str, Any]:
        return {"domain": self.domain, "factuality": self.factuality.value,
                "bias": self.bias.value, "source": self.source.value}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CredibilityRating":
        return cls(d["domain"], Factuality(d["factuality"]), Bias(d["bias"]),
                   RatingSource(d["source"]))


def passes_filter(rating: CredibilityRating) -> bool:
    """True iff both categories are in the accepted sets for listed publishers."""
    if rating.source is not RatingSource.MBFC_LISTED:
        raise ValueError("passes_filter only applies to MBFC-listed ratings")
    return rating.factuality in ACCEPTED_FACTUALITY and rating.bias in ACCEPTED_BIAS


# -- MBFC clients ----------------------------------------------------------


class MbfcClient(Protocol):
    def get(self, domain: str) -> Mapping[str, Any] | None:
        """Raw ``{"factuality", "bias"}`` reply, or None when unlisted."""


class FixtureMbfcClient:
    """Offline MBFC database: ``{domain: {"factuality": ..., "bias": ...}}``."""

    def __init__(self, db: Mapping[str, Mapping[str, Any]]):
        self.db = {normalize_domain(k): v for k, v in db.items()}
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureMbfcClient":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def get(self, domain: str) -> Mapping[str, Any] | None:
        self.calls.append(domain)
        return self.db.get(domain)


class HttpMbfcClient:
    """``GET {endpoint}?domain=...`` against an MBFC-style JSON API."""

    def __init__(self, endpoint: str, api_key_env_var: str = "MBFC_API_KEY",
                 client: httpx.Client | None = None, timeout: float = 15.0):
        self.endpoint = endpoint
        self.api_key_env_var = api_key_env_var
        self._client = client or httpx.Client()
        self.timeout = timeout

    def get(self, domain: str) -> Mapping[str, Any] | None:
        headers = {}
        key = os.environ.get(self.api_key_env_var)
        if key:
            headers["X-API-KEY"] = key
        try:
            resp = self._client.get(self.endpoint, params={"domain": domain}, headers=headers,
                                    timeout=self.timeout)
        except httpx.TransportError as exc:
            raise TransportError(f"MBFC lookup for {domain} failed: {exc}") from exc
        if resp.status_code == 404:
            return None
        if resp.status_code in (401, 403):
            raise AuthFailure(f"MBFC API rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            raise QuotaExceeded("MBFC API quota exceeded")
        if resp.status_code >= 400:
            raise TransportError(f"MBFC API returned {resp.status_code}")
        try:
            return resp.json()
        except ValueError:
            return {"_malformed": resp.text[:200]}


class RecordingMbfcClient:
    def __init__(self, inner: MbfcClient):
        self.inner = inner
        self.recorded: dict[str, Mapping[str, Any] | None] = {}
        self._lock = threading.Lock()

    def get(self, domain: str) -> Mapping[str, Any] | None:
        reply = self.inner.get(domain)
        with self._lock:
            self.recorded[domain] = reply
        return reply


def lookup(domain: str, client: MbfcClient) -> CredibilityRating:
    """Resolve a domain (or its closest listed parent) against MBFC."""
    domain = normalize_domain(domain)
    for candidate in parent_domains(domain):
        reply = client.get(candidate)
        if reply is None:
            continue
        if not isinstance(reply, Mapping) or not {"factuality", "bias"} <= set(reply):
            logger.warning("malformed MBFC reply for %s; treating as unlisted", candidate)
            continue
        return CredibilityRating(domain, parse_factuality(reply["factuality"]),
                                 parse_bias(reply["bias"]), RatingSource.MBFC_LISTED)
    return CredibilityRating(domain)


# -- fallback heuristics ---------------------------------------------------


class SignalProvider(Protocol):
    def score(self, domain: str) -> float | None:
        """Score in [0, 1], or None when the signal is unavailable."""


class UnavailableSignal:
    def score(self, domain: str) -> float | None:
        return None


class StaticSignal:
    """Table-backed provider, mostly useful for tests and curated allow-lists."""

    def __init__(self, scores: Mapping[str, float]):
        self.scores = {normalize_domain(k): float(v) for k, v in scores.items()}

    def score(self, domain: str) -> float | None:
        return self.scores.get(normalize_domain(domain))


@dataclass(frozen=True)
class FallbackSignal:
    suffix_score: float
    history_score: float | None = None
    citation_score: float | None = None

    @property
    def total(self) -> float:
        parts = [s for s in (self.suffix_score, self.history_score, self.citation_score)
                 if s is not None]
        return sum(parts) / len(parts)

    def to_dict(self) -> dict[str, Any]:
        return {"suffix_score": self.suffix_score, "history_score": self.history_score,
                "citation_score": self.citation_score, "total": self.total}


DEFAULT_FALLBACK_THRESHOLD = 0.7


def suffix_score(domain: str) -> float:
    labels = normalize_domain(domain).split(".")
    # second-level forms too: service.gov.uk, unimelb.edu.au
    if labels[-1] in ("gov", "edu") or (len(labels) >= 3 and labels[-2] in ("gov", "edu")):
        return 1.0
    if labels[-1] == "org" or (len(labels) >= 3 and labels[-2] == "org"):
        return 0.7
    return 0.4


def _clamp(value: float | None, name: str) -> float | None:
    if value is None:
        return None
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return float(value)


def fallback_assess(domain: str, history_score: float | None = None,
                    citation_score: float | None = None,
                    threshold: float = DEFAULT_FALLBACK_THRESHOLD) -> tuple[FallbackSignal, bool]:
    """Equal-weight mean of whichever signals are available, gated at ``threshold``."""
    signal = FallbackSignal(suffix_score(domain), _clamp(history_score, "history_score"),
                            _clamp(citation_score, "citation_score"))
    return signal, signal.total >= threshold


@dataclass(frozen=True)
class Assessment:
    rating: CredibilityRating
    passed: bool
    fallback: FallbackSignal | None = None


class CredibilityEngine:
    """Cached per-domain credibility decisions for one run."""

    def __init__(self, client: MbfcClient, history: SignalProvider | None = None,
                 citation: SignalProvider | None = None,
                 threshold: float = DEFAULT_FALLBACK_THRESHOLD):
        self.client = client
        self.history = history or UnavailableSignal()
        self.citation = citation or UnavailableSignal()
        self.threshold = threshold
        self._cache: dict[str, Assessment] = {}
        self._lock = threading.Lock()

    def assess(self, domain: str) -> Assessment:
        domain = normalize_domain(domain)
        with self._lock:
            cached = self._cache.get(domain)
        if cached is not None:
            return cached
        rating = lookup(domain, self.client)
        if rating.source is RatingSource.MBFC_LISTED:
            result = Assessment(rating, passes_filter(rating))
        else:
            signal, ok = fallback_assess(domain, self.history.score(domain),
                                         self.citation.score(domain), self.threshold)
            result = Assessment(rating, ok, signal)
        with self._lock:
            self._cache.setdefault(domain, result)
            return self._cache[domain]

    def is_credible(self, domain: str) -> bool:
        return self.assess(domain).passed
