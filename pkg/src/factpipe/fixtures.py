"""Record/replay fixture bundles for every external service.

A bundle directory looks like::

    llm.json          {fingerprint: reply}
    mbfc.json         {domain: {"factuality": ..., "bias": ...}}
    search/<key>.json {"request": payload, "response": serper reply}
    pages/<key>.json  {"url", "status", "headers", "body"}

Search fixtures are keyed by a hash of the request payload, pages by a hash
of the URL, LLM replies by prompt fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx

from factpipe.credibility import FixtureMbfcClient, normalize_domain
from factpipe.errors import FixtureMiss
from factpipe.llm.gateway import MockBackend, fingerprint
from factpipe.llm.templates import TemplateName
from factpipe.retrieval.search import SearchRequest, payload_key


def url_key(url: str) -> str:
    return hashlib.sha256(str(httpx.URL(url)).encode("utf-8")).hexdigest()[:32]


def _dump(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


@dataclass
class FixtureBundle:
    llm: dict[str, str] = field(default_factory=dict)
    search: dict[str, dict[str, Any]] = field(default_factory=dict)
    pages: dict[str, dict[str, Any]] = field(default_factory=dict)
    mbfc: dict[str, dict[str, Any]] = field(default_factory=dict)

    # -- authoring --------------------------------------------------------

    def add_llm(self, template: TemplateName | str, bindings: Mapping[str, Any], reply: str) -> str:
        key = fingerprint(template, {k: str(v) for k, v in bindings.items()})
        self.llm[key] = reply
        return key

    def add_search(self, request: SearchRequest | Mapping[str, Any],
                   organic: Sequence[Mapping[str, Any]] | None = None,
                   response: Mapping[str, Any] | None = None) -> str:
        payload = request.payload() if isinstance(request, SearchRequest) else dict(request)
        if response is None:
            response = {"searchParameters": payload, "organic": [dict(o) for o in organic or []]}
        key = payload_key(payload)
        self.search[key] = {"request": payload, "response": dict(response)}
        return key

    def add_page(self, url: str, body: str, status: int = 200,
                 headers: Mapping[str, str] | None = None) -> str:
        hdrs = {"content-type": "text/html; charset=utf-8"}
        hdrs.update({k.lower(): v for k, v in (headers or {}).items()})
        key = url_key(url)
        self.pages[key] = {"url": str(httpx.URL(url)), "status": status, "headers": hdrs,
                           "body": body}
        return key

    def add_redirect(self, url: str, location: str, status: int = 302) -> str:
        return self.add_page(url, "", status=status, headers={"location": location})

    def add_mbfc(self, domain: str, factuality: str, bias: str) -> None:
        self.mbfc[normalize_domain(domain)] = {"factuality": factuality, "bias": bias}

    # -- persistence ------------------------------------------------------

    def save(self, directory: str | Path) -> Path:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        _dump(root / "llm.json", self.llm)
        _dump(root / "mbfc.json", self.mbfc)
        for key, doc in self.search.items():
            _dump(root / "search" / f"{key}.json", doc)
        for key, doc in self.pages.items():
            _dump(root / "pages" / f"{key}.json", doc)
        return root

    @classmethod
    def load(cls, directory: str | Path) -> "FixtureBundle":
        root = Path(directory)
        if not root.is_dir():
            raise FileNotFoundError(f"fixture bundle {root} does not exist")

        def read(path: Path) -> Any:
            return json.loads(path.read_text(encoding="utf-8"))

        bundle = cls()
        if (root / "llm.json").exists():
            bundle.llm = read(root / "llm.json")
        if (root / "mbfc.json").exists():
            bundle.mbfc = read(root / "mbfc.json")
        for path in sorted((root / "search").glob("*.json")):
            bundle.search[path.stem] = read(path)
        for path in sorted((root / "pages").glob("*.json")):
            bundle.pages[path.stem] = read(path)
        return bundle

    # -- replay -----------------------------------------------------------

    def llm_backend(self) -> MockBackend:
        return MockBackend(self.llm)

    def mbfc_client(self) -> FixtureMbfcClient:
        return FixtureMbfcClient(self.mbfc)

    def search_transport(self) -> "SearchReplayTransport":
        return SearchReplayTransport({k: v["response"] for k, v in self.search.items()})

    def page_transport(self) -> "PageReplayTransport":
        return PageReplayTransport(self.pages)


class SearchReplayTransport(httpx.BaseTransport):
    def __init__(self, responses: Mapping[str, Any]):
        self.responses = dict(responses)
        self.calls: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.read() or b"{}")
        with self._lock:
            self.calls.append(payload)
        key = payload_key(payload)
        if key not in self.responses:
            raise FixtureMiss(f"no recorded search response for {payload!r}")
        return httpx.Response(200, json=self.responses[key], request=request)


class PageReplayTransport(httpx.BaseTransport):
    def __init__(self, pages: Mapping[str, Mapping[str, Any]]):
        self.pages = dict(pages)
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        url = str(request.url)
        with self._lock:
            self.calls.append(url)
        page = self.pages.get(url_key(url))
        if page is None:
            raise FixtureMiss(f"no recorded page for {url}")
        return httpx.Response(page["status"], headers=page.get("headers", {}),
                              content=page.get("body", "").encode("utf-8"), request=request)


class RecordingTransport(httpx.BaseTransport):
    """Forwards to ``inner`` and copies each exchange into ``bundle``."""

    def __init__(self, inner: httpx.BaseTransport, bundle: FixtureBundle, kind: str):
        if kind not in ("search", "pages"):
            raise ValueError(f"unknown recording kind {kind!r}")
        self.inner = inner
        self.bundle = bundle
        self.kind = kind
        self._lock = threading.Lock()

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        body = request.read()
        response = self.inner.handle_request(request)
        content = response.read()
        with self._lock:
            if self.kind == "search":
                payload = json.loads(body or b"{}")
                try:
                    doc = json.loads(content)
                except ValueError:
                    doc = {"organic": []}
                self.bundle.add_search(payload, response=doc)
            else:
                self.bundle.add_page(str(request.url), content.decode("utf-8", errors="replace"),
                                     status=response.status_code,
                                     headers={k: v for k, v in response.headers.items()
                                              if k.lower() in ("content-type", "location")})
        # content is already decoded, so encoding/length headers no longer apply
        headers = [(k, v) for k, v in response.headers.items()
                   if k.lower() not in ("content-encoding", "content-length", "transfer-encoding")]
        return httpx.Response(response.status_code, headers=headers, content=content,
                              request=request)
