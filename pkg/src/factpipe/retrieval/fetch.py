"""Full-page fetch and visible-text extraction."""

from __future__ import annotations

import re
import threading
from typing import Protocol
from urllib.parse import urljoin, urlsplit

import httpx
from bs4 import BeautifulSoup, Comment

from factpipe.errors import FetchError, FixtureMiss

DEFAULT_TIMEOUT = 15.0
DEFAULT_MAX_BYTES = 2 * 1024 * 1024
DEFAULT_MAX_REDIRECTS = 3

HTML_TYPES = ("text/html", "application/xhtml+xml")
NON_CONTENT_TAGS = ["script", "style", "noscript", "template", "svg", "canvas", "iframe",
                    "object", "embed", "head"]


def html_to_text(html: str) -> str:
    """Visible text of an HTML document, one block per line."""
    soup = BeautifulSoup(html, "html.parser")
    for tag in soup.find_all(NON_CONTENT_TAGS):
        tag.decompose()
    for comment in soup.find_all(string=lambda s: isinstance(s, Comment)):
        comment.extract()
    text = soup.get_text(separator="\n")
    lines = (re.sub(r"[ \t\r\f\v]+", " ", line).strip() for line in text.splitlines())
    return "\n".join(line for line in lines if line)


class Fetcher(Protocol):
    def fetch_full_text(self, url: str) -> str: ...


class HttpFetcher:
    """Plain-HTTP fetcher with redirect, size, and concurrency limits.

    JavaScript-rendered pages need a browser-backed ``Fetcher``; this one
    only sees the server-sent HTML.
    """

    def __init__(self, client: httpx.Client | None = None, timeout: float = DEFAULT_TIMEOUT,
                 max_bytes: int = DEFAULT_MAX_BYTES, max_redirects: int = DEFAULT_MAX_REDIRECTS,
                 max_parallel: int = 8):
        self._client = client or httpx.Client()
        self.timeout = timeout
        self.max_bytes = max_bytes
        self.max_redirects = max_redirects
        self._slots = threading.BoundedSemaphore(max(1, max_parallel))

    def _get(self, url: str) -> tuple[httpx.Response, bytes]:
        try:
            with self._client.stream("GET", url, timeout=self.timeout,
                                     follow_redirects=False) as resp:
                if resp.is_redirect:
                    return resp, b""
                declared = resp.headers.get("content-length")
                if declared and declared.isdigit() and int(declared) > self.max_bytes:
                    raise FetchError(url, "size cap exceeded")
                buf = bytearray()
                for chunk in resp.iter_bytes():
                    buf.extend(chunk)
                    if len(buf) > self.max_bytes:
                        raise FetchError(url, "size cap exceeded")
                return resp, bytes(buf)
        except httpx.TimeoutException as exc:
            raise FetchError(url, "timeout") from exc
        except httpx.HTTPError as exc:
            raise FetchError(url, f"transport error: {exc}") from exc
        except FixtureMiss as exc:
            raise FetchError(url, str(exc)) from exc

    def fetch_html(self, url: str) -> tuple[str, str]:
        """Return ``(final_url, html)`` after following at most ``max_redirects`` hops."""
        if urlsplit(url).scheme not in ("http", "https"):
            raise FetchError(url, "not an http(s) URL")
        current = url
        with self._slots:
            for _hop in range(self.max_redirects + 1):
                resp, body = self._get(current)
                if resp.is_redirect:
                    location = resp.headers.get("location")
                    if not location:
                        raise FetchError(current, "redirect without Location")
                    current = urljoin(current, location)
                    continue
                if resp.status_code >= 400:
                    raise FetchError(current, f"HTTP {resp.status_code}")
                ctype = resp.headers.get("content-type", "").split(";")[0].strip().lower()
                if ctype not in HTML_TYPES:
                    raise FetchError(current, f"non-HTML content ({ctype or 'unknown'})")
                encoding = resp.encoding or "utf-8"
                return current, body.decode(encoding, errors="replace")
        raise FetchError(url, f"more than {self.max_redirects} redirects")

    def fetch_full_text(self, url: str) -> str:
        _final, html = self.fetch_html(url)
        return html_to_text(html)


def fetch_full_text(url: str, fetcher: Fetcher | None = None) -> str:
    return (fetcher or HttpFetcher()).fetch_full_text(url)
