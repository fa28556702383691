"""Chat-completion backends: live HTTP, scripted mock, and a recorder."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from factpipe.errors import (
    AuthFailure,
    ConfigError,
    MalformedResponse,
    MockMiss,
    RateLimited,
    Timeout,
    TransportError,
)
from factpipe.llm.templates import PromptTemplate, TemplateName, render

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
ENDPOINT_ENV = "FACTPIPE_LLM_ENDPOINT"


def fingerprint(template: TemplateName | str | None, bindings: Mapping[str, str] | None,
                user: str = "") -> str:
    """Stable key for a prompt: template name plus a hash of its bindings.

    Editing a template body doesn't change the key, but any change in what
    was bound into it does, so stale fixtures miss loudly.
    """
    if template is None:
        return "raw:" + hashlib.sha256(user.encode("utf-8")).hexdigest()[:24]
    name = TemplateName(template).value
    blob = json.dumps(dict(bindings or {}), sort_keys=True, ensure_ascii=False)
    return f"{name}:{hashlib.sha256(blob.encode('utf-8')).hexdigest()[:24]}"


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    user: str
    system: str | None = None
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    # provenance, used only for fingerprinting
    template: TemplateName | None = None
    bindings: Mapping[str, str] | None = None

    def __post_init__(self):
        if not self.user:
            raise ValueError("ChatRequest.user must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def from_template(cls, template: PromptTemplate, bindings: Mapping[str, str],
                      model_id: str = "", **kwargs: Any) -> "ChatRequest":
        bound = {k: str(v) for k, v in bindings.items()}
        return cls(model_id=model_id, user=render(template, bound), template=template.name,
                   bindings=bound, **kwargs)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.template, self.bindings, self.user)


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


@dataclass(frozen=True)
class LlmBackendConfig:
    endpoint_url: str = DEFAULT_ENDPOINT
    api_key_env_var: str = "LLM_API_KEY"
    model_id: str = "gpt-4o-mini"
    retry_limit: int = 2
    backoff: tuple[float, ...] = (1.0, 4.0)
    timeout: float = 60.0
    max_tokens: int = 1024

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LlmBackendConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown backend keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "backoff" in kwargs:
            kwargs["backoff"] = tuple(float(x) for x in kwargs["backoff"])
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {"endpoint_url": self.endpoint_url, "api_key_env_var": self.api_key_env_var,
                "model_id": self.model_id, "retry_limit": self.retry_limit,
                "backoff": list(self.backoff), "timeout": self.timeout,
                "max_tokens": self.max_tokens}


def with_retries(call: Callable[[], str], retry_limit: int, backoff: Sequence[float],
                 sleep: Callable[[float], None] = time.sleep) -> str:
    """Run ``call``, retrying transient transport errors up to ``retry_limit`` times."""
    attempt = 0
    while True:
        try:
            return call()
        except TransportError as exc:
            if attempt >= retry_limit:
                raise
            delay = backoff[min(attempt, len(backoff) - 1)] if backoff else 0.0
            logger.info("transient failure (%s); retry %d/%d in %.1fs",
                        exc, attempt + 1, retry_limit, delay)
            sleep(delay)
            attempt += 1


class HttpChatBackend:
    """OpenAI-compatible ``/chat/completions`` client.

    The API key is read from the environment on every call and never stored.
    """

    def __init__(self, config: LlmBackendConfig, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._client = client or httpx.Client()
        self._sleep = sleep

    @property
    def endpoint(self) -> str:
        return os.environ.get(ENDPOINT_ENV) or self.config.endpoint_url

    def _payload(self, request: ChatRequest) -> dict[str, Any]:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        return {"model": request.model_id or self.config.model_id, "messages": messages,
                "temperature": request.temperature, "max_tokens": request.max_tokens}

    def _once(self, request: ChatRequest) -> str:
        key = os.environ.get(self.config.api_key_env_var)
        if not key:
            raise AuthFailure(f"environment variable {self.config.api_key_env_var} is not set")
        try:
            resp = self._client.post(self.endpoint, json=self._payload(request),
                                     headers={"Authorization": f"Bearer {key}"},
                                     timeout=request.timeout)
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"LLM endpoint rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            raise RateLimited("LLM endpoint rate limited the request")
        if resp.status_code >= 500:
            raise TransportError(f"LLM endpoint returned {resp.status_code}")
        if resp.status_code >= 400:
            # other client errors won't improve on retry
            raise MalformedResponse(f"LLM endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected chat-completion payload: {exc}") from exc

    def complete(self, request: ChatRequest) -> str:
        return with_retries(lambda: self._once(request), self.config.retry_limit,
                            self.config.backoff, self._sleep)


class MockBackend:
    """Deterministic backend answering from a fingerprint -> reply script."""

    def __init__(self, script: Mapping[str, str] | None = None):
        self.script: dict[str, str] = dict(script or {})
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def add(self, template: TemplateName | str, bindings: Mapping[str, str], reply: str) -> str:
        key = fingerprint(template, {k: str(v) for k, v in bindings.items()})
        self.script[key] = reply
        return key

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
        try:
            return self.script[request.fingerprint]
        except KeyError:
            raise MockMiss(request.fingerprint) from None

    def calls_for(self, template: TemplateName) -> list[ChatRequest]:
        return [c for c in self.calls if c.template == template]


def mock_backend(script: Mapping[str, str]) -> MockBackend:
    return MockBackend(script)


class RecordingBackend:
    """Pass-through that captures every reply under its fingerprint."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.recorded: dict[str, str] = {}
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        reply = self.inner.complete(request)
        with self._lock:
            self.recorded[request.fingerprint] = reply
        return reply


class TokenBucket:
    """Blocking token bucket; ``rate`` tokens per second, burst of ``capacity``."""

    def __init__(self, rate: float, capacity: int | None = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity or max(1, int(rate))
        self._tokens = float(self.capacity)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


class RateLimitedBackend:
    def __init__(self, inner: ChatBackend, bucket: TokenBucket):
        self.inner = inner
        self.bucket = bucket

    def complete(self, request: ChatRequest) -> str:
        self.bucket.acquire()
        return self.inner.complete(request)


ROLES = ("ingestion", "query", "extraction", "verdict", "judge")


@dataclass
class Gateway:
    """Per-agent-role backend assignment sharing one rate limiter."""

    default: ChatBackend
    overrides: dict[str, ChatBackend] = field(default_factory=dict)
    model_ids: dict[str, str] = field(default_factory=dict)
    bucket: TokenBucket | None = None

    def backend(self, role: str) -> ChatBackend:
        if role not in ROLES:
            raise KeyError(f"unknown agent role {role!r}")
        inner = self.overrides.get(role, self.default)
        return RateLimitedBackend(inner, self.bucket) if self.bucket else inner

    def ask(self, role: str, template: PromptTemplate, bindings: Mapping[str, str]) -> str:
        return ask(self.backend(role), template, bindings, self.model_ids.get(role, ""))


def ask(backend: ChatBackend, template: PromptTemplate, bindings: Mapping[str, str],
        model_id: str = "") -> str:
    """Render ``template`` and send it as a single-turn request."""
    return backend.complete(ChatRequest.from_template(template, bindings, model_id=model_id))
