"""Run configuration: one self-describing JSON document."""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from factpipe.claims import Dataset
from factpipe.credibility import DEFAULT_FALLBACK_THRESHOLD
from factpipe.errors import ConfigError
from factpipe.llm.gateway import ROLES, LlmBackendConfig
from factpipe.queries import DEFAULT_K, MAX_K, MIN_K
from factpipe.retrieval import fetch as fetch_defaults
from factpipe.retrieval.search import SERPER_ENDPOINT


@dataclass(frozen=True)
class SearchSettings:
    endpoint: str = SERPER_ENDPOINT
    api_key_env_var: str = "SERPER_API_KEY"
    num_results: int = 10
    region: str = "us"
    timeout: float = 15.0


@dataclass(frozen=True)
class MbfcSettings:
    endpoint: str | None = None
    api_key_env_var: str = "MBFC_API_KEY"
    # local JSON database used instead of the API when set
    db_path: str | None = None
    fallback_threshold: float = DEFAULT_FALLBACK_THRESHOLD


@dataclass(frozen=True)
class FetchSettings:
    timeout: float = fetch_defaults.DEFAULT_TIMEOUT
    max_bytes: int = fetch_defaults.DEFAULT_MAX_BYTES
    max_redirects: int = fetch_defaults.DEFAULT_MAX_REDIRECTS


@dataclass(frozen=True)
class RetrySettings:
    parse: int = 1
    transport: int = 2
    backoff: tuple[float, ...] = (1.0, 4.0)


@dataclass(frozen=True)
class Parallelism:
    claims: int = 4
    subclaims: int = 4
    fetches: int = 8


@dataclass(frozen=True)
class PipelineConfig:
    k_queries: int = DEFAULT_K
    dataset: Dataset | None = None
    backends: Mapping[str, LlmBackendConfig] = field(
        default_factory=lambda: {"default": LlmBackendConfig()})
    retries: RetrySettings = RetrySettings()
    parallelism: Parallelism = Parallelism()
    rate_limit_per_second: float | None = None
    offline_mode: bool = False
    fixtures_dir: str | None = None
    data_dir: str = "factpipe-data"
    search: SearchSettings = SearchSettings()
    mbfc: MbfcSettings = MbfcSettings()
    fetch: FetchSettings = FetchSettings()
    top_m: int = 1
    claim_timeout: float = 600.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not MIN_K <= self.k_queries <= MAX_K:
            raise ConfigError(f"k_queries must be within {MIN_K}..{MAX_K}, got {self.k_queries}")
        if self.top_m < 1:
            raise ConfigError("top_m must be >= 1")
        if not 1 <= self.search.num_results <= 100:
            raise ConfigError("search.num_results must be within 1..100")
        for name in ("claims", "subclaims", "fetches"):
            if getattr(self.parallelism, name) < 1:
                raise ConfigError(f"parallelism.{name} must be >= 1")
        unknown_roles = set(self.backends) - set(ROLES) - {"default"}
        if unknown_roles:
            raise ConfigError(f"unknown backend roles: {sorted(unknown_roles)}")
        if self.offline_mode and not self.fixtures_dir:
            raise ConfigError("offline_mode requires fixtures_dir")
        if self.claim_timeout <= 0:
            raise ConfigError("claim_timeout must be positive")

    def backend_for(self, role: str) -> LlmBackendConfig:
        return self.backends.get(role) or self.backends.get("default") or LlmBackendConfig()

    def with_overrides(self, **changes: Any) -> "PipelineConfig":
        """Apply non-None overrides (CLI flags win over the file)."""
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "k_queries": self.k_queries,
            "dataset": self.dataset.value if self.dataset else None,
            "backends": {role: b.to_dict() for role, b in self.backends.items()},
            "retries": {**dataclasses.asdict(self.retries), "backoff": list(self.retries.backoff)},
            "parallelism": dataclasses.asdict(self.parallelism),
            "rate_limit_per_second": self.rate_limit_per_second,
            "offline_mode": self.offline_mode,
            "fixtures_dir": self.fixtures_dir,
            "data_dir": self.data_dir,
            "search": dataclasses.asdict(self.search),
            "mbfc": dataclasses.asdict(self.mbfc),
            "fetch": dataclasses.asdict(self.fetch),
            "top_m": self.top_m,
            "claim_timeout": self.claim_timeout,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base_dir: str | Path | None = None) -> "PipelineConfig":
        """Build from a JSON document; relative paths resolve against ``base_dir``."""
        if not isinstance(doc, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        try:
            for key, value in doc.items():
                if key == "dataset":
                    kwargs[key] = Dataset.parse(value) if value else None
                elif key == "backends":
                    kwargs[key] = {role: LlmBackendConfig.from_dict(b) for role, b in value.items()}
                elif key == "retries":
                    v = dict(value)
                    if "backoff" in v:
                        v["backoff"] = tuple(float(x) for x in v["backoff"])
                    kwargs[key] = RetrySettings(**v)
                elif key in _NESTED:
                    kwargs[key] = _NESTED[key](**value)
                else:
                    kwargs[key] = value
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        if base_dir is not None:
            for key in ("fixtures_dir", "data_dir"):
                if kwargs.get(key):
                    kwargs[key] = str(Path(base_dir) / kwargs[key])
            mbfc = kwargs.get("mbfc")
            if mbfc is not None and mbfc.db_path:
                kwargs["mbfc"] = dataclasses.replace(mbfc, db_path=str(Path(base_dir) / mbfc.db_path))
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        """Read a config file. Relative paths inside it are taken relative to the CWD."""
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


_NESTED = {"parallelism": Parallelism, "search": SearchSettings, "mbfc": MbfcSettings,
           "fetch": FetchSettings}
