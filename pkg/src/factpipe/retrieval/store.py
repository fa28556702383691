"""Append-only evidence repository, one JSONL file per run."""

from __future__ import annotations

import datetime as dt
import json
import threading
from collections.abc import Mapping
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from factpipe.claims import SubclaimRef
from factpipe.credibility import CredibilityRating
from factpipe.errors import StorageError

EVIDENCE_FILE = "evidence.jsonl"


@dataclass(frozen=True)
class EvidenceRecord:
    subclaim_ref: SubclaimRef
    query: str
    url: str
    domain: str
    credibility: CredibilityRating
    passage: str | None
    retrieved_at: dt.datetime
    content_hash: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "subclaim_ref": self.subclaim_ref.to_dict(),
            "query": self.query,
            "url": self.url,
            "domain": self.domain,
            "credibility": self.credibility.to_dict(),
            "passage": self.passage,
            "retrieved_at": self.retrieved_at.isoformat(),
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvidenceRecord":
        return cls(
            subclaim_ref=SubclaimRef.from_dict(d["subclaim_ref"]),
            query=d["query"],
            url=d["url"],
            domain=d["domain"],
            credibility=CredibilityRating.from_dict(d["credibility"]),
            passage=d["passage"],
            retrieved_at=dt.datetime.fromisoformat(d["retrieved_at"]),
            content_hash=d["content_hash"],
        )


class MonotonicClock:
    """UTC wall clock that never repeats or goes backwards."""

    def __init__(self, source=None):
        self._source = source or (lambda: dt.datetime.now(dt.timezone.utc))
        self._last: dt.datetime | None = None
        self._lock = threading.Lock()

    def now(self) -> dt.datetime:
        with self._lock:
            t = self._source()
            if self._last is not None and t <= self._last:
                t = self._last + dt.timedelta(microseconds=1)
            self._last = t
            return t


_file_locks: dict[Path, threading.Lock] = {}
_file_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _file_locks_guard:
        return _file_locks.setdefault(path.resolve(), threading.Lock())


class EvidenceStore:
    """JSONL file of EvidenceRecords; appends are serialised per file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = _lock_for(self.path)

    def append(self, record: EvidenceRecord) -> None:
        self.append_many([record])

    def append_many(self, records: list[EvidenceRecord]) -> None:
        lines = "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(lines)
            except OSError as exc:
                raise StorageError(f"cannot append to {self.path}: {exc}") from exc

    def load_all(self) -> list[EvidenceRecord]:
        if not self.path.exists():
            return []
        records = []
        try:
            with open(self.path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        records.append(EvidenceRecord.from_dict(json.loads(line)))
                    except (ValueError, KeyError, TypeError) as exc:
                        raise StorageError(f"{self.path}:{line_no}: corrupt record ({exc})") from exc
        except OSError as exc:
            raise StorageError(f"cannot read {self.path}: {exc}") from exc
        return records


class StampingSink:
    """Stamps ``retrieved_at`` and appends in one critical section.

    Sharing one sink across a run keeps the run file ordered by time even
    when many claims gather evidence concurrently.
    """

    def __init__(self, store: EvidenceStore, clock: MonotonicClock | None = None):
        self.store = store
        self.clock = clock or MonotonicClock()
        self._lock = threading.Lock()

    def emit(self, record: EvidenceRecord) -> EvidenceRecord:
        with self._lock:
            stamped = replace(record, retrieved_at=self.clock.now())
            self.store.append(stamped)
            return stamped


class EvidenceRepository:
    """``<data_dir>/<run_id>/evidence.jsonl`` for every run."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)

    def run_dir(self, run_id: str) -> Path:
        if not run_id or "/" in run_id or run_id in (".", ".."):
            raise StorageError(f"invalid run id {run_id!r}")
        return self.data_dir / run_id

    def store(self, run_id: str) -> EvidenceStore:
        return EvidenceStore(self.run_dir(run_id) / EVIDENCE_FILE)

    def store_append(self, run_id: str, record: EvidenceRecord) -> None:
        self.store(run_id).append(record)

    def load_all(self, run_id: str) -> list[EvidenceRecord]:
        return self.store(run_id).load_all()
