"""Query generation: k search questions per verifiable subclaim."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

from factpipe.claims import Subclaim, SubclaimRef
from factpipe.errors import EmptyQuerySet, NoJsonFound, QueryParseError
from factpipe.llm.gateway import ChatBackend, ask
from factpipe.llm.jsonparse import extract_json_object
from factpipe.llm.templates import QUERY_GENERATION

MIN_K, MAX_K = 1, 5
DEFAULT_K = 3


@dataclass(frozen=True)
class QuerySet:
    subclaim_ref: SubclaimRef
    queries: tuple[str, ...]

    def __post_init__(self):
        if not self.queries:
            raise ValueError("a QuerySet needs at least one query")
        if any(not q.strip() for q in self.queries):
            raise ValueError("queries must be non-empty strings")
        folded = [q.casefold() for q in self.queries]
        if len(set(folded)) != len(folded):
            raise ValueError("queries must be unique (case-insensitive)")

    def to_dict(self) -> dict[str, Any]:
        return {"subclaim_ref": self.subclaim_ref.to_dict(), "queries": list(self.queries)}


def query_bindings(subclaim: Subclaim, k: int) -> dict[str, str]:
    return {"k": str(k), "claim": subclaim.predicate.raw_line}


def dedupe_queries(questions: Sequence[Any], k: int) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for q in questions:
        if not isinstance(q, str):
            continue
        q = q.strip()
        if not q or q.casefold() in seen:
            continue
        seen.add(q.casefold())
        out.append(q)
        if len(out) == k:
            break
    return out


def _questions_from_reply(doc: Any, raw_line: str) -> list[Any]:
    if isinstance(doc, dict):
        # some models drop the outer array for a single subclaim
        doc = [doc]
    if not isinstance(doc, list) or not doc:
        raise QueryParseError("expected a JSON array of {claim, questions} entries")
    entries = [e for e in doc if isinstance(e, dict)]
    if not entries:
        raise QueryParseError("no {claim, questions} objects in reply")
    target = raw_line.strip()
    chosen = next((e for e in entries if str(e.get("claim", "")).strip() == target), None)
    if chosen is None:
        # paraphrased claim text: fall back to position (one subclaim per call -> first)
        chosen = entries[0]
    questions = chosen.get("questions")
    if not isinstance(questions, list):
        raise QueryParseError("entry has no 'questions' list")
    return questions


def parse_query_reply(reply: str, subclaim: Subclaim, k: int) -> QuerySet:
    try:
        doc = extract_json_object(reply)
    except NoJsonFound as exc:
        raise QueryParseError(str(exc)) from exc
    queries = dedupe_queries(_questions_from_reply(doc, subclaim.predicate.raw_line), k)
    if not queries:
        raise EmptyQuerySet(f"no usable questions for subclaim {subclaim.index}")
    return QuerySet(subclaim.ref, tuple(queries))


class QueryAgent:
    def __init__(self, backend: ChatBackend, model_id: str = "",
                 retry: Callable[[str, Callable[[], Any]], Any] | None = None):
        self.backend = backend
        self.model_id = model_id
        self._retry = retry or (lambda _stage, thunk: thunk())

    def generate_queries(self, subclaim: Subclaim, k: int = DEFAULT_K) -> QuerySet:
        if not MIN_K <= k <= MAX_K:
            raise ValueError(f"k must be between {MIN_K} and {MAX_K}, got {k}")

        def attempt() -> QuerySet:
            reply = ask(self.backend, QUERY_GENERATION, query_bindings(subclaim, k), self.model_id)
            return parse_query_reply(reply, subclaim, k)

        return self._retry("query", attempt)
