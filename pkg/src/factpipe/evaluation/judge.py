"""LLM-as-judge ranking of competing explanations."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from factpipe.claims import Claim
from factpipe.errors import InvalidPermutation, JudgeParseError, NoJsonFound
from factpipe.llm.gateway import ChatBackend, ask
from factpipe.llm.jsonparse import extract_json_object
from factpipe.llm.templates import EXPLANATION_JUDGE

CRITERIA = ("Coverage", "Soundness", "Readability")
N_METHODS = 4


@dataclass(frozen=True)
class JudgeRanking:
    """criterion -> method -> rank, each criterion a permutation of 1..n."""

    ranks: Mapping[str, Mapping[str, int]]

    def __post_init__(self):
        methods = None
        for criterion, by_method in self.ranks.items():
            expected = set(range(1, len(by_method) + 1))
            if sorted(by_method.values()) != sorted(expected) or not by_method:
                raise InvalidPermutation(
                    f"{criterion} ranks {sorted(by_method.values())} are not a permutation "
                    f"of 1..{len(by_method)}")
            if methods is None:
                methods = set(by_method)
            elif set(by_method) != methods:
                raise InvalidPermutation(f"{criterion} ranks a different method set")

    @property
    def methods(self) -> tuple[str, ...]:
        first = next(iter(self.ranks.values()), {})
        return tuple(sorted(first))

    def to_dict(self) -> dict[str, dict[str, int]]:
        return {c: dict(sorted(m.items())) for c, m in self.ranks.items()}


def judge_cell(claim: Claim, labeled: Mapping[str, tuple[str, str]]) -> str:
    doc = {
        "original_claim": claim.text,
        "label": claim.gold_label.value if claim.gold_label else None,
        "explanations": [{"method": m, "label": label, "explanation": text}
                         for m, (label, text) in labeled.items()],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)


def _criterion_ranks(block: Any, criterion: str, methods: set[str]) -> dict[str, int]:
    if not isinstance(block, Mapping) or not block:
        raise JudgeParseError(f"{criterion} block is not an object")
    keys = [str(k).strip() for k in block]
    if all(k.isdigit() for k in keys):
        # rank -> method, the prompt's layout
        out: dict[str, int] = {}
        for rank, method in block.items():
            if not isinstance(method, str) or method.strip() not in methods:
                raise JudgeParseError(f"{criterion}: unknown method {method!r}")
            if method.strip() in out:
                raise InvalidPermutation(f"{criterion}: {method!r} ranked twice")
            out[method.strip()] = int(rank)
    else:
        out = {}
        for method, rank in block.items():
            if method.strip() not in methods:
                raise JudgeParseError(f"{criterion}: unknown method {method!r}")
            try:
                out[method.strip()] = int(rank)
            except (TypeError, ValueError):
                raise JudgeParseError(f"{criterion}: rank {rank!r} is not an integer") from None
    if set(out) != methods or sorted(out.values()) != list(range(1, len(methods) + 1)):
        raise InvalidPermutation(f"{criterion}: ranks {out} are not a permutation")
    return out


def parse_judge_reply(reply: str, methods: set[str]) -> JudgeRanking:
    try:
        doc = extract_json_object(reply)
    except NoJsonFound as exc:
        raise JudgeParseError(str(exc)) from exc
    if not isinstance(doc, Mapping):
        raise JudgeParseError("judge reply is not a JSON object")
    ranking = doc.get("ranking", doc)
    if not isinstance(ranking, Mapping):
        raise JudgeParseError("'ranking' is not an object")
    ranks = {}
    for criterion in CRITERIA:
        if criterion not in ranking:
            raise JudgeParseError(f"missing {criterion} block")
        ranks[criterion] = _criterion_ranks(ranking[criterion], criterion, methods)
    return JudgeRanking(ranks)


def judge_explanations(claim: Claim, labeled_explanations: Mapping[str, tuple[str, str]],
                       backend: ChatBackend, model_id: str = "") -> JudgeRanking:
    """Rank four methods' ``(label, explanation)`` pairs for one claim."""
    if len(labeled_explanations) != N_METHODS:
        raise ValueError(f"expected {N_METHODS} methods, got {len(labeled_explanations)}")
    reply = ask(backend, EXPLANATION_JUDGE,
                {"cell": judge_cell(claim, labeled_explanations)}, model_id)
    return parse_judge_reply(reply, set(labeled_explanations))
