"""Claims, FOL predicates, verdicts, and the decomposition-output parser."""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from factpipe.errors import DecompositionParseError, MalformedPredicate
from factpipe.llm.jsonparse import iter_json_documents

logger = logging.getLogger(__name__)


class Dataset(str, Enum):
    HOVER = "HoVer"
    FEVEROUS = "FEVEROUS"
    SCIFACT_OPEN = "SciFactOpen"
    ADHOC = "AdHoc"

    @classmethod
    def parse(cls, value: str) -> "Dataset":
        key = re.sub(r"[^a-z]", "", value.lower())
        aliases = {"hover": cls.HOVER, "feverous": cls.FEVEROUS, "scifact": cls.SCIFACT_OPEN,
                   "scifactopen": cls.SCIFACT_OPEN, "adhoc": cls.ADHOC}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown dataset {value!r}") from None


class GoldLabel(str, Enum):
    SUPPORTED = "Supported"
    NOT_SUPPORTED = "NotSupported"


class Verifiability(str, Enum):
    VERIFIABLE = "Verifiable"
    NON_VERIFIABLE = "NonVerifiable"
    UNCLASSIFIED = "Unclassified"


class ClaimLabel(str, Enum):
    SUPPORTED = "Supported"
    NOT_SUPPORTED = "NotSupported"
    NO_VERIFIABLE_CONTENT = "NoVerifiableContent"


@dataclass(frozen=True)
class Claim:
    id: str
    text: str
    origin_dataset: Dataset | None = None
    gold_label: GoldLabel | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("claim text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "origin_dataset": self.origin_dataset.value if self.origin_dataset else None,
            "gold_label": self.gold_label.value if self.gold_label else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Claim":
        ds = d.get("origin_dataset")
        gl = d.get("gold_label")
        return cls(id=d["id"], text=d["text"],
                   origin_dataset=Dataset(ds) if ds else None,
                   gold_label=GoldLabel(gl) if gl else None)


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_CALL = re.compile(r"^\s*([^\s(]*)\s*\((.*)\)\s*$", re.DOTALL)


@dataclass(frozen=True)
class FolPredicate:
    name: str
    args: tuple[str, ...]
    verification_goal: str
    raw_line: str

    def __post_init__(self):
        if not _NAME.fullmatch(self.name):
            raise ValueError(f"invalid predicate name {self.name!r}")
        if not self.args:
            raise ValueError("predicate needs at least one argument")
        if not self.verification_goal:
            raise ValueError("verification goal must be non-empty")

    def render(self) -> str:
        """Normalised ``Name(a, b) ::: goal`` form."""
        return f"{self.name}({', '.join(self.args)}) ::: {self.verification_goal}"

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "args": list(self.args),
                "verification_goal": self.verification_goal, "raw_line": self.raw_line}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FolPredicate":
        return cls(d["name"], tuple(d["args"]), d["verification_goal"], d["raw_line"])


@dataclass(frozen=True)
class SubclaimRef:
    claim_id: str
    index: int

    def to_dict(self) -> dict[str, Any]:
        return {"claim_id": self.claim_id, "index": self.index}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubclaimRef":
        return cls(d["claim_id"], int(d["index"]))


@dataclass(frozen=True)
class Subclaim:
    claim_id: str
    index: int
    predicate: FolPredicate
    verifiability: Verifiability = Verifiability.UNCLASSIFIED
    classifier_explanation: str | None = None

    @property
    def ref(self) -> SubclaimRef:
        return SubclaimRef(self.claim_id, self.index)

    def to_dict(self) -> dict[str, Any]:
        return {"claim_id": self.claim_id, "index": self.index,
                "predicate": self.predicate.to_dict(),
                "verifiability": self.verifiability.value,
                "classifier_explanation": self.classifier_explanation}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Subclaim":
        return cls(d["claim_id"], int(d["index"]), FolPredicate.from_dict(d["predicate"]),
                   Verifiability(d["verifiability"]), d.get("classifier_explanation"))


@dataclass(frozen=True)
class SubclaimVerdict:
    subclaim_ref: SubclaimRef
    label: GoldLabel
    explanation: str

    def __post_init__(self):
        if not self.explanation:
            raise ValueError("verdict explanation must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {"subclaim_ref": self.subclaim_ref.to_dict(), "label": self.label.value,
                "explanation": self.explanation}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubclaimVerdict":
        return cls(SubclaimRef.from_dict(d["subclaim_ref"]), GoldLabel(d["label"]), d["explanation"])


@dataclass(frozen=True)
class ClaimVerdict:
    claim_id: str
    label: ClaimLabel
    subclaim_verdicts: tuple[SubclaimVerdict, ...] = field(default_factory=tuple)
    composite_explanation: str = ""

    def __post_init__(self):
        if self.label is not aggregate_verdicts(self.subclaim_verdicts):
            raise ValueError(f"label {self.label.value} inconsistent with subclaim verdicts")

    def to_dict(self) -> dict[str, Any]:
        return {"claim_id": self.claim_id, "label": self.label.value,
                "subclaim_verdicts": [v.to_dict() for v in self.subclaim_verdicts],
                "composite_explanation": self.composite_explanation}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ClaimVerdict":
        return cls(d["claim_id"], ClaimLabel(d["label"]),
                   tuple(SubclaimVerdict.from_dict(v) for v in d["subclaim_verdicts"]),
                   d["composite_explanation"])


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


# -- parsing ---------------------------------------------------------------


def _split_args(inner: str, line: str) -> list[str]:
    """Split on commas outside double quotes; nested parentheses are rejected."""
    args: list[str] = []
    buf: list[str] = []
    in_quote = False
    for ch in inner:
        if ch == '"':
            in_quote = not in_quote
        elif not in_quote and ch in "()":
            raise MalformedPredicate(line, "nested parentheses in arguments")
        if ch == "," and not in_quote:
            args.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    if in_quote:
        raise MalformedPredicate(line, "unterminated quote in arguments")
    args.append("".join(buf).strip())
    if any(not a for a in args):
        raise MalformedPredicate(line, "empty argument")
    return args


def parse_predicate_line(line: str) -> FolPredicate:
    """Parse ``Name(arg1, arg2) ::: verification goal``.

    Raises MalformedPredicate for anything that doesn't fit that shape.
    """
    if not isinstance(line, str) or not line.strip():
        raise MalformedPredicate(str(line), "empty line")
    head, sep, goal = line.partition(":::")
    if not sep:
        raise MalformedPredicate(line, "missing ':::' delimiter")
    goal = goal.strip()
    if not goal:
        raise MalformedPredicate(line, "empty verification goal")
    m = _CALL.match(head)
    if m is None:
        raise MalformedPredicate(line, "expected Name(args)")
    name, inner = m.group(1), m.group(2)
    if not _NAME.fullmatch(name):
        raise MalformedPredicate(line, f"invalid predicate name {name!r}")
    if not inner.strip():
        raise MalformedPredicate(line, "no arguments")
    args = _split_args(inner, line)
    return FolPredicate(name=name, args=tuple(args), verification_goal=goal, raw_line=line)


_HEADER = re.compile(r"predicates\s*:", re.IGNORECASE)
_JSON_TAIL = re.compile(r'"\s*[}\]]*\s*,?\s*$')


def _candidate_bodies(response_text: str) -> list[str]:
    bodies = []
    for doc in iter_json_documents(response_text):
        if isinstance(doc, dict) and isinstance(doc.get("response"), str):
            bodies.append(doc["response"])
    return bodies


def _parse_body(body: str, strict: bool) -> tuple[list[FolPredicate], list[MalformedPredicate]]:
    predicates: list[FolPredicate] = []
    malformed: list[MalformedPredicate] = []
    for line in body.splitlines():
        header = _HEADER.match(line.lstrip()) if strict else _HEADER.search(line)
        if header:
            line = line.lstrip()[header.end():] if strict else line[header.end():]
        if not line.strip():
            continue
        if not strict:
            # salvage mode: only lines that look like predicates, minus JSON debris
            if ":::" not in line:
                continue
            line = _JSON_TAIL.sub("", line)
        try:
            predicates.append(parse_predicate_line(line.strip()))
        except MalformedPredicate as exc:
            malformed.append(exc)
    return predicates, malformed


def parse_decomposition(response_text: str) -> tuple[list[FolPredicate], list[MalformedPredicate]]:
    """Parse a decomposition reply, returning good predicates and rejected lines.

    The JSON ``"response"`` string is preferred; when the reply is not valid
    JSON (the prompt's own examples never close their braces) every line
    containing ``:::`` is tried instead.

    A JSON reply whose ``"response"`` holds nothing but the header yields an
    empty list; a reply with no usable predicates anywhere raises
    DecompositionParseError.
    """
    text = response_text if isinstance(response_text, str) else ""
    explicit_empty = False
    for body in _candidate_bodies(text):
        predicates, malformed = _parse_body(body, strict=True)
        if predicates:
            return predicates, malformed
        if not malformed and not _HEADER.sub("", body, count=1).strip():
            explicit_empty = True
    predicates, malformed = _parse_body(text.replace("\\n", "\n"), strict=False)
    if predicates:
        return predicates, malformed
    if explicit_empty:
        return [], []
    raise DecompositionParseError("no parseable predicate lines in reply", malformed)


def parse_decomposition_response(response_text: str) -> list[FolPredicate]:
    predicates, malformed = parse_decomposition(response_text)
    if not predicates:
        raise DecompositionParseError("reply contains no predicates")
    for exc in malformed:
        logger.warning("skipping malformed predicate line: %s", exc)
    return predicates


def aggregate_verdicts(verdicts: Iterable[SubclaimVerdict | GoldLabel]) -> ClaimLabel:
    """Conjunction over subclaim labels; an empty conjunction is not a pass."""
    labels = [v.label if isinstance(v, SubclaimVerdict) else v for v in verdicts]
    if not labels:
        return ClaimLabel.NO_VERIFIABLE_CONTENT
    if all(label is GoldLabel.SUPPORTED for label in labels):
        return ClaimLabel.SUPPORTED
    return ClaimLabel.NOT_SUPPORTED


def subclaims_from_predicates(claim_id: str, predicates: Sequence[FolPredicate]) -> list[Subclaim]:
    return [Subclaim(claim_id=claim_id, index=i, predicate=p) for i, p in enumerate(predicates)]
