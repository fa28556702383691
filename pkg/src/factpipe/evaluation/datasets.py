"""Benchmark loading and stratified sampling."""

from __future__ import annotations

import json
import random
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from factpipe.claims import Claim, Dataset, GoldLabel
from factpipe.errors import FormatError

DEFAULT_STRATUM = "all"

_LABELS = {
    "supported": GoldLabel.SUPPORTED,
    "supports": GoldLabel.SUPPORTED,
    "support": GoldLabel.SUPPORTED,
    "refuted": GoldLabel.NOT_SUPPORTED,
    "refutes": GoldLabel.NOT_SUPPORTED,
    "notsupported": GoldLabel.NOT_SUPPORTED,
    "contradict": GoldLabel.NOT_SUPPORTED,
}

_FEVEROUS_CHALLENGES = {
    "numericalreasoning": "Numerical",
    "numerical": "Numerical",
    "multihopreasoning": "Multi-hop",
    "multihop": "Multi-hop",
    "combiningtablesandtext": "Text+Table",
    "texttable": "Text+Table",
}


def map_label(raw: Any) -> GoldLabel:
    """Dataset label string to the binary gold label; ValueError if unknown."""
    if isinstance(raw, GoldLabel):
        return raw
    if not isinstance(raw, str):
        raise ValueError(f"label must be a string, got {raw!r}")
    key = re.sub(r"[^a-z]", "", raw.lower())
    if key not in _LABELS:
        raise ValueError(f"unknown label {raw!r}")
    return _LABELS[key]


@dataclass(frozen=True)
class DatasetExample:
    id: str
    claim: str
    gold_label: GoldLabel
    stratum: str = DEFAULT_STRATUM
    dataset: Dataset | None = None

    def __post_init__(self):
        if not self.claim.strip():
            raise ValueError("claim text must be non-empty")
        if not self.stratum:
            raise ValueError("stratum must be non-empty")

    def to_claim(self) -> Claim:
        return Claim(self.id, self.claim, self.dataset, self.gold_label)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "claim": self.claim, "label": self.gold_label.value,
                "stratum": self.stratum,
                "dataset": self.dataset.value if self.dataset else None}


def _scifact_label(evidence: Mapping[str, Any]) -> GoldLabel:
    labels = []
    for entry in evidence.values():
        items = entry if isinstance(entry, list) else [entry]
        labels.extend(map_label(i["label"]) for i in items if isinstance(i, Mapping))
    if not labels:
        raise ValueError("SciFact entry has no labelled evidence")
    # any contradicting rationale refutes the claim
    return GoldLabel.NOT_SUPPORTED if GoldLabel.NOT_SUPPORTED in labels else GoldLabel.SUPPORTED


def adapt_record(doc: Mapping[str, Any], fallback_id: str) -> DatasetExample:
    """Normalise a generic, HoVer, FEVEROUS or SciFact-style record."""
    claim = doc.get("claim")
    if not isinstance(claim, str):
        raise ValueError("missing 'claim' string")
    ex_id = str(doc.get("id", doc.get("uid", fallback_id)))
    dataset = Dataset.parse(doc["dataset"]) if doc.get("dataset") else None
    if "stratum" in doc:
        stratum = str(doc["stratum"])
        label = map_label(doc.get("label"))
    elif "num_hops" in doc:
        stratum = f"{int(doc['num_hops'])}-hop"
        label = map_label(doc.get("label"))
        dataset = dataset or Dataset.HOVER
    elif "challenge" in doc:
        key = re.sub(r"[^a-z]", "", str(doc["challenge"]).lower())
        stratum = _FEVEROUS_CHALLENGES.get(key, str(doc["challenge"]))
        label = map_label(doc.get("label"))
        dataset = dataset or Dataset.FEVEROUS
    elif isinstance(doc.get("evidence"), Mapping):
        stratum = DEFAULT_STRATUM
        label = (map_label(doc["label"]) if "label" in doc
                 else _scifact_label(doc["evidence"]))
        dataset = dataset or Dataset.SCIFACT_OPEN
    else:
        stratum = DEFAULT_STRATUM
        label = map_label(doc.get("label"))
    return DatasetExample(ex_id, claim, label, stratum or DEFAULT_STRATUM, dataset)


def load_dataset(path: str | Path, format: str = "jsonl") -> list[DatasetExample]:
    if format != "jsonl":
        raise ValueError(f"unsupported dataset format {format!r}")
    path = Path(path)
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if not isinstance(doc, Mapping):
                    raise ValueError("line is not a JSON object")
                examples.append(adapt_record(doc, f"{path.stem}-{line_no}"))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(line_no, str(exc)) from exc
    ids = [e.id for e in examples]
    if len(set(ids)) != len(ids):
        raise FormatError(0, "duplicate example ids")
    return examples


def _allocate(sizes: Mapping[Any, int], n: int) -> dict[Any, int]:
    """Largest-remainder apportionment of ``n`` over groups of the given sizes."""
    total = sum(sizes.values())
    if total == 0:
        return {k: 0 for k in sizes}
    quotas = {k: Fraction(n * s, total) for k, s in sizes.items()}
    alloc = {k: q.numerator // q.denominator for k, q in quotas.items()}
    short = n - sum(alloc.values())
    # ties go to the larger group, then key order, so allocation never depends on the seed
    order = sorted(sizes, key=lambda k: (-(quotas[k] - alloc[k]), -sizes[k], str(k)))
    for k in order[:short]:
        alloc[k] += 1
    return alloc


def stratified_sample(examples: Sequence[DatasetExample], n: int,
                      seed: int = 0) -> list[DatasetExample]:
    """Proportional per-(stratum, label) sample, returned in dataset order."""
    if not 0 <= n <= len(examples):
        raise ValueError(f"cannot sample {n} of {len(examples)} examples")
    groups: dict[tuple[str, str], list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault((ex.stratum, ex.gold_label.value), []).append(i)
    alloc = _allocate({k: len(v) for k, v in groups.items()}, n)
    rng = random.Random(seed)
    chosen: list[int] = []
    for key in sorted(groups):
        chosen.extend(rng.sample(groups[key], alloc[key]))
    return [examples[i] for i in sorted(chosen)]
