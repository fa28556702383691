"""Binary Macro F1 and mean average rank."""

from __future__ import annotations

from collections.abc import Sequence

from factpipe.claims import ClaimLabel, GoldLabel
from factpipe.errors import LengthMismatch, MissingMethod
from factpipe.evaluation.judge import JudgeRanking

CLASSES = (GoldLabel.SUPPORTED, GoldLabel.NOT_SUPPORTED)


def as_gold(label: ClaimLabel | GoldLabel | str) -> GoldLabel:
    """Scoring view of a label: no verifiable content scores as not supported."""
    value = label.value if isinstance(label, (ClaimLabel, GoldLabel)) else str(label)
    if value == ClaimLabel.NO_VERIFIABLE_CONTENT.value:
        return GoldLabel.NOT_SUPPORTED
    return GoldLabel(value)


def f1_score(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(predictions: Sequence[ClaimLabel | GoldLabel | str],
             golds: Sequence[GoldLabel | str]) -> float:
    """Unweighted mean of per-class F1 over the fixed binary label set.

    A class with no gold and no predicted instances contributes 0.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise ValueError("macro_f1 needs at least one example")
    pred = [as_gold(p) for p in predictions]
    gold = [as_gold(g) for g in golds]
    scores = []
    for cls in CLASSES:
        tp = sum(p is cls and g is cls for p, g in zip(pred, gold, strict=True))
        fp = sum(p is cls and g is not cls for p, g in zip(pred, gold, strict=True))
        fn = sum(p is not cls and g is cls for p, g in zip(pred, gold, strict=True))
        scores.append(f1_score(tp, fp, fn))
    return sum(scores) / len(scores)


def mar(rankings: Sequence[JudgeRanking], method: str) -> float:
    """Mean of ``method``'s rank pooled over every (ranking, criterion) pair."""
    if not rankings:
        raise ValueError("mar needs at least one ranking")
    ranks = []
    for r in rankings:
        for criterion, by_method in r.ranks.items():
            if method not in by_method:
                raise MissingMethod(f"{method!r} not ranked under {criterion}")
            ranks.append(by_method[method])
    return sum(ranks) / len(ranks)
