import datetime as dt
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factpipe.claims import (
    Claim,
    ClaimLabel,
    GoldLabel,
    Subclaim,
    SubclaimRef,
    SubclaimVerdict,
    Verifiability,
    parse_predicate_line,
)
from factpipe.credibility import Bias, CredibilityRating, Factuality, RatingSource
from factpipe.errors import VerdictParseError
from factpipe.llm import MockBackend, TemplateName
from factpipe.retrieval import EvidenceRecord
from factpipe.verdict import (
    INSUFFICIENT_EXPLANATION,
    NO_EVIDENCE,
    NO_VERIFIABLE_EXPLANATION,
    build_cell,
    compose_claim_verdict,
    judge_subclaim,
    parse_verdict_reply,
    verdict_bindings,
)

CLAIM = Claim("c1", "Howard University Hospital is in Washington, D.C.")
LINE0 = "Location(Howard_University_Hospital, Washington_D.C.) ::: Verify the location."
LINE1 = "Founded(Howard_University_Hospital, 1862) ::: Verify the founding year."
SUBS = [Subclaim("c1", i, parse_predicate_line(line), Verifiability.VERIFIABLE)
        for i, line in enumerate([LINE0, LINE1])]
RATING = CredibilityRating("apnews.com", Factuality.HIGH, Bias.LEAST_BIASED, RatingSource.MBFC_LISTED)
T0 = dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc)


def record(index, query, url, passage):
    return EvidenceRecord(SubclaimRef("c1", index), query, url, "apnews.com", RATING, passage,
                          T0, "0" * 64)


def test_build_cell_groups_by_query_and_fills_sentinel():
    recs = [record(0, "q1", "https://apnews.com/a", "Passage A."),
            record(0, "q2", "https://apnews.com/b", None),
            record(0, "q1", "https://apnews.com/c", "Passage C.")]
    cell = build_cell(SUBS[0], recs)
    assert [(e.query, e.url) for e in cell.entries] == [
        ("q1", "https://apnews.com/a"), ("q1", "https://apnews.com/c"), ("q2", "https://apnews.com/b")]
    assert cell.entries[2].passage == NO_EVIDENCE
    assert cell.entries[0].credibility == "MBFC factuality High, bias LeastBiased"
    doc = json.loads(cell.serialize())
    assert doc["subclaim"] == LINE0 and len(doc["evidence"]) == 3


def test_build_cell_rejects_foreign_records():
    with pytest.raises(ValueError):
        build_cell(SUBS[0], [record(1, "q", "https://apnews.com/x", "p")])


@pytest.mark.parametrize("reply, label", [
    ('{"label": "supported", "explanation": "ok"}', GoldLabel.SUPPORTED),
    ('Sure!\n```json\n{"label": "Not Supported", "explanation": "no"}\n```', GoldLabel.NOT_SUPPORTED),
    ('{"label": "not-supported", "explanation": "no"}', GoldLabel.NOT_SUPPORTED),
])
def test_parse_verdict_reply(reply, label):
    assert parse_verdict_reply(reply)[0] is label


@pytest.mark.parametrize("reply", ['{"label": "maybe", "explanation": "x"}', "no json here",
                                   '{"explanation": "x"}', "[1, 2]"])
def test_parse_verdict_reply_rejects(reply):
    with pytest.raises(VerdictParseError):
        parse_verdict_reply(reply)


def test_parse_verdict_missing_explanation_gets_placeholder():
    label, explanation = parse_verdict_reply('{"label": "supported"}')
    assert label is GoldLabel.SUPPORTED and explanation


def test_empty_cell_skips_the_backend():
    backend = MockBackend()
    v = judge_subclaim(CLAIM, build_cell(SUBS[0], []), backend)
    assert v.label is GoldLabel.NOT_SUPPORTED and v.explanation == INSUFFICIENT_EXPLANATION
    assert backend.calls == []


def test_judge_subclaim_uses_cell_bindings():
    cell = build_cell(SUBS[0], [record(0, "q1", "https://apnews.com/a", "In D.C.")])
    backend = MockBackend()
    backend.add(TemplateName.VERDICT_PREDICTION, verdict_bindings(CLAIM, cell),
                '{"label": "supported", "explanation": "AP places it in D.C."}')
    v = judge_subclaim(CLAIM, cell, backend)
    assert v == SubclaimVerdict(SUBS[0].ref, GoldLabel.SUPPORTED, "AP places it in D.C.")
    assert len(backend.calls) == 1


def test_compose_orders_and_conjoins():
    v1 = SubclaimVerdict(SUBS[1].ref, GoldLabel.NOT_SUPPORTED, "Founded in 1867.")
    v0 = SubclaimVerdict(SUBS[0].ref, GoldLabel.SUPPORTED, "In D.C.")
    verdict = compose_claim_verdict(CLAIM, [v1, v0], SUBS)
    assert verdict.label is ClaimLabel.NOT_SUPPORTED
    assert [v.subclaim_ref.index for v in verdict.subclaim_verdicts] == [0, 1]
    assert verdict.composite_explanation.index(LINE0) < verdict.composite_explanation.index(LINE1)
    assert "[NotSupported] Founded in 1867." in verdict.composite_explanation


def test_compose_empty_is_no_verifiable_content():
    verdict = compose_claim_verdict(CLAIM, [])
    assert verdict.label is ClaimLabel.NO_VERIFIABLE_CONTENT
    assert verdict.subclaim_verdicts == () and verdict.composite_explanation == NO_VERIFIABLE_EXPLANATION


@given(st.lists(st.sampled_from(list(GoldLabel)), min_size=1, max_size=8))
def test_compose_label_is_conjunction(labels):
    verdicts = [SubclaimVerdict(SubclaimRef("c1", i), lbl, "x") for i, lbl in enumerate(labels)]
    expected = (ClaimLabel.SUPPORTED if all(lbl is GoldLabel.SUPPORTED for lbl in labels)
                else ClaimLabel.NOT_SUPPORTED)
    assert compose_claim_verdict(CLAIM, verdicts).label is expected
