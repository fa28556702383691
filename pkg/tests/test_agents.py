"""Ingestion and query-generation agents against scripted backends."""

import json

import pytest

from factpipe.claims import Claim, Subclaim, Verifiability, parse_predicate_line
from factpipe.errors import (
    DecompositionParseError,
    EmptyDecomposition,
    EmptyQuerySet,
    QueryParseError,
    UnparseableClassification,
)
from factpipe.ingestion import IngestionAgent, parse_classification
from factpipe.llm import MockBackend, TemplateName
from factpipe.queries import QueryAgent, QuerySet, dedupe_queries, parse_query_reply

TOYO = Claim("toyo", "Toyozakura Toshiaki, a former sumo wrestler, committed a crime and "
             "ended his career, which started in 1989.")
TOYO_LINES = [
    "Occupation(Toyozakura_Toshiaki, sumo_wrestler) ::: Verify Toyozakura Toshiaki was a sumo wrestler.",
    "Commit(Toyozakura_Toshiaki, crime) ::: Verify Toyozakura Toshiaki committed a crime.",
    "Ending(Toyozakura_Toshiaki, career) ::: Verify the crime ended his career.",
    "Starting(career, 1989) ::: Verify his career started in 1989.",
]


def script_ingestion(claim, lines, verdicts):
    m = MockBackend()
    m.add(TemplateName.DECOMPOSITION, {"claim": claim.text},
          json.dumps({"response": "Predicates:\n" + "\n".join(lines)}))
    for line, verdict in zip(lines, verdicts):
        goal = parse_predicate_line(line).verification_goal
        m.add(TemplateName.VERIFIABILITY_CLASSIFICATION, {"claim": goal}, verdict)
    return m


def test_decompose_toyozakura():
    m = script_ingestion(TOYO, TOYO_LINES, [])
    subs = IngestionAgent(m).decompose(TOYO)
    assert [s.predicate.name for s in subs] == ["Occupation", "Commit", "Ending", "Starting"]
    assert [s.index for s in subs] == [0, 1, 2, 3]
    assert all(s.verifiability is Verifiability.UNCLASSIFIED for s in subs)


def test_single_fact_claim():
    claim = Claim("paris", "Paris is the capital of France.")
    m = script_ingestion(claim, ["Capital(Paris, France) ::: Verify Paris is the capital of France."],
                         ["VERIFIABLE"])
    result = IngestionAgent(m).ingest(claim)
    assert len(result.subclaims) == 1 and result.dropped_count == 0


def test_ingest_filters_and_counts():
    m = script_ingestion(TOYO, TOYO_LINES,
                         ["VERIFIABLE", "Classification: NON-VERIFIABLE, it is vague",
                          "verifiable.", "I cannot decide."])
    result = IngestionAgent(m).ingest(TOYO)
    assert [s.index for s in result.subclaims] == [0, 2]
    assert result.dropped_count == 1
    assert [s.index for s in result.unclassified] == [3]
    assert result.unclassified[0].classifier_explanation == "I cannot decide."
    assert [s.index for s in result.to_verify] == [0, 2, 3]
    assert result.decomposed_count == 4
    assert result.warnings


def test_ingest_all_non_verifiable():
    m = script_ingestion(TOYO, TOYO_LINES, ["NON-VERIFIABLE"] * 4)
    result = IngestionAgent(m).ingest(TOYO)
    assert result.subclaims == () and result.dropped_count == 4


def test_unverifiable_rate_reproduces_fixture():
    # 64 subclaims of which 11 are opinion-like: 11/64 = 17.19%
    lines = [f"Fact{i}(A{i}) ::: Verify fact number {i}." for i in range(64)]
    verdicts = ["NON-VERIFIABLE" if i % 6 == 0 and i < 66 else "VERIFIABLE" for i in range(64)]
    claim = Claim("hop4", "A long four-hop claim.")
    result = IngestionAgent(script_ingestion(claim, lines, verdicts)).ingest(claim)
    assert result.dropped_count == verdicts.count("NON-VERIFIABLE") == 11
    assert round(result.dropped_count / result.decomposed_count * 100, 2) == 17.19


def test_ingest_is_deterministic():
    m = script_ingestion(TOYO, TOYO_LINES, ["VERIFIABLE"] * 4)
    agent = IngestionAgent(m, max_workers=4)
    assert agent.ingest(TOYO) == agent.ingest(TOYO)


@pytest.mark.parametrize("reply, expected", [
    ("VERIFIABLE\nExplanation: dates are checkable.", Verifiability.VERIFIABLE),
    ("NON-VERIFIABLE: opinion", Verifiability.NON_VERIFIABLE),
    ("This is non verifiable.", Verifiability.NON_VERIFIABLE),
    ("Not verifiable; it is a prediction.", Verifiability.NON_VERIFIABLE),
    ("Classification: Verifiable (though NON-VERIFIABLE parts exist)", Verifiability.VERIFIABLE),
])
def test_parse_classification(reply, expected):
    assert parse_classification(reply) is expected


def test_parse_classification_failure():
    with pytest.raises(UnparseableClassification):
        parse_classification("I cannot decide.")


def test_empty_decomposition_and_parse_error():
    claim = Claim("c", "Something.")
    m = MockBackend()
    m.add(TemplateName.DECOMPOSITION, {"claim": claim.text}, json.dumps({"response": "Predicates:"}))
    with pytest.raises(EmptyDecomposition):
        IngestionAgent(m).decompose(claim)
    m.add(TemplateName.DECOMPOSITION, {"claim": claim.text}, "sorry")
    with pytest.raises(DecompositionParseError):
        IngestionAgent(m).decompose(claim)


def test_classify_rejects_already_classified():
    sub = Subclaim("c", 0, parse_predicate_line("A(b) ::: g"), Verifiability.VERIFIABLE)
    with pytest.raises(ValueError):
        IngestionAgent(MockBackend()).classify_verifiability(sub)


# -- query generation --------------------------------------------------------------

HOWARD_LINE = ("Location(Howard_University_Hospital, Washington_D.C.) ::: Verify Howard University "
               "Hospital is located in Washington, D.C.")
SUB = Subclaim("h", 0, parse_predicate_line(HOWARD_LINE), Verifiability.VERIFIABLE)


def script_queries(reply, k=3):
    m = MockBackend()
    m.add(TemplateName.QUERY_GENERATION, {"k": str(k), "claim": HOWARD_LINE}, reply)
    return m


def test_generate_queries_k3():
    qs = ["Where is Howard University Hospital located?", "Howard University Hospital address",
          "Is Howard University Hospital in Washington DC?"]
    m = script_queries(json.dumps([{"claim": HOWARD_LINE, "questions": qs}]))
    result = QueryAgent(m).generate_queries(SUB, 3)
    assert result.queries == tuple(qs) and result.subclaim_ref == SUB.ref


def test_generate_queries_truncates_and_dedupes():
    qs = ["Q one?", "q ONE?", "Q two?", "", 7, "Q three?", "Q four?"]
    m = script_queries(json.dumps([{"claim": "paraphrased", "questions": qs}]), k=2)
    assert QueryAgent(m).generate_queries(SUB, 2).queries == ("Q one?", "Q two?")


def test_generate_queries_k_bounds():
    with pytest.raises(ValueError):
        QueryAgent(MockBackend()).generate_queries(SUB, 0)
    with pytest.raises(ValueError):
        QueryAgent(MockBackend()).generate_queries(SUB, 6)


def test_query_reply_errors():
    with pytest.raises(QueryParseError):
        parse_query_reply("no json", SUB, 3)
    with pytest.raises(QueryParseError):
        parse_query_reply('[{"claim": "x"}]', SUB, 3)
    with pytest.raises(EmptyQuerySet):
        parse_query_reply('[{"claim": "x", "questions": ["", "  "]}]', SUB, 3)


def test_single_object_reply_accepted():
    qs = parse_query_reply('{"claim": "x", "questions": ["A?"]}', SUB, 3)
    assert qs.queries == ("A?",)


def test_queryset_invariants():
    with pytest.raises(ValueError):
        QuerySet(SUB.ref, ())
    with pytest.raises(ValueError):
        QuerySet(SUB.ref, ("a", "A"))
    assert dedupe_queries(["a", "A", "b"], 5) == ["a", "b"]
