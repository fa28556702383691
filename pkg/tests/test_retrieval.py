import datetime as dt
import json
import random
import threading
import time

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scenarios import page_html, random_record

from factpipe.claims import Dataset, Subclaim, Verifiability, parse_predicate_line
from factpipe.credibility import (
    CredibilityEngine,
    Factuality,
    FixtureMbfcClient,
)
from factpipe.errors import (
    AuthFailure,
    FetchError,
    MalformedResponse,
    QuotaExceeded,
    RateLimited,
    StorageError,
    TransportError,
)
from factpipe.fixtures import FixtureBundle
from factpipe.llm import MockBackend, TemplateName
from factpipe.queries import QuerySet
from factpipe.retrieval import (
    DATASET_CUTOFFS,
    EvidenceAgent,
    EvidenceRepository,
    EvidenceSettings,
    EvidenceStore,
    HttpFetcher,
    MonotonicClock,
    SearchClient,
    SearchRequest,
    cutoff_for,
    decode_tbs,
    encode_tbs,
    extract_relevant,
    html_to_text,
    select_credible,
)
from factpipe.retrieval.search import SearchHit, parse_organic
from factpipe.retrieval.store import StampingSink

# -- search --------------------------------------------------------------------------


@pytest.mark.parametrize("dataset, date", [
    (Dataset.FEVEROUS, dt.date(2021, 10, 12)),
    (Dataset.HOVER, dt.date(2020, 11, 16)),
    (Dataset.SCIFACT_OPEN, dt.date(2020, 10, 3)),
])
def test_dataset_cutoffs_roundtrip(dataset, date):
    tbs = encode_tbs(cutoff_for(dataset))
    assert decode_tbs(tbs) == date
    assert SearchRequest("q", temporal_bound=cutoff_for(dataset)).payload()["tbs"] == tbs


def test_feverous_wire_string():
    assert encode_tbs(DATASET_CUTOFFS[Dataset.FEVEROUS]) == "cdr:1,cd_max:10/12/2021"
    assert cutoff_for(None) is None and cutoff_for(Dataset.ADHOC) is None


@given(st.dates(min_value=dt.date(1, 1, 1), max_value=dt.date(9999, 12, 31)))
def test_tbs_roundtrip_property(date):
    assert decode_tbs(encode_tbs(date)) == date


def test_decode_rejects_garbage():
    with pytest.raises(ValueError):
        decode_tbs("qdr:y")


def test_search_request_validation():
    with pytest.raises(ValueError):
        SearchRequest("  ")
    with pytest.raises(ValueError):
        SearchRequest("q", num_results=101)
    with pytest.raises(ValueError):
        SearchRequest("q", temporal_bound=dt.datetime(2020, 1, 1))
    assert SearchRequest("q").payload() == {"q": "q", "num": 10, "gl": "us"}


def _search_client(handler):
    return SearchClient("https://search.test/search",
                        client=httpx.Client(transport=httpx.MockTransport(handler)))


def test_search_posts_payload_and_ranks(monkeypatch):
    monkeypatch.setenv("SERPER_API_KEY", "key")
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["key"] = request.headers["x-api-key"]
        organic = [{"title": f"t{i}", "link": f"https://site{i}.com/a", "snippet": "s",
                    "position": i + 5} for i in range(10)]
        return httpx.Response(200, json={"organic": organic})

    hits = _search_client(handler).search(
        SearchRequest("who?", temporal_bound=dt.date(2020, 11, 16)))
    assert [h.rank for h in hits] == list(range(1, 11))
    assert hits[3].domain == "site3.com"
    assert seen == {"body": {"q": "who?", "num": 10, "gl": "us",
                             "tbs": "cdr:1,cd_max:11/16/2020"}, "key": "key"}


@pytest.mark.parametrize("status, exc", [(401, AuthFailure), (402, QuotaExceeded),
                                         (429, RateLimited), (500, TransportError)])
def test_search_status_errors(status, exc):
    with pytest.raises(exc):
        _search_client(lambda r: httpx.Response(status)).search(SearchRequest("q"))


def test_search_malformed():
    with pytest.raises(MalformedResponse):
        _search_client(lambda r: httpx.Response(200, text="oops")).search(SearchRequest("q"))
    with pytest.raises(MalformedResponse):
        parse_organic({"organic": "x"})


def test_parse_organic_skips_linkless_entries():
    hits = parse_organic({"organic": [{"title": "no link"}, {"link": "https://a.com"},
                                      {"link": "https://b.com"}]})
    assert [(h.rank, h.domain) for h in hits] == [(1, "a.com"), (2, "b.com")]
    assert parse_organic({}) == []


# -- credibility selection -----------------------------------------------------------

ENGINE_DB = {"apnews.com": {"factuality": "High", "bias": "Least Biased"},
             "reuters.com": {"factuality": "Very High", "bias": "Least Biased"},
             "tabloid.example": {"factuality": "Low", "bias": "Right"}}


def _hit(rank, domain):
    return SearchHit(f"https://{domain}/{rank}", "t", "s", rank, domain)


def test_select_credible_preserves_order():
    engine = CredibilityEngine(FixtureMbfcClient(ENGINE_DB))
    domains = ["tabloid.example", "reuters.com", "shop.biz", "apnews.com"] + ["x.biz"] * 6
    hits = [_hit(i + 1, d) for i, d in enumerate(domains)]
    kept = select_credible(hits, engine)
    assert [h.domain for h in kept] == ["reuters.com", "apnews.com"]
    assert select_credible([_hit(1, "shop.biz")], engine) == []


def test_select_credible_lookup_failure_is_not_credible():
    class Broken:
        def get(self, domain):
            raise TransportError("down")

    assert select_credible([_hit(1, "apnews.com")], CredibilityEngine(Broken())) == []


# -- fetch ---------------------------------------------------------------------------


def test_html_to_text_strips_markup():
    assert html_to_text("<html><body><p>A</p><script>x</script></body></html>") == "A"
    text = html_to_text(page_html("Title", "Body text here."))
    assert "var x" not in text and "Body text here." in text


def _fetcher(pages, **kw):
    bundle = FixtureBundle()
    for url, page in pages.items():
        if "location" in page:
            bundle.add_redirect(url, page["location"])
        else:
            bundle.add_page(url, page.get("body", ""), status=page.get("status", 200),
                            headers=page.get("headers"))
    transport = bundle.page_transport()
    return HttpFetcher(client=httpx.Client(transport=transport), **kw), transport


def test_fetch_follows_redirects_to_final_page():
    fetcher, transport = _fetcher({
        "https://a.com/1": {"location": "https://b.com/2"},
        "https://b.com/2": {"location": "/3"},
        "https://b.com/3": {"body": "<p>final page</p>"},
    })
    assert fetcher.fetch_full_text("https://a.com/1") == "final page"
    assert transport.calls == ["https://a.com/1", "https://b.com/2", "https://b.com/3"]


def test_fetch_redirect_limit():
    pages = {f"https://a.com/{i}": {"location": f"https://a.com/{i + 1}"} for i in range(5)}
    fetcher, _ = _fetcher(pages, max_redirects=3)
    with pytest.raises(FetchError, match="redirects"):
        fetcher.fetch_full_text("https://a.com/0")


@pytest.mark.parametrize("page, reason", [
    ({"status": 404}, "HTTP 404"),
    ({"body": "x", "headers": {"content-type": "application/pdf"}}, "non-HTML"),
    ({"body": "x" * 5000}, "size cap"),
])
def test_fetch_errors(page, reason):
    fetcher, _ = _fetcher({"https://a.com/p": page}, max_bytes=1000)
    with pytest.raises(FetchError, match=reason):
        fetcher.fetch_full_text("https://a.com/p")


def test_fetch_unrecorded_and_bad_scheme():
    fetcher, _ = _fetcher({})
    with pytest.raises(FetchError):
        fetcher.fetch_full_text("https://nowhere.com/")
    with pytest.raises(FetchError, match="http"):
        fetcher.fetch_full_text("ftp://a.com/x")


def test_fetch_timeout():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    fetcher = HttpFetcher(client=httpx.Client(transport=httpx.MockTransport(handler)))
    with pytest.raises(FetchError, match="timeout"):
        fetcher.fetch_full_text("https://a.com/")


def test_fetch_parallelism_cap():
    active, peak, lock = [0], [0], threading.Lock()

    def handler(request):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.01)
        with lock:
            active[0] -= 1
        return httpx.Response(200, headers={"content-type": "text/html"}, text="<p>x</p>")

    fetcher = HttpFetcher(client=httpx.Client(transport=httpx.MockTransport(handler)),
                          max_parallel=3)
    threads = [threading.Thread(target=fetcher.fetch_full_text, args=(f"https://a.com/{i}",))
               for i in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert 1 <= peak[0] <= 3


# -- extraction ----------------------------------------------------------------------------


def test_extract_relevant():
    m = MockBackend()
    m.add(TemplateName.CONTENT_RETRIEVAL, {"query": "q", "content": "text"}, " The sentence. ")
    m.add(TemplateName.CONTENT_RETRIEVAL, {"query": "q2", "content": "text"}, '"None."')
    assert extract_relevant("q", "text", m) == "The sentence."
    assert extract_relevant("q2", "text", m) is None
    with pytest.raises(ValueError):
        extract_relevant("q", "   ", m)
    assert len(m.calls) == 2


# -- evidence store ---------------------------------------------------------------------------

def test_store_roundtrip_random_records(tmp_path):
    rng = random.Random(7)
    records = [random_record(rng, i) for i in range(100)]
    repo = EvidenceRepository(tmp_path)
    for r in records:
        repo.store_append("run-1", r)
    assert repo.load_all("run-1") == records
    assert repo.load_all("empty") == []


def test_store_append_order_and_corruption(tmp_path):
    store = EvidenceStore(tmp_path / "e.jsonl")
    rng = random.Random(1)
    r1, r2 = random_record(rng, 1), random_record(rng, 2)
    store.append(r1)
    store.append(r2)
    assert store.load_all() == [r1, r2]
    with open(tmp_path / "e.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(StorageError, match=":3:"):
        store.load_all()


def test_repository_rejects_bad_run_ids(tmp_path):
    with pytest.raises(StorageError):
        EvidenceRepository(tmp_path).run_dir("../x")


def test_monotonic_clock_never_repeats():
    fixed = dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc)
    clock = MonotonicClock(lambda: fixed)
    stamps = [clock.now() for _ in range(50)]
    assert all(a < b for a, b in zip(stamps, stamps[1:]))


def test_stamping_sink_orders_concurrent_appends(tmp_path):
    store = EvidenceStore(tmp_path / "e.jsonl")
    sink = StampingSink(store)
    rng = random.Random(3)
    base = [random_record(rng, i) for i in range(40)]
    threads = [threading.Thread(target=sink.emit, args=(r,)) for r in base]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    stamps = [r.retrieved_at for r in store.load_all()]
    assert len(stamps) == 40 and stamps == sorted(stamps)


# -- gather_evidence ---------------------------------------------------------------------------

LINE = "Location(Howard_University_Hospital, Washington_D.C.) ::: Verify it is in D.C."
SUB = Subclaim("h", 0, parse_predicate_line(LINE), Verifiability.VERIFIABLE)


def _agent(bundle, llm):
    return EvidenceAgent(
        SearchClient("https://search.test", client=httpx.Client(
            transport=bundle.search_transport())),
        CredibilityEngine(FixtureMbfcClient(ENGINE_DB)),
        HttpFetcher(client=httpx.Client(transport=bundle.page_transport())),
        llm, EvidenceSettings())


def _script(bundle, llm, query, hits, passage="Passage."):
    bundle.add_search(SearchRequest(query), organic=[{"link": u} for u in hits])
    for u in hits:
        body = page_html(query, f"Text for {query}")
        bundle.add_page(u, body)
        llm.add(TemplateName.CONTENT_RETRIEVAL, {"query": query, "content": html_to_text(body)},
                passage)


def test_gather_three_queries_three_records():
    bundle, llm = FixtureBundle(), MockBackend()
    for q in ("q1", "q2", "q3"):
        _script(bundle, llm, q, ["https://tabloid.example/x", f"https://apnews.com/{q}",
                                 f"https://reuters.com/{q}"])
    result = _agent(bundle, llm).gather_evidence(SUB, QuerySet(SUB.ref, ("q1", "q2", "q3")))
    assert [r.url for r in result.records] == [f"https://apnews.com/{q}" for q in ("q1", "q2", "q3")]
    assert result.hits == 9 and result.credible_hits == 6
    r = result.records[0]
    assert r.credibility.factuality is Factuality.HIGH and r.passage == "Passage."
    assert r.retrieved_at.tzinfo is not None and len(r.content_hash) == 64
    stamps = [x.retrieved_at for x in result.records]
    assert stamps == sorted(stamps)


def test_gather_middle_query_without_credible_hits():
    bundle, llm = FixtureBundle(), MockBackend()
    _script(bundle, llm, "q1", ["https://apnews.com/1"])
    _script(bundle, llm, "q2", ["https://tabloid.example/2", "https://shop.biz/2"])
    _script(bundle, llm, "q3", ["https://apnews.com/3"], passage="None")
    result = _agent(bundle, llm).gather_evidence(SUB, QuerySet(SUB.ref, ("q1", "q2", "q3")))
    assert len(result.records) == 2 and result.records[1].passage is None
    assert len(result.diagnostics) == 1 and "q2" in result.diagnostics[0]


def test_gather_survives_search_and_fetch_failures():
    bundle, llm = FixtureBundle(), MockBackend()
    _script(bundle, llm, "q1", ["https://apnews.com/1"])
    bundle.add_search(SearchRequest("q3"), organic=[{"link": "https://apnews.com/missing"}])
    result = _agent(bundle, llm).gather_evidence(SUB, QuerySet(SUB.ref, ("q1", "q2", "q3")))
    assert len(result.records) == 1
    assert len(result.diagnostics) == 2


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=5))
def test_gather_never_exceeds_queries(credible_flags):
    bundle, llm = FixtureBundle(), MockBackend()
    queries = tuple(f"q{i}" for i in range(len(credible_flags)))
    for q, ok in zip(queries, credible_flags):
        _script(bundle, llm, q, [f"https://{'apnews.com' if ok else 'shop.biz'}/{q}"])
    result = _agent(bundle, llm).gather_evidence(SUB, QuerySet(SUB.ref, queries))
    assert len(result.records) == sum(credible_flags) <= len(queries)
