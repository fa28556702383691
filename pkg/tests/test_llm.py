import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factpipe.errors import (
    AuthFailure,
    MalformedResponse,
    MissingBinding,
    MockMiss,
    NoJsonFound,
    RateLimited,
    Timeout,
    TransportError,
)
from factpipe.llm import (
    CATALOG,
    ChatRequest,
    Gateway,
    HttpChatBackend,
    LlmBackendConfig,
    MockBackend,
    RecordingBackend,
    TemplateName,
    TokenBucket,
    ask,
    extract_json_object,
    fingerprint,
    get_template,
    render,
)
from factpipe.llm.templates import (
    CONTENT_RETRIEVAL,
    DECOMPOSITION,
    EXPLANATION_JUDGE,
    QUERY_GENERATION,
    VERDICT_PREDICTION,
)

# -- templates -----------------------------------------------------------------

def test_catalog_has_all_six_templates():
    assert set(CATALOG) == set(TemplateName)
    assert get_template("VerdictPrediction") is VERDICT_PREDICTION


def test_content_retrieval_render():
    out = render(CONTENT_RETRIEVAL, {"query": "Where is Howard Hospital located?", "content": "…"})
    assert out.endswith("Relevant Information:")
    assert "Query: Where is Howard Hospital located?" in out


def test_decomposition_ends_with_claim():
    assert render(DECOMPOSITION, {"claim": "X is Y."}).endswith("X is Y.")


def test_missing_binding():
    with pytest.raises(MissingBinding) as info:
        render(VERDICT_PREDICTION, {"claim": "c"})
    assert info.value.placeholder == "cell"


def test_literal_braces_survive_rendering():
    out = render(VERDICT_PREDICTION, {"claim": "c", "cell": "{}"})
    assert "{{" in out and '"label": "supported" or "not_supported"' in out
    assert QUERY_GENERATION.placeholders == ("k", "claim")
    assert EXPLANATION_JUDGE.placeholders == ("cell",)


def test_substitution_is_not_recursive():
    out = render(CONTENT_RETRIEVAL, {"query": "{content}", "content": "body"})
    assert "Query: {content}" in out


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1), st.text(min_size=1))
def test_render_injective(a, b):
    if a != b:
        assert render(DECOMPOSITION, {"claim": a}) != render(DECOMPOSITION, {"claim": b})


# -- JSON extraction ---------------------------------------------------------------

def test_extract_fenced():
    doc = extract_json_object('```json\n{"label": "supported", "explanation": "e"}\n```')
    assert doc == {"label": "supported", "explanation": "e"}


def test_extract_empty_object_and_prose():
    assert extract_json_object("{}") == {}
    assert extract_json_object('Sure. Here: {"a": [1, {"b": "}"}]} thanks') == {"a": [1, {"b": "}"}]}
    with pytest.raises(NoJsonFound):
        extract_json_object("no json at all")


def test_extract_skips_unbalanced_prefix():
    assert extract_json_object('{ broken [1, 2] ') == [1, 2]


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(),
    lambda children: st.lists(children) | st.dictionaries(st.text(), children),
    max_leaves=10,
)


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.text(), json_values) | st.lists(json_values))
def test_extract_idempotent_on_clean_json(doc):
    text = json.dumps(doc)
    assert extract_json_object(text) == doc
    assert extract_json_object(json.dumps(extract_json_object(text))) == doc


# -- mock backend --------------------------------------------------------------------

def test_mock_backend_scripted_and_deterministic():
    m = MockBackend()
    m.add(TemplateName.DECOMPOSITION, {"claim": "c"}, "reply")
    assert ask(m, DECOMPOSITION, {"claim": "c"}) == ask(m, DECOMPOSITION, {"claim": "c"}) == "reply"
    assert len(m.calls_for(TemplateName.DECOMPOSITION)) == 2
    with pytest.raises(MockMiss):
        ask(m, DECOMPOSITION, {"claim": "other"})


def test_fingerprint_depends_on_template_and_bindings():
    a = fingerprint(TemplateName.DECOMPOSITION, {"claim": "x"})
    assert a.startswith("Decomposition:")
    assert a == fingerprint("Decomposition", {"claim": "x"})
    assert a != fingerprint(TemplateName.DECOMPOSITION, {"claim": "y"})
    assert a != fingerprint(TemplateName.VERIFIABILITY_CLASSIFICATION, {"claim": "x"})


def test_mock_from_file(tmp_path):
    m = MockBackend()
    key = m.add(TemplateName.DECOMPOSITION, {"claim": "c"}, "r")
    (tmp_path / "s.json").write_text(json.dumps(m.script))
    assert MockBackend.from_file(tmp_path / "s.json").script == {key: "r"}


def test_recording_backend_captures():
    m = MockBackend()
    key = m.add(TemplateName.DECOMPOSITION, {"claim": "c"}, "r")
    rec = RecordingBackend(m)
    ask(rec, DECOMPOSITION, {"claim": "c"})
    assert rec.recorded == {key: "r"}


def test_chat_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(model_id="m", user="")
    with pytest.raises(ValueError):
        ChatRequest(model_id="m", user="u", temperature=-1)
    assert ChatRequest(model_id="m", user="u").temperature == 0.0


# -- HTTP backend ----------------------------------------------------------------------

def _backend(handler, monkeypatch, retry_limit=2):
    monkeypatch.setenv("LLM_API_KEY", "sk-test")
    monkeypatch.delenv("FACTPIPE_LLM_ENDPOINT", raising=False)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    sleeps = []
    cfg = LlmBackendConfig(endpoint_url="https://llm.test/v1/chat/completions",
                           retry_limit=retry_limit, backoff=(0.5, 2.0))
    return HttpChatBackend(cfg, client, sleep=sleeps.append), sleeps


def _ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def test_http_backend_sends_openai_payload(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return _ok("hello")

    backend, _ = _backend(handler, monkeypatch)
    assert backend.complete(ChatRequest(model_id="", user="hi")) == "hello"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"]["model"] == "gpt-4o-mini"
    assert seen["body"]["temperature"] == 0.0
    assert seen["body"]["messages"] == [{"role": "user", "content": "hi"}]


def test_http_backend_retries_transient_then_succeeds(monkeypatch):
    replies = iter([httpx.Response(429), httpx.Response(503), _ok("fine")])
    backend, sleeps = _backend(lambda r: next(replies), monkeypatch)
    assert backend.complete(ChatRequest(model_id="m", user="u")) == "fine"
    assert sleeps == [0.5, 2.0]


@pytest.mark.parametrize("status, exc", [(429, RateLimited), (500, TransportError)])
def test_http_backend_gives_up_after_retry_limit(monkeypatch, status, exc):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status)

    backend, _ = _backend(handler, monkeypatch)
    with pytest.raises(exc):
        backend.complete(ChatRequest(model_id="m", user="u"))
    assert len(calls) == 3


def test_http_backend_auth_and_timeout(monkeypatch):
    backend, _ = _backend(lambda r: httpx.Response(401), monkeypatch)
    with pytest.raises(AuthFailure):
        backend.complete(ChatRequest(model_id="m", user="u"))

    def slow(request):
        raise httpx.ReadTimeout("slow", request=request)

    backend, _ = _backend(slow, monkeypatch, retry_limit=0)
    with pytest.raises(Timeout):
        backend.complete(ChatRequest(model_id="m", user="u"))


def test_http_backend_bad_request_not_retried(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad")

    backend, _ = _backend(handler, monkeypatch)
    with pytest.raises(MalformedResponse):
        backend.complete(ChatRequest(model_id="m", user="u"))
    assert len(calls) == 1


def test_http_backend_missing_key(monkeypatch):
    backend, _ = _backend(lambda r: _ok("x"), monkeypatch)
    monkeypatch.delenv("LLM_API_KEY")
    with pytest.raises(AuthFailure):
        backend.complete(ChatRequest(model_id="m", user="u"))


def test_endpoint_env_override(monkeypatch):
    urls = []

    def handler(request):
        urls.append(str(request.url))
        return _ok("x")

    backend, _ = _backend(handler, monkeypatch)
    monkeypatch.setenv("FACTPIPE_LLM_ENDPOINT", "https://other.test/chat")
    backend.complete(ChatRequest(model_id="m", user="u"))
    assert urls == ["https://other.test/chat"]


# -- rate limiting and roles ---------------------------------------------------------------

class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        return self.t

    def sleep(self, s):
        self.t += s


def test_token_bucket_spaces_calls():
    clock = FakeClock()
    bucket = TokenBucket(rate=2.0, capacity=1, clock=clock, sleep=clock.sleep)
    for _ in range(5):
        bucket.acquire()
    assert clock.t == pytest.approx(2.0)


def test_gateway_role_assignment():
    a, b = MockBackend(), MockBackend()
    a.add(TemplateName.DECOMPOSITION, {"claim": "c"}, "from-a")
    b.add(TemplateName.DECOMPOSITION, {"claim": "c"}, "from-b")
    gw = Gateway(default=a, overrides={"extraction": b})
    assert gw.ask("ingestion", DECOMPOSITION, {"claim": "c"}) == "from-a"
    assert gw.ask("extraction", DECOMPOSITION, {"claim": "c"}) == "from-b"
    with pytest.raises(KeyError):
        gw.backend("nobody")
