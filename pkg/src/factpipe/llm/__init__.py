from factpipe.llm.gateway import (
    ChatBackend,
    ChatRequest,
    Gateway,
    HttpChatBackend,
    LlmBackendConfig,
    MockBackend,
    RecordingBackend,
    TokenBucket,
    ask,
    fingerprint,
    mock_backend,
)
from factpipe.llm.jsonparse import extract_json_object
from factpipe.llm.templates import CATALOG, PromptTemplate, TemplateName, get_template, render

__all__ = [
    "CATALOG", "ChatBackend", "ChatRequest", "Gateway", "HttpChatBackend", "LlmBackendConfig",
    "MockBackend", "PromptTemplate", "RecordingBackend", "TemplateName", "TokenBucket", "ask",
    "extract_json_object", "fingerprint", "get_template", "mock_backend", "render",
]
