"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class FactpipeError(Exception):
    """Base class for all typed pipeline errors."""


# -- parsing ---------------------------------------------------------------


class ParseError(FactpipeError):
    """An LLM reply could not be parsed into the expected structure.

    The orchestrator retries parse-class failures once.
    """


class MalformedPredicate(FactpipeError):
    def __init__(self, line: str, reason: str):
        super().__init__(f"{reason}: {line!r}")
        self.line = line
        self.reason = reason


class DecompositionParseError(ParseError):
    def __init__(self, message: str, malformed: list[MalformedPredicate] | None = None):
        super().__init__(message)
        self.malformed = list(malformed or [])


class EmptyDecomposition(FactpipeError):
    """The decomposition reply parsed but contained no predicates."""


class UnparseableClassification(ParseError):
    pass


class QueryParseError(ParseError):
    pass


class EmptyQuerySet(ParseError):
    pass


class VerdictParseError(ParseError):
    pass


class JudgeParseError(ParseError):
    pass


class InvalidPermutation(JudgeParseError):
    pass


class NoJsonFound(ParseError):
    pass


# -- prompts and backends --------------------------------------------------


class MissingBinding(FactpipeError):
    def __init__(self, placeholder: str):
        super().__init__(f"no binding for placeholder {{{placeholder}}}")
        self.placeholder = placeholder


class MockMiss(FactpipeError):
    def __init__(self, fingerprint: str):
        super().__init__(f"no scripted reply for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class FixtureMiss(FactpipeError):
    """An offline replay had no recorded response for a request."""


class TransportError(FactpipeError):
    """Transient network failure. Retried by backends and the orchestrator."""


class RateLimited(TransportError):
    pass


class Timeout(TransportError):
    pass


class AuthFailure(FactpipeError):
    pass


class QuotaExceeded(FactpipeError):
    pass


class MalformedResponse(FactpipeError):
    pass


class FetchError(FactpipeError):
    def __init__(self, url: str, reason: str):
        super().__init__(f"{reason} ({url})")
        self.url = url
        self.reason = reason


class StorageError(FactpipeError):
    pass


# -- evaluation ------------------------------------------------------------


class LengthMismatch(FactpipeError):
    pass


class MissingMethod(FactpipeError):
    pass


class FormatError(FactpipeError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# -- orchestration ---------------------------------------------------------


class ConfigError(FactpipeError):
    pass


class PipelineError(FactpipeError):
    def __init__(self, stage: str, cause: BaseException | str):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
