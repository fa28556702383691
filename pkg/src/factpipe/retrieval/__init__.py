from factpipe.retrieval.evidence import (
    EvidenceAgent,
    EvidenceSettings,
    GatherResult,
    extract_relevant,
    gather_evidence,
    select_credible,
)
from factpipe.retrieval.fetch import Fetcher, HttpFetcher, fetch_full_text, html_to_text
from factpipe.retrieval.search import (
    DATASET_CUTOFFS,
    SearchClient,
    SearchHit,
    SearchRequest,
    cutoff_for,
    decode_tbs,
    encode_tbs,
)
from factpipe.retrieval.store import (
    EvidenceRecord,
    EvidenceRepository,
    EvidenceStore,
    MonotonicClock,
)

__all__ = [
    "DATASET_CUTOFFS", "EvidenceAgent", "EvidenceRecord", "EvidenceRepository", "EvidenceSettings",
    "EvidenceStore", "Fetcher", "GatherResult", "HttpFetcher", "MonotonicClock", "SearchClient",
    "SearchHit", "SearchRequest", "cutoff_for", "decode_tbs", "encode_tbs", "extract_relevant",
    "fetch_full_text", "gather_evidence", "html_to_text", "select_credible",
]
