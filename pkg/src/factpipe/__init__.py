"""Multi-agent claim verification: decomposition, retrieval, credibility filtering, verdicts."""

from factpipe.claims import (
    Claim,
    ClaimLabel,
    ClaimVerdict,
    Dataset,
    FolPredicate,
    GoldLabel,
    Subclaim,
    SubclaimRef,
    SubclaimVerdict,
    Verifiability,
    aggregate_verdicts,
    parse_decomposition_response,
    parse_predicate_line,
)
from factpipe.config import PipelineConfig
from factpipe.orchestrator import (
    ClaimResult,
    Pipeline,
    RunTrace,
    build_services,
    run_batch,
    run_claim,
)

__version__ = "0.1.0"

__all__ = [
    "Claim", "ClaimLabel", "ClaimResult", "ClaimVerdict", "Dataset", "FolPredicate", "GoldLabel",
    "Pipeline", "PipelineConfig", "RunTrace", "Subclaim", "SubclaimRef", "SubclaimVerdict",
    "Verifiability", "__version__", "aggregate_verdicts", "build_services",
    "parse_decomposition_response", "parse_predicate_line", "run_batch", "run_claim",
]
