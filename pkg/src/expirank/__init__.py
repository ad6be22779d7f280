"""Query-aware content-expiration engine for search ranking.

Estimates, per query, the date its answers stop being valid (the
expiration horizon), verifies the estimate by re-deriving it backward
from the evidence, fuses candidate horizons by authority-weighted
support, and turns the winner into a binary freshness feature a
ranker can consume. Documents published after the horizon are the
validated-fresh ones.
"""

from .config import EngineConfig
from .corpus import CandidateJudgment, Document, EvalQuery
from .errors import (
    BackendError,
    BackendSchemaError,
    BackendTimeoutError,
    ConfigError,
    CorpusFormatError,
    ExpirankError,
    NoEvidenceError,
    NoVerdictError,
    UnsupportedVerdictError,
)
from .evaluation import (
    EvalReport,
    RankedDoc,
    RerankWeights,
    day_away_at_k,
    generate_corpus,
    pairwise_ordering_ratio,
    rerank,
    run_offline_eval,
)
from .extraction import (
    FocusedChunk,
    FocusedChunkSet,
    QueryAnchor,
    build_focus,
    extract_query_anchor,
    select_focus,
)
from .fusion import ExpirationVerdict, alignment_indicator, chunk_weight, fuse
from .inference import (
    InferenceOutcome,
    OracleBackend,
    PromptBundle,
    ReasoningBackend,
    ReasoningStep,
    ReasoningTrajectory,
    RemoteBackend,
    build_prompt,
    infer_forward,
    temporal_objective,
    verify_backward,
)
from .pipeline import VerdictResult, compute_verdict, select_candidates
from .rules import DerivedExpiry, EventClass, RuleTable, derive_expiry
from .signal import (
    CircuitBreaker,
    ExpirySignal,
    FeatureVector,
    ThresholdCache,
    emit_features,
    expiry_flag,
    get_threshold,
    make_signal,
)
from .temporal_parser import (
    PatternConfig,
    TemporalMention,
    TemporalParser,
    build_temporal_index,
    parse_temporal_expressions,
)
from .timepoint import TimePoint, elapsed_days, hierarchical_match_depth, strictly_after

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EngineConfig",
    "Document",
    "EvalQuery",
    "CandidateJudgment",
    "ExpirankError",
    "ConfigError",
    "CorpusFormatError",
    "NoEvidenceError",
    "NoVerdictError",
    "BackendError",
    "BackendTimeoutError",
    "BackendSchemaError",
    "UnsupportedVerdictError",
    "EvalReport",
    "RankedDoc",
    "RerankWeights",
    "day_away_at_k",
    "generate_corpus",
    "pairwise_ordering_ratio",
    "rerank",
    "run_offline_eval",
    "QueryAnchor",
    "FocusedChunk",
    "FocusedChunkSet",
    "extract_query_anchor",
    "build_focus",
    "select_focus",
    "ExpirationVerdict",
    "alignment_indicator",
    "chunk_weight",
    "fuse",
    "InferenceOutcome",
    "OracleBackend",
    "RemoteBackend",
    "PromptBundle",
    "ReasoningBackend",
    "ReasoningStep",
    "ReasoningTrajectory",
    "build_prompt",
    "infer_forward",
    "verify_backward",
    "temporal_objective",
    "VerdictResult",
    "compute_verdict",
    "select_candidates",
    "RuleTable",
    "EventClass",
    "DerivedExpiry",
    "derive_expiry",
    "CircuitBreaker",
    "ThresholdCache",
    "ExpirySignal",
    "FeatureVector",
    "expiry_flag",
    "get_threshold",
    "make_signal",
    "emit_features",
    "TemporalParser",
    "PatternConfig",
    "TemporalMention",
    "build_temporal_index",
    "parse_temporal_expressions",
    "TimePoint",
    "elapsed_days",
    "hierarchical_match_depth",
    "strictly_after",
]
