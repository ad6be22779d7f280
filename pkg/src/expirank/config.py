"""Runtime configuration: one flat dataclass, JSON round-trip, env overrides.

All tunables live here with their defaults so a dumped config is a
complete record of a run. Unknown keys in a config file are rejected
rather than ignored; a typo must not silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .evaluation import RerankWeights
from .extraction import (
    DEFAULT_ALPHA,
    DEFAULT_HALF_LIFE_DAYS,
    DEFAULT_TAU,
    DEFAULT_WINDOW,
)
from .inference import (
    DEFAULT_H_NORM,
    DEFAULT_LAMBDA1,
    DEFAULT_LAMBDA2,
    DEFAULT_SAMPLES,
    OracleBackend,
    RemoteBackend,
)
from .pipeline import DEFAULT_MAX_CANDIDATE_DOCS
from .rules import RuleTable
from .signal import (
    DEFAULT_FAILURE_THRESHOLD,
    DEFAULT_FUTURE_BOUND_DAYS,
    DEFAULT_OPEN_SECONDS,
    DEFAULT_PAST_BOUND_DAYS,
    DEFAULT_PROBE_COUNT,
    DEFAULT_TTL_DAYS,
    CircuitBreaker,
    ThresholdCache,
)
from .temporal_parser import PatternConfig, TemporalParser
from .text import DEFAULT_STOPWORDS, load_stopwords

__all__ = ["EngineConfig", "ENV_ENDPOINT", "ENV_DEADLINE_MS"]

ENV_ENDPOINT = "EXPIRANK_ENDPOINT"
ENV_DEADLINE_MS = "EXPIRANK_DEADLINE_MS"

_BACKENDS = ("oracle", "http")
_TIME_FACTOR_POLICIES = ("pub_time", "content_time")


@dataclass
class EngineConfig:
    """Every knob of the engine, with documented defaults."""

    # Chunk extraction.
    alpha: float = DEFAULT_ALPHA
    tau: float = DEFAULT_TAU
    window: int = DEFAULT_WINDOW
    half_life_days: float = DEFAULT_HALF_LIFE_DAYS

    # Inference and verification.
    backend: str = "oracle"
    endpoint: str | None = None
    deadline_ms: int | None = None  # None -> 50 for oracle, 800 for http
    backend_concurrency: int = 4
    samples: int = DEFAULT_SAMPLES
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    h_norm_days: float = DEFAULT_H_NORM
    max_candidate_docs: int = DEFAULT_MAX_CANDIDATE_DOCS

    # Serving path.
    cache_path: str | None = None
    cache_ttl_days: float = DEFAULT_TTL_DAYS
    breaker_failure_threshold: int = DEFAULT_FAILURE_THRESHOLD
    breaker_open_seconds: float = DEFAULT_OPEN_SECONDS
    breaker_probe_count: int = DEFAULT_PROBE_COUNT
    sanity_past_days: float = DEFAULT_PAST_BOUND_DAYS
    sanity_future_days: float = DEFAULT_FUTURE_BOUND_DAYS
    time_factor_policy: str = "pub_time"

    # Reranking weights.
    weight_grade: float = 10.0
    weight_flag: float = 1.0
    weight_cross_rel: float = 0.5
    weight_cross_auth: float = 0.5
    weight_age: float = 0.0

    # Service.
    host: str = "127.0.0.1"
    port: int = 8080
    allow_breaker_force: bool = False

    # External tables; None means built-in defaults.
    rule_table_path: str | None = None
    pattern_config_path: str | None = None
    stopwords_path: str | None = None

    # Evaluation.
    seed: int = 7
    eval_queries: int = 60

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.tau < 1.0:
            problems.append(f"tau must be in [0, 1), got {self.tau}")
        if self.window < 1 or self.window % 2 == 0:
            problems.append(f"window must be odd and >= 1, got {self.window}")
        if self.half_life_days <= 0:
            problems.append("half_life_days must be positive")
        if self.backend not in _BACKENDS:
            problems.append(f"backend must be one of {_BACKENDS}, got {self.backend!r}")
        if self.backend == "http" and not self.endpoint and not os.environ.get(ENV_ENDPOINT):
            problems.append("http backend requires an endpoint")
        if self.deadline_ms is not None and self.deadline_ms <= 0:
            problems.append("deadline_ms must be positive when set")
        if self.samples < 1:
            problems.append("samples must be >= 1")
        if self.backend_concurrency < 1:
            problems.append("backend_concurrency must be >= 1")
        if self.lambda1 < 0 or self.lambda2 < 0:
            problems.append("penalty weights must be non-negative")
        if self.h_norm_days <= 0:
            problems.append("h_norm_days must be positive")
        if self.max_candidate_docs < 1:
            problems.append("max_candidate_docs must be >= 1")
        if self.cache_ttl_days <= 0:
            problems.append("cache_ttl_days must be positive")
        if self.breaker_failure_threshold < 1:
            problems.append("breaker_failure_threshold must be >= 1")
        if self.breaker_open_seconds <= 0:
            problems.append("breaker_open_seconds must be positive")
        if self.breaker_probe_count < 1:
            problems.append("breaker_probe_count must be >= 1")
        if self.sanity_past_days < 0 or self.sanity_future_days < 0:
            problems.append("sanity bounds must be non-negative")
        if self.time_factor_policy not in _TIME_FACTOR_POLICIES:
            problems.append(
                f"time_factor_policy must be one of {_TIME_FACTOR_POLICIES}, "
                f"got {self.time_factor_policy!r}"
            )
        if not 0 < self.port < 65536:
            problems.append(f"port must be in (0, 65535], got {self.port}")
        if self.eval_queries < 1:
            problems.append("eval_queries must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    # -- IO ---------------------------------------------------------------

    @classmethod
    def from_json(cls, path: str) -> "EngineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    def to_json(self) -> str:
        """Lossless dump with every field explicit."""
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    def with_env_overrides(self) -> "EngineConfig":
        """Apply EXPIRANK_ENDPOINT / EXPIRANK_DEADLINE_MS when present."""
        updates = {}
        endpoint = os.environ.get(ENV_ENDPOINT)
        if endpoint:
            updates["endpoint"] = endpoint
        deadline = os.environ.get(ENV_DEADLINE_MS)
        if deadline:
            try:
                updates["deadline_ms"] = int(deadline)
            except ValueError as exc:
                raise ConfigError(
                    f"{ENV_DEADLINE_MS} must be an integer, got {deadline!r}"
                ) from exc
        return dataclasses.replace(self, **updates) if updates else self

    # -- Derived values and component factories ---------------------------

    def effective_deadline_ms(self) -> int:
        if self.deadline_ms is not None:
            return self.deadline_ms
        return 800 if self.backend == "http" else 50

    def rerank_weights(self) -> RerankWeights:
        return RerankWeights(
            grade=self.weight_grade,
            flag=self.weight_flag,
            cross_rel=self.weight_cross_rel,
            cross_auth=self.weight_cross_auth,
            age=self.weight_age,
        )

    def make_rule_table(self) -> RuleTable:
        if self.rule_table_path:
            return RuleTable.from_json(self.rule_table_path)
        return RuleTable.default()

    def make_parser(self) -> TemporalParser:
        if self.pattern_config_path:
            return TemporalParser(PatternConfig.from_json(self.pattern_config_path))
        return TemporalParser()

    def make_stopwords(self) -> frozenset:
        if self.stopwords_path:
            return load_stopwords(self.stopwords_path)
        return DEFAULT_STOPWORDS

    def make_backend(self, rule_table=None, parser=None):
        if self.backend == "http":
            endpoint = self.endpoint or os.environ.get(ENV_ENDPOINT)
            if not endpoint:
                raise ConfigError("http backend requires an endpoint")
            return RemoteBackend(
                endpoint,
                deadline_ms=self.effective_deadline_ms(),
                max_concurrency=self.backend_concurrency,
            )
        return OracleBackend(
            rule_table or self.make_rule_table(), parser or self.make_parser()
        )

    def make_cache(self) -> ThresholdCache:
        return ThresholdCache(path=self.cache_path, ttl_days=self.cache_ttl_days)

    def make_breaker(self) -> CircuitBreaker:
        return CircuitBreaker(
            failure_threshold=self.breaker_failure_threshold,
            open_seconds=self.breaker_open_seconds,
            probe_count=self.breaker_probe_count,
        )
