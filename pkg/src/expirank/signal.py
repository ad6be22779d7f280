"""Online application of expiration verdicts as a ranking feature.

Threshold acquisition runs in three tiers: a TTL'd file-backed cache,
the live reasoning pipeline behind a circuit breaker, and a fail-closed
fallback. The binary signal compares a document's time factor against
the query's horizon; every failure mode degrades to flag 0 rather than
raising to the caller.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
import unicodedata
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Document
from .pipeline import compute_verdict
from .timepoint import TimePoint, elapsed_days, strictly_after

logger = logging.getLogger(__name__)

__all__ = [
    "normalize_query_key",
    "ThresholdCacheEntry",
    "ThresholdCache",
    "CircuitBreaker",
    "ExpirySignal",
    "FeatureVector",
    "expiry_flag",
    "document_time_factor",
    "sanity_check",
    "get_threshold",
    "make_signal",
    "emit_features",
    "DEFAULT_TTL_DAYS",
    "DEFAULT_FAILURE_THRESHOLD",
    "DEFAULT_OPEN_SECONDS",
    "DEFAULT_PROBE_COUNT",
    "DEFAULT_PAST_BOUND_DAYS",
    "DEFAULT_FUTURE_BOUND_DAYS",
]

DEFAULT_TTL_DAYS = 7.0
DEFAULT_FAILURE_THRESHOLD = 5
DEFAULT_OPEN_SECONDS = 30.0
DEFAULT_PROBE_COUNT = 1
DEFAULT_PAST_BOUND_DAYS = 3650.0
DEFAULT_FUTURE_BOUND_DAYS = 1825.0

_SECONDS_PER_DAY = 86400.0

# (t_exp rendered or None, provenance, s_self)
ThresholdPipeline = Callable[[str, TimePoint], tuple[TimePoint, float]]


def normalize_query_key(query: str) -> str:
    """Cache key: unicode NFC, lowercased, whitespace collapsed."""
    normalized = unicodedata.normalize("NFC", query).lower()
    return " ".join(normalized.split())


@dataclass(frozen=True)
class ThresholdCacheEntry:
    """One cached verdict; stale entries are never served."""

    query_key: str
    t_exp: TimePoint
    computed_at: float
    ttl_days: float
    source: str
    s_self: float

    def fresh_at(self, now: float) -> bool:
        return self.computed_at + self.ttl_days * _SECONDS_PER_DAY >= now

    def to_record(self) -> dict:
        return {
            "query_key": self.query_key,
            "t_exp": self.t_exp.render(),
            "computed_at": self.computed_at,
            "ttl_days": self.ttl_days,
            "source": self.source,
            "s_self": self.s_self,
        }

    @classmethod
    def from_record(cls, raw: dict) -> "ThresholdCacheEntry":
        return cls(
            query_key=str(raw["query_key"]),
            t_exp=TimePoint.parse_canonical(str(raw["t_exp"])),
            computed_at=float(raw["computed_at"]),
            ttl_days=float(raw["ttl_days"]),
            source=str(raw["source"]),
            s_self=float(raw["s_self"]),
        )


class ThresholdCache:
    """Dictionary cache persisted as one JSON record per line.

    The whole file is replayed at startup (later lines win, corrupt
    lines are skipped and counted), writes append, and compact()
    rewrites only live entries. Reads share a lock with writes; the
    critical sections are tiny.
    """

    def __init__(
        self,
        path: str | None = None,
        ttl_days: float = DEFAULT_TTL_DAYS,
        clock: Callable[[], float] = time.time,
    ):
        self.path = path
        self.ttl_days = ttl_days
        self._clock = clock
        self._lock = threading.RLock()
        self._entries: dict[str, ThresholdCacheEntry] = {}
        self.corrupt_lines = 0
        if path is not None:
            self._load()

    def _load(self) -> None:
        if self.path is None or not os.path.exists(self.path):
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = ThresholdCacheEntry.from_record(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    self.corrupt_lines += 1
                    continue
                self._entries[entry.query_key] = entry
        if self.corrupt_lines:
            logger.warning(
                "cache %s: skipped %d corrupt lines", self.path, self.corrupt_lines
            )

    def lookup(self, query: str) -> ThresholdCacheEntry | None:
        key = normalize_query_key(query)
        now = self._clock()
        with self._lock:
            entry = self._entries.get(key)
        if entry is not None and entry.fresh_at(now):
            return entry
        return None

    def store(
        self, query: str, t_exp: TimePoint, s_self: float, source: str = "backend"
    ) -> ThresholdCacheEntry:
        entry = ThresholdCacheEntry(
            query_key=normalize_query_key(query),
            t_exp=t_exp,
            computed_at=self._clock(),
            ttl_days=self.ttl_days,
            source=source,
            s_self=s_self,
        )
        with self._lock:
            self._entries[entry.query_key] = entry
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
        return entry

    def compact(self) -> int:
        """Rewrite the file with only live entries; returns the count."""
        now = self._clock()
        with self._lock:
            live = {k: e for k, e in self._entries.items() if e.fresh_at(now)}
            self._entries = live
            if self.path is not None:
                tmp = self.path + ".tmp"
                with open(tmp, "w", encoding="utf-8") as fh:
                    for key in sorted(live):
                        fh.write(json.dumps(live[key].to_record(), sort_keys=True) + "\n")
                os.replace(tmp, self.path)
            return len(live)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class CircuitBreaker:
    """Closed / open / half-open guard around the reasoning pipeline.

    Opens after a run of consecutive failures; after the open interval
    it admits exactly probe_count requests, and the first success closes
    it while any failure reopens it. The clock is injectable for tests.
    """

    def __init__(
        self,
        failure_threshold: int = DEFAULT_FAILURE_THRESHOLD,
        open_seconds: float = DEFAULT_OPEN_SECONDS,
        probe_count: int = DEFAULT_PROBE_COUNT,
        clock: Callable[[], float] = time.time,
    ):
        if failure_threshold < 1 or probe_count < 1 or open_seconds < 0:
            raise ValueError("bad breaker configuration")
        self.failure_threshold = failure_threshold
        self.open_seconds = open_seconds
        self.probe_count = probe_count
        self._clock = clock
        self._lock = threading.RLock()
        self._state = "closed"
        self._consecutive_failures = 0
        self._opened_at = 0.0
        self._probes_left = 0

    @property
    def state(self) -> str:
        with self._lock:
            self._advance()
            return self._state

    @property
    def consecutive_failures(self) -> int:
        with self._lock:
            return self._consecutive_failures

    def _advance(self) -> None:
        # Open -> half-open strictly after the open interval elapses.
        if self._state == "open":
            if self._clock() - self._opened_at >= self.open_seconds:
                self._state = "half_open"
                self._probes_left = self.probe_count

    def allow_request(self) -> bool:
        with self._lock:
            self._advance()
            if self._state == "closed":
                return True
            if self._state == "half_open" and self._probes_left > 0:
                self._probes_left -= 1
                return True
            return False

    def record_success(self) -> None:
        with self._lock:
            self._consecutive_failures = 0
            if self._state in ("half_open", "open"):
                self._state = "closed"

    def record_failure(self) -> None:
        with self._lock:
            self._advance()
            if self._state == "half_open":
                self._trip()
                return
            self._consecutive_failures += 1
            if self._state == "closed" and \
                    self._consecutive_failures >= self.failure_threshold:
                self._trip()

    def _trip(self) -> None:
        self._state = "open"
        self._opened_at = self._clock()
        self._probes_left = 0

    def force_open(self) -> None:
        """Test hook: trip immediately regardless of failure history."""
        with self._lock:
            self._trip()
            self._consecutive_failures = max(
                self._consecutive_failures, self.failure_threshold
            )

    def force_close(self) -> None:
        """Test hook: reset to a clean closed state."""
        with self._lock:
            self._state = "closed"
            self._consecutive_failures = 0
            self._probes_left = 0

    def snapshot(self) -> dict:
        with self._lock:
            self._advance()
            return {
                "state": self._state,
                "consecutive_failures": self._consecutive_failures,
                "opened_at": self._opened_at,
            }


@dataclass(frozen=True)
class ExpirySignal:
    """The online feature: a binary flag plus provenance."""

    f_exp: int
    t_exp_used: TimePoint | None
    provenance: str
    breaker_state: str


@dataclass(frozen=True)
class FeatureVector:
    """Ranker-facing features; crosses are exact products."""

    f_exp: int
    s_rel_doc: float
    authority: float
    cross_rel: float
    cross_auth: float
    age_days: float

    def __post_init__(self) -> None:
        values = (self.s_rel_doc, self.authority,
                  self.cross_rel, self.cross_auth, self.age_days)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("feature vector fields must be finite")

    def to_record(self) -> dict:
        return {
            "f_exp": self.f_exp,
            "s_rel_doc": self.s_rel_doc,
            "authority": self.authority,
            "cross_rel": self.cross_rel,
            "cross_auth": self.cross_auth,
            "age_days": self.age_days,
        }

    @classmethod
    def from_record(cls, raw: dict) -> "FeatureVector":
        return cls(
            f_exp=int(raw["f_exp"]),
            s_rel_doc=float(raw["s_rel_doc"]),
            authority=float(raw["authority"]),
            cross_rel=float(raw["cross_rel"]),
            cross_auth=float(raw["cross_auth"]),
            age_days=float(raw["age_days"]),
        )


def expiry_flag(t_i: TimePoint, t_exp: TimePoint) -> int:
    """1 iff the document time is strictly after the horizon.

    Strict comparison under midpoint resolution; equality gives 0, so a
    document dated exactly at the horizon is not validated fresh.
    """
    return 1 if strictly_after(t_i, t_exp) else 0


def document_time_factor(
    doc: Document,
    policy: str = "pub_time",
    backend=None,
    parser=None,
    rule_table=None,
) -> TimePoint:
    """The document-side time entering the flag comparison.

    pub_time: the publication date. content_time: the event time the
    forward pass anchors on when reasoning over the document alone
    (its own publication date serves as the reference clock), falling
    back to pub_time on any failure.
    """
    if policy == "pub_time":
        return doc.pub_time
    if policy != "content_time":
        raise ValueError(f"unknown time-factor policy {policy!r}")
    try:
        query = doc.title or (doc.sentences[0] if doc.sentences else "document")
        result = compute_verdict(
            query, [doc], doc.pub_time,
            backend=backend, rule_table=rule_table, parser=parser,
        )
        return result.outcome.anchor_event or doc.pub_time
    except Exception:
        logger.debug("content_time inference failed for %s; using pub_time",
                     doc.docid, exc_info=True)
        return doc.pub_time


def sanity_check(
    t_exp: TimePoint,
    search_time: TimePoint,
    past_bound_days: float = DEFAULT_PAST_BOUND_DAYS,
    future_bound_days: float = DEFAULT_FUTURE_BOUND_DAYS,
) -> bool:
    """Accept horizons inside [search - past_bound, search + future_bound].

    A horizon outside the window signals a distribution problem upstream
    and routes the request to the fallback path.
    """
    gap = t_exp.resolve_ordinal() - search_time.resolve_ordinal()
    return -past_bound_days <= gap <= future_bound_days


def get_threshold(
    query: str,
    search_time: TimePoint,
    cache: ThresholdCache,
    backend_pipeline: ThresholdPipeline,
    breaker: CircuitBreaker,
    past_bound_days: float = DEFAULT_PAST_BOUND_DAYS,
    future_bound_days: float = DEFAULT_FUTURE_BOUND_DAYS,
) -> tuple[TimePoint | None, str, float]:
    """Three-tier horizon acquisition: cache, live pipeline, fallback.

    Returns (t_exp or None, provenance, s_self). Nothing raises: any
    pipeline failure or sanity rejection records a breaker failure and
    collapses to ("fallback", flag 0 downstream).
    """
    entry = cache.lookup(query)
    if entry is not None:
        return entry.t_exp, "cache", entry.s_self

    if not breaker.allow_request():
        return None, "fallback", 0.0
    try:
        t_exp, s_self = backend_pipeline(query, search_time)
    except Exception:
        logger.debug("threshold pipeline failed for %r", query, exc_info=True)
        breaker.record_failure()
        return None, "fallback", 0.0
    if t_exp is None or not sanity_check(
        t_exp, search_time, past_bound_days, future_bound_days
    ):
        breaker.record_failure()
        return None, "fallback", 0.0
    breaker.record_success()
    try:
        cache.store(query, t_exp, s_self)
    except OSError:
        logger.warning("cache write failed for %r", query, exc_info=True)
    return t_exp, "backend", s_self


def make_signal(
    query: str,
    doc: Document,
    search_time: TimePoint,
    cache: ThresholdCache,
    backend_pipeline: ThresholdPipeline,
    breaker: CircuitBreaker,
    time_factor_policy: str = "pub_time",
    backend=None,
    parser=None,
    rule_table=None,
    past_bound_days: float = DEFAULT_PAST_BOUND_DAYS,
    future_bound_days: float = DEFAULT_FUTURE_BOUND_DAYS,
) -> ExpirySignal:
    """Binary freshness signal for one (query, document) pair.

    Never raises: every failure path yields flag 0 with fallback
    provenance, per the graceful-degradation contract.
    """
    try:
        t_exp, provenance, _ = get_threshold(
            query, search_time, cache, backend_pipeline, breaker,
            past_bound_days, future_bound_days,
        )
        if provenance == "fallback" or t_exp is None:
            return ExpirySignal(0, None, "fallback", breaker.state)
        t_i = document_time_factor(
            doc, time_factor_policy, backend=backend,
            parser=parser, rule_table=rule_table,
        )
        return ExpirySignal(expiry_flag(t_i, t_exp), t_exp, provenance, breaker.state)
    except Exception:
        logger.exception("signal computation failed; degrading to flag 0")
        try:
            state = breaker.state
        except Exception:
            state = "closed"
        return ExpirySignal(0, None, "fallback", state)


def emit_features(
    signal: ExpirySignal,
    doc: Document,
    s_rel_doc: float,
    search_time: TimePoint,
    time_factor: TimePoint | None = None,
) -> FeatureVector:
    """Feature vector handed to the ranker; the integration boundary."""
    age = elapsed_days(time_factor or doc.pub_time, search_time)
    return FeatureVector(
        f_exp=signal.f_exp,
        s_rel_doc=s_rel_doc,
        authority=doc.authority,
        cross_rel=signal.f_exp * s_rel_doc,
        cross_auth=signal.f_exp * doc.authority,
        age_days=age,
    )
