"""Query anchoring and time-aware chunk extraction.

Turns a query into (keywords, temporal entities) and each candidate
document into scored sentence-window chunks centered on its temporal
mentions. Chunks above the relevance threshold across all candidate
documents form the focused chunk set the downstream reasoning consumes.

All functions here are pure over immutable inputs, so concurrent use
needs no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .corpus import Document
from .errors import ConfigError
from .temporal_parser import (
    DocumentTemporalIndex,
    TemporalParser,
    build_temporal_index,
)
from .text import DEFAULT_STOPWORDS, content_tokens, tokenize
from .timepoint import TimePoint, elapsed_days, hierarchical_match_depth

__all__ = [
    "QueryAnchor",
    "FocusedChunk",
    "FocusedChunkSet",
    "extract_query_anchor",
    "window_chunks",
    "fallback_chunks",
    "rel_k",
    "rel_t",
    "score_chunk",
    "select_focus",
    "build_focus",
    "DEFAULT_ALPHA",
    "DEFAULT_TAU",
    "DEFAULT_WINDOW",
    "DEFAULT_HALF_LIFE_DAYS",
    "decay_rate",
]

DEFAULT_ALPHA = 0.6
DEFAULT_TAU = 0.35
DEFAULT_WINDOW = 5
DEFAULT_HALF_LIFE_DAYS = 30.0

# Span used for the synthetic title chunk, which sits outside the body.
TITLE_SPAN = (-1, -1)

SimilarityProvider = Callable[[Sequence[str], Sequence[str]], float]


def decay_rate(half_life_days: float = DEFAULT_HALF_LIFE_DAYS) -> float:
    """Per-day exponential decay rate for the given half-life."""
    if half_life_days <= 0:
        raise ConfigError("half_life_days must be positive")
    return math.log(2.0) / half_life_days


@dataclass(frozen=True)
class QueryAnchor:
    """Keywords plus temporal entities extracted from one query."""

    raw_query: str
    keywords: tuple[str, ...]
    temporal_entities: tuple[TimePoint, ...]

    @property
    def has_temporal(self) -> bool:
        return bool(self.temporal_entities)


@dataclass(frozen=True)
class FocusedChunk:
    """A contiguous sentence window from one document, with scores.

    ``span`` holds inclusive sentence indices; the title pseudo-chunk
    uses (-1, -1) since the title is not part of the body.
    """

    source_id: str
    span: tuple[int, int]
    sentences: tuple[str, ...]
    anchor_times: tuple[TimePoint, ...]
    pub_time: TimePoint
    authority: float
    rel_k: float = 0.0
    rel_t: float = 0.0
    s_rel: float = 0.0
    is_fallback: bool = False

    def text(self) -> str:
        return " ".join(self.sentences)

    def most_recent_anchor(self) -> TimePoint | None:
        if not self.anchor_times:
            return None
        return max(self.anchor_times, key=lambda t: (t.chronological_key(), t.render()))


@dataclass(frozen=True)
class FocusedChunkSet:
    """Chunks sorted by s_rel descending; ties keep pooled input order."""

    chunks: tuple[FocusedChunk, ...]
    fallback_used: bool = False

    def __iter__(self):
        return iter(self.chunks)

    def __len__(self) -> int:
        return len(self.chunks)


def extract_query_anchor(
    query: str,
    reference_time: TimePoint,
    parser: TemporalParser | None = None,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> QueryAnchor:
    """Split a query into content keywords and temporal entities.

    Keywords are deduplicated in first-occurrence order. A query made
    entirely of stopwords keeps its raw tokens so keywords are never
    empty for a tokenizable query.
    """
    if not query:
        raise ValueError("query must be non-empty")
    tokens = tokenize(query)
    keywords = [t for t in tokens if t not in stopwords]
    if not keywords:
        keywords = tokens
    mentions = (parser or TemporalParser()).parse_sentence(query, 0, reference_time)
    entities = tuple(dict.fromkeys(m.normalized for m in mentions))
    return QueryAnchor(
        raw_query=query,
        keywords=tuple(dict.fromkeys(keywords)),
        temporal_entities=entities,
    )


def window_chunks(
    doc: Document,
    index: DocumentTemporalIndex,
    window: int = DEFAULT_WINDOW,
) -> list[FocusedChunk]:
    """One window per anchor sentence, centered and boundary-truncated.

    Duplicate spans collapse to one chunk; overlapping distinct spans
    are all kept. Empty index yields an empty list (use fallback_chunks).
    """
    _check_window(window)
    if index.is_empty():
        return []
    half = window // 2
    n = len(doc.sentences)
    chunks: dict[tuple[int, int], FocusedChunk] = {}
    for anchor in index.anchor_sentences():
        start = max(0, anchor - half)
        end = min(n - 1, anchor + half)
        span = (start, end)
        if span in chunks:
            continue
        chunks[span] = FocusedChunk(
            source_id=doc.docid,
            span=span,
            sentences=tuple(doc.sentences[start:end + 1]),
            anchor_times=tuple(index.times_in_span(start, end)),
            pub_time=doc.pub_time,
            authority=doc.authority,
        )
    return list(chunks.values())


def fallback_chunks(doc: Document, window: int = DEFAULT_WINDOW) -> list[FocusedChunk]:
    """Title chunk plus the leading sentences, for dateless documents."""
    _check_window(window)
    out: list[FocusedChunk] = []
    if doc.title:
        out.append(FocusedChunk(
            source_id=doc.docid,
            span=TITLE_SPAN,
            sentences=(doc.title,),
            anchor_times=(),
            pub_time=doc.pub_time,
            authority=doc.authority,
            is_fallback=True,
        ))
    if doc.sentences:
        end = min(window, len(doc.sentences)) - 1
        out.append(FocusedChunk(
            source_id=doc.docid,
            span=(0, end),
            sentences=tuple(doc.sentences[:end + 1]),
            anchor_times=(),
            pub_time=doc.pub_time,
            authority=doc.authority,
            is_fallback=True,
        ))
    return out


def _check_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window size must be odd and >= 1, got {window}")


def term_frequency_cosine(chunk_tokens: Sequence[str], keywords: Sequence[str]) -> float:
    """Cosine between the chunk's term counts and the keyword indicator."""
    if not chunk_tokens or not keywords:
        return 0.0
    counts: dict[str, int] = {}
    for token in chunk_tokens:
        counts[token] = counts.get(token, 0) + 1
    keyset = set(keywords)
    dot = float(sum(c for t, c in counts.items() if t in keyset))
    if dot == 0.0:
        return 0.0
    chunk_norm = math.sqrt(sum(c * c for c in counts.values()))
    key_norm = math.sqrt(len(keyset))
    return dot / (chunk_norm * key_norm)


def rel_k(
    chunk: FocusedChunk,
    keywords: Sequence[str],
    similarity: SimilarityProvider = term_frequency_cosine,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> float:
    """Semantic relevance of a chunk to the query keywords, in [0, 1].

    The provider is pluggable; the default is a deterministic
    term-frequency cosine over stopword-filtered chunk tokens.
    """
    return similarity(content_tokens(chunk.text(), stopwords), keywords)


def rel_t(
    chunk: FocusedChunk,
    temporal_entities: Sequence[TimePoint],
    reference_time: TimePoint,
    decay_per_day: float | None = None,
) -> float:
    """Temporal relevance in [0, 1].

    With query temporal entities: best hierarchical agreement ratio
    between any query entity and any chunk anchor time (no anchors
    scores 0). Without them: exponential recency decay of the chunk's
    most recent anchor time, falling back to publication time.
    """
    rate = decay_rate() if decay_per_day is None else decay_per_day
    if rate <= 0:
        raise ConfigError("decay_per_day must be positive")
    if temporal_entities:
        if not chunk.anchor_times:
            return 0.0
        best = 0.0
        for tq in temporal_entities:
            for tc in chunk.anchor_times:
                matched = hierarchical_match_depth(tq, tc)
                ratio = matched / max(tq.depth, tc.depth)
                if ratio > best:
                    best = ratio
        return best
    newest = chunk.most_recent_anchor() or chunk.pub_time
    return math.exp(-rate * elapsed_days(newest, reference_time))


def score_chunk(
    chunk: FocusedChunk,
    anchor: QueryAnchor,
    reference_time: TimePoint,
    alpha: float = DEFAULT_ALPHA,
    decay_per_day: float | None = None,
    similarity: SimilarityProvider = term_frequency_cosine,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> FocusedChunk:
    """Composite relevance: keyword gate times a convex score blend.

    A chunk containing no query keyword scores exactly 0 regardless of
    its temporal content.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    chunk_tokens = set(tokenize(chunk.text()))
    gate = 1.0 if chunk_tokens & set(anchor.keywords) else 0.0
    if gate == 0.0:
        return replace(chunk, rel_k=0.0, rel_t=0.0, s_rel=0.0)
    k_score = rel_k(chunk, anchor.keywords, similarity, stopwords)
    t_score = rel_t(chunk, anchor.temporal_entities, reference_time, decay_per_day)
    composite = gate * (alpha * k_score + (1.0 - alpha) * t_score)
    return replace(chunk, rel_k=k_score, rel_t=t_score, s_rel=composite)


def select_focus(
    candidates: Sequence[FocusedChunk],
    tau: float = DEFAULT_TAU,
) -> FocusedChunkSet:
    """Keep chunks scoring strictly above tau, sorted descending.

    When nothing clears the threshold the fallback chunks among the
    candidates are kept instead and the set is flagged, so dateless or
    weakly matching documents still contribute evidence.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    kept = [c for c in candidates if c.s_rel > tau]
    if kept:
        kept.sort(key=lambda c: -c.s_rel)
        return FocusedChunkSet(chunks=tuple(kept), fallback_used=False)
    fallback = [c for c in candidates if c.is_fallback]
    fallback.sort(key=lambda c: -c.s_rel)
    return FocusedChunkSet(chunks=tuple(fallback), fallback_used=True)


def build_focus(
    anchor: QueryAnchor,
    docs: Sequence[Document],
    reference_time: TimePoint,
    parser: TemporalParser | None = None,
    window: int = DEFAULT_WINDOW,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    decay_per_day: float | None = None,
    similarity: SimilarityProvider = term_frequency_cosine,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> FocusedChunkSet:
    """Focused chunk set for one query over its candidate documents.

    Chunks are pooled across documents before thresholding; each keeps
    its source_id so fusion can weight by per-document authority.
    Relative dates inside a document resolve against its publication
    time, not the query time.
    """
    parser = parser or TemporalParser()
    pooled: list[FocusedChunk] = []
    for doc in docs:
        index = build_temporal_index(doc.sentences, doc.pub_time, parser)
        raw = window_chunks(doc, index, window)
        if not raw:
            raw = fallback_chunks(doc, window)
        for chunk in raw:
            pooled.append(score_chunk(
                chunk, anchor, reference_time,
                alpha=alpha, decay_per_day=decay_per_day,
                similarity=similarity, stopwords=stopwords,
            ))
    return select_focus(pooled, tau)
