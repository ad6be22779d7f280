"""End-to-end verdict computation for one query over a document corpus.

Order of operations: pick candidate documents by keyword overlap, build
the focused chunk set, run forward inference (sampled when the backend
is nondeterministic), stress-test backward, fuse candidates under
authority weighting, and select the sample closest to the fused
consensus.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .corpus import Document
from .errors import NoEvidenceError
from .extraction import (
    DEFAULT_ALPHA,
    DEFAULT_TAU,
    DEFAULT_WINDOW,
    FocusedChunkSet,
    QueryAnchor,
    build_focus,
    extract_query_anchor,
)
from .fusion import ExpirationVerdict, fuse
from .inference import (
    DEFAULT_H_NORM,
    DEFAULT_LAMBDA1,
    DEFAULT_LAMBDA2,
    DEFAULT_SAMPLES,
    Exemplar,
    InferenceOutcome,
    OracleBackend,
    ReasoningBackend,
    build_prompt,
    consistency_penalty,
    granularity_penalty,
    infer_forward,
    temporal_objective,
    time_distance,
    verify_backward,
)
from .rules import RuleTable
from .temporal_parser import TemporalParser
from .text import DEFAULT_STOPWORDS, tokenize
from .timepoint import TimePoint, agrees_at_granularity

__all__ = [
    "VerdictResult",
    "select_candidates",
    "compute_verdict",
    "DEFAULT_MAX_CANDIDATE_DOCS",
]

DEFAULT_MAX_CANDIDATE_DOCS = 20


@dataclass(frozen=True)
class VerdictResult:
    """Everything the pipeline produced for one query."""

    outcome: InferenceOutcome
    verdict: ExpirationVerdict
    focus: FocusedChunkSet
    anchor: QueryAnchor


def select_candidates(
    anchor: QueryAnchor,
    docs: Sequence[Document],
    limit: int = DEFAULT_MAX_CANDIDATE_DOCS,
) -> list[Document]:
    """Documents sharing at least one query keyword, best overlap first.

    Overlap counts distinct shared keywords over title plus body; ties
    break by docid so selection is stable across runs.
    """
    keywords = set(anchor.keywords)
    scored = []
    for doc in docs:
        tokens = set(tokenize(doc.title))
        for sentence in doc.sentences:
            tokens.update(tokenize(sentence))
        overlap = len(keywords & tokens)
        if overlap:
            scored.append((-overlap, doc.docid, doc))
    scored.sort(key=lambda item: (item[0], item[1]))
    return [doc for _, _, doc in scored[:limit]]


def compute_verdict(
    query: str,
    docs: Sequence[Document],
    search_time: TimePoint,
    backend: ReasoningBackend | None = None,
    rule_table: RuleTable | None = None,
    parser: TemporalParser | None = None,
    exemplars: Sequence[Exemplar] = (),
    samples: int = DEFAULT_SAMPLES,
    window: int = DEFAULT_WINDOW,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    decay_per_day: float | None = None,
    h_norm: float = DEFAULT_H_NORM,
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    max_candidate_docs: int = DEFAULT_MAX_CANDIDATE_DOCS,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> VerdictResult:
    """Full expiration verdict for a query against a corpus.

    Nondeterministic backends are sampled `samples` times; the returned
    outcome is the sample whose t_init scores best against the fused
    consensus horizon. Deterministic backends run once.
    """
    rule_table = rule_table or RuleTable.default()
    parser = parser or TemporalParser()
    backend = backend or OracleBackend(rule_table, parser)

    anchor = extract_query_anchor(query, search_time, parser, stopwords)
    candidates_docs = select_candidates(anchor, docs, max_candidate_docs)
    if not candidates_docs:
        raise NoEvidenceError(f"no candidate documents share keywords with {query!r}")
    focus = build_focus(
        anchor, candidates_docs, search_time,
        parser=parser, window=window, alpha=alpha, tau=tau,
        decay_per_day=decay_per_day, stopwords=stopwords,
    )
    if not focus.chunks:
        raise NoEvidenceError(f"no evidence chunks extracted for {query!r}")

    prompt_fwd = build_prompt(anchor, focus, search_time, exemplars, "forward")
    runs = 1 if backend.deterministic else max(1, samples)
    outcomes: list[InferenceOutcome] = []
    for _ in range(runs):
        outcome = infer_forward(backend, prompt_fwd)
        prompt_bwd = build_prompt(
            anchor, focus, search_time, exemplars, "backward",
            candidate=outcome.t_init,
        )
        backward, s_self = verify_backward(backend, prompt_bwd, outcome.forward)
        grown = list(outcome.candidates)
        if not agrees_at_granularity(backward.conclusion, outcome.t_init):
            # Contradiction: the stress test surfaced new horizons.
            for step in backward.steps:
                if step.asserts_expiry and step.time is not None:
                    if step.time not in grown:
                        grown.append(step.time)
        outcomes.append(replace(
            outcome, backward=backward, s_self=s_self, candidates=tuple(grown)
        ))

    pooled: list[TimePoint] = []
    for outcome in outcomes:
        for cand in outcome.candidates:
            if cand not in pooled:
                pooled.append(cand)

    consensus = fuse(
        pooled, focus, outcomes[0],
        rule_table=rule_table, parser=parser,
        reference_time=search_time, keywords=anchor.keywords,
    )

    def sample_score(indexed: tuple[int, InferenceOutcome]) -> tuple[float, int]:
        i, outcome = indexed
        objective = temporal_objective(
            time_distance(outcome.t_init, consensus.t_exp, h_norm),
            granularity_penalty(outcome.t_init, consensus.t_exp),
            consistency_penalty(outcome.s_self),
            lambda1, lambda2,
        )
        return objective, i

    _, best = min(enumerate(outcomes), key=sample_score)
    verdict = replace(consensus, s_self=best.s_self)
    return VerdictResult(outcome=best, verdict=verdict, focus=focus, anchor=anchor)
