"""Authority-weighted fusion of candidate expiration horizons.

Each focused chunk votes for the candidates it aligns with, weighted by
authority times relevance. The horizon with the most collective support
wins; ties break toward the earliest candidate, which withholds the
fresh boost rather than granting it wrongly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import UnsupportedVerdictError
from .extraction import FocusedChunk, FocusedChunkSet
from .inference import InferenceOutcome
from .rules import RuleTable, derive_expiry
from .temporal_parser import TemporalParser
from .timepoint import (
    TimePoint,
    agrees_at_granularity,
    hierarchical_match_depth,
    latest_timepoint,
)

__all__ = [
    "ExpirationVerdict",
    "chunk_weight",
    "alignment_indicator",
    "derived_chunk_expiry",
    "fuse",
]


@dataclass(frozen=True)
class ExpirationVerdict:
    """The fused horizon plus the per-candidate support that chose it."""

    t_exp: TimePoint
    support: dict[TimePoint, float]
    s_self: float
    chunk_count: int
    tie_broken: bool = False


def chunk_weight(chunk: FocusedChunk) -> float:
    """Joint evidence weight: source authority times chunk relevance."""
    return chunk.authority * chunk.s_rel


def derived_chunk_expiry(
    chunk: FocusedChunk,
    rule_table: RuleTable,
    parser: TemporalParser,
    reference_time: TimePoint,
    keywords: Sequence[str] = (),
) -> TimePoint:
    """The horizon this chunk implies under the shared rule table."""
    event = latest_timepoint(chunk.anchor_times) or chunk.pub_time
    derived = derive_expiry(
        rule_table, chunk.text(), list(keywords), event, parser, reference_time
    )
    return derived.expiry


def alignment_indicator(
    candidate: TimePoint,
    chunk: FocusedChunk,
    derived_expiry: TimePoint | None = None,
) -> int:
    """1 when the chunk's temporal content logically backs the candidate.

    Either some anchor time and the candidate agree up to the coarser
    granularity (containment or equality), or the chunk's rule-derived
    horizon (pass derived_expiry, typically via derived_chunk_expiry)
    matches the candidate at the candidate's granularity.
    """
    for anchor in chunk.anchor_times:
        matched = hierarchical_match_depth(anchor, candidate)
        if matched == min(anchor.depth, candidate.depth):
            return 1
    if derived_expiry is not None and agrees_at_granularity(derived_expiry, candidate):
        return 1
    return 0


def fuse(
    candidates: Sequence[TimePoint],
    focus: FocusedChunkSet,
    outcome: InferenceOutcome,
    rule_table: RuleTable | None = None,
    parser: TemporalParser | None = None,
    reference_time: TimePoint | None = None,
    keywords: Sequence[str] = (),
) -> ExpirationVerdict:
    """Pick the candidate with maximal weighted chunk support.

    support[c] = sum over chunks of chunk_weight * alignment_indicator.
    Zero-support candidates stay in the map for diagnostics but cannot
    win; if every candidate has zero support there is no verdict.
    Passing a rule table (with parser and reference time) enables the
    derived-horizon alignment branch.
    """
    if not candidates:
        raise ValueError("fuse requires at least one candidate")
    ordered = list(dict.fromkeys(candidates))
    derived: list[TimePoint | None] = []
    for chunk in focus.chunks:
        if rule_table is not None and parser is not None and reference_time is not None:
            derived.append(derived_chunk_expiry(
                chunk, rule_table, parser, reference_time, keywords
            ))
        else:
            derived.append(None)
    support: dict[TimePoint, float] = {}
    for cand in ordered:
        total = 0.0
        for chunk, chunk_expiry in zip(focus.chunks, derived):
            total += chunk_weight(chunk) * alignment_indicator(
                cand, chunk, chunk_expiry
            )
        support[cand] = total
    best = max(support.values())
    if best <= 0.0:
        raise UnsupportedVerdictError(
            "unsupported verdict: no candidate has positive support"
        )
    top = [c for c in ordered if support[c] == best]
    winner = min(top, key=lambda t: (t.chronological_key(), t.render()))
    return ExpirationVerdict(
        t_exp=winner,
        support=support,
        s_self=outcome.s_self,
        chunk_count=len(focus.chunks),
        tie_broken=len(top) > 1,
    )
