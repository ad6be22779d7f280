"""Expiration reasoning over focused chunks.

A prompt bundle renders the query, the evidence chunks, and an absolute
search-time anchor into a deterministic structured prompt. A reasoning
backend turns the bundle into a trajectory of cited steps plus a
concluded expiration horizon. The forward pass proposes a horizon; the
backward pass assumes it and stress-tests the evidence for superseding
events, yielding a self-consistency score.

Two backends ship: OracleBackend derives horizons from the event-class
rule table and is fully deterministic (the test and evaluation stand-in
for a large model); RemoteBackend calls an HTTP completion endpoint and
hard-validates the structured response.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence, runtime_checkable

from .errors import (
    BackendError,
    BackendSchemaError,
    BackendTimeoutError,
    NoEvidenceError,
    NoVerdictError,
)
from .extraction import FocusedChunkSet, QueryAnchor
from .rules import RuleTable, derive_expiry
from .temporal_parser import TemporalParser
from .text import tokenize
from .timepoint import (
    TimePoint,
    agrees_at_granularity,
    granularity_depth,
    latest_timepoint,
    strictly_after,
)

logger = logging.getLogger(__name__)

__all__ = [
    "PromptChunk",
    "PromptBundle",
    "ReasoningStep",
    "ReasoningTrajectory",
    "BackendResponse",
    "ReasoningBackend",
    "InferenceOutcome",
    "Exemplar",
    "load_exemplars",
    "OracleBackend",
    "RemoteBackend",
    "build_prompt",
    "infer_forward",
    "verify_backward",
    "consistency_penalty",
    "granularity_penalty",
    "time_distance",
    "temporal_objective",
    "DEFAULT_H_NORM",
    "DEFAULT_LAMBDA1",
    "DEFAULT_LAMBDA2",
    "DEFAULT_SAMPLES",
]

DEFAULT_H_NORM = 365.0
DEFAULT_LAMBDA1 = 0.5
DEFAULT_LAMBDA2 = 0.5
DEFAULT_SAMPLES = 3

# Dates that commonly surround content but never bound its validity.
NEGATIVE_CONSTRAINTS = (
    "Do not extract auxiliary dates (bylines, copyright lines, navigation).",
    "Do not conflate distinct temporal entities.",
    "Anchor every relative expression to the given search time.",
)

_EXEMPLAR_LIMIT = 2


@dataclass(frozen=True)
class Exemplar:
    """One few-shot demonstration, tagged with a domain keyword."""

    domain: str
    query: str
    chunks: tuple[str, ...]
    reasoning: str
    expiration: str


def load_exemplars(path: str) -> tuple[Exemplar, ...]:
    """Load exemplars from a line-delimited record file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                out.append(Exemplar(
                    domain=str(raw["domain"]),
                    query=str(raw["query"]),
                    chunks=tuple(str(c) for c in raw.get("chunks", [])),
                    reasoning=str(raw.get("reasoning", "")),
                    expiration=str(raw["expiration"]),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad exemplar record: {exc}") from exc
    return tuple(out)


@dataclass(frozen=True)
class PromptChunk:
    """One evidence block inside a prompt bundle."""

    chunk_id: str
    source_id: str
    text: str
    anchor_times: tuple[TimePoint, ...]
    pub_time: TimePoint
    authority: float
    s_rel: float
    is_fallback: bool


@dataclass(frozen=True)
class PromptBundle:
    """Everything a backend needs, plus a deterministic text rendering.

    search_time is always stored at day granularity; backward mode
    additionally carries the candidate horizon under test.
    """

    query: str
    keywords: tuple[str, ...]
    query_times: tuple[TimePoint, ...]
    search_time: TimePoint
    chunks: tuple[PromptChunk, ...]
    few_shot: tuple[Exemplar, ...]
    negative_constraints: tuple[str, ...]
    mode: str
    candidate: TimePoint | None = None

    def render(self) -> str:
        lines = [
            "TASK: determine when the answer to the query stops being valid.",
            f"MODE: {self.mode}",
            f"QUERY: {self.query}",
            f"KEYWORDS: {', '.join(self.keywords) if self.keywords else '(none)'}",
            "QUERY TIMES: " + (
                ", ".join(t.render() for t in self.query_times)
                if self.query_times else "(none)"
            ),
            f"SEARCH TIME: {self.search_time.render()}",
            "EVIDENCE:",
        ]
        for c in self.chunks:
            times = ", ".join(t.render() for t in c.anchor_times) or "(none)"
            lines.append(
                f"[{c.chunk_id}] source={c.source_id} authority={c.authority:.4f} "
                f"published={c.pub_time.render()} times={times} "
                f"s_rel={c.s_rel:.6f} fallback={'yes' if c.is_fallback else 'no'}"
            )
            lines.append(f"    {c.text}")
        lines.append("CONSTRAINTS:")
        lines.extend(f"- {c}" for c in self.negative_constraints)
        if self.few_shot:
            lines.append("EXEMPLARS:")
            for ex in self.few_shot:
                lines.append(f"({ex.domain}) {ex.query} -> {ex.expiration}: {ex.reasoning}")
        if self.mode == "backward":
            lines.append(f"CANDIDATE: {self.candidate.render()}")
            lines.append(
                "INSTRUCTION: assume the expiration above, re-derive what each "
                "evidence block implies, and report any later event that "
                "supersedes it."
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class ReasoningStep:
    """One cited claim; asserts_expiry marks the time as a horizon candidate."""

    claim: str
    chunk_id: str
    time: TimePoint | None = None
    asserts_expiry: bool = False


@dataclass(frozen=True)
class ReasoningTrajectory:
    """Ordered steps plus a conclusion (None means indeterminate).

    anchor_event, when known, is the event time the conclusion was
    derived from; the oracle always sets it.
    """

    steps: tuple[ReasoningStep, ...]
    conclusion: TimePoint | None
    anchor_event: TimePoint | None = None


@dataclass(frozen=True)
class BackendResponse:
    """What a backend returns: a trajectory and an optional self score."""

    trajectory: ReasoningTrajectory
    self_score: float | None = None


@runtime_checkable
class ReasoningBackend(Protocol):
    """Capability contract for reasoning backends."""

    deterministic: bool

    def complete(self, prompt: PromptBundle) -> BackendResponse:
        ...


@dataclass(frozen=True)
class InferenceOutcome:
    """Forward (and optionally backward) reasoning result for one query."""

    t_init: TimePoint
    candidates: tuple[TimePoint, ...]
    forward: ReasoningTrajectory
    backward: ReasoningTrajectory | None = None
    s_self: float = 1.0
    anchor_event: TimePoint | None = None


def _select_exemplars(
    exemplars: Sequence[Exemplar], query_tokens: set[str]
) -> tuple[Exemplar, ...]:
    # Domain tag match against query tokens; generic exemplars otherwise.
    matched = [e for e in exemplars if e.domain.lower() in query_tokens]
    if not matched:
        matched = [e for e in exemplars if e.domain.lower() == "general"]
    return tuple(matched[:_EXEMPLAR_LIMIT])


def build_prompt(
    anchor: QueryAnchor,
    focus: FocusedChunkSet,
    search_time: TimePoint,
    exemplars: Sequence[Exemplar] = (),
    mode: str = "forward",
    candidate: TimePoint | None = None,
) -> PromptBundle:
    """Assemble a prompt bundle; same inputs render byte-identically.

    The search time is snapped to day granularity (midpoint of its span)
    so every prompt carries a fully absolute anchor.
    """
    if mode not in ("forward", "backward"):
        raise ValueError(f"unknown prompt mode {mode!r}")
    if not focus.chunks:
        raise NoEvidenceError("no evidence: focused chunk set is empty")
    if mode == "backward" and candidate is None:
        raise ValueError("backward mode requires a candidate horizon")
    if search_time.depth != 3:
        search_time = TimePoint.from_date(search_time.midpoint_date())
    chunks = tuple(
        PromptChunk(
            chunk_id=f"c{i + 1}",
            source_id=c.source_id,
            text=c.text(),
            anchor_times=c.anchor_times,
            pub_time=c.pub_time,
            authority=c.authority,
            s_rel=c.s_rel,
            is_fallback=c.is_fallback,
        )
        for i, c in enumerate(focus.chunks)
    )
    return PromptBundle(
        query=anchor.raw_query,
        keywords=anchor.keywords,
        query_times=anchor.temporal_entities,
        search_time=search_time,
        chunks=chunks,
        few_shot=_select_exemplars(exemplars, set(tokenize(anchor.raw_query))),
        negative_constraints=NEGATIVE_CONSTRAINTS,
        mode=mode,
        candidate=candidate,
    )


class OracleBackend:
    """Deterministic rule-table reasoner standing in for a large model.

    Forward: derive each chunk's implied horizon (explicit statement,
    else event class + validity), anchor the conclusion on the
    highest-relevance chunk (explicit statements take precedence), and
    assert horizons only for evidence not newer than the anchored event.
    Backward: re-derive everything and report any strictly newer event
    whose horizon disagrees with the candidate under test.
    """

    deterministic = True

    def __init__(
        self,
        rule_table: RuleTable | None = None,
        parser: TemporalParser | None = None,
    ):
        self.rule_table = rule_table or RuleTable.default()
        self.parser = parser or TemporalParser()

    def complete(self, prompt: PromptBundle) -> BackendResponse:
        if prompt.mode == "forward":
            return BackendResponse(self._reason(prompt, candidate=None))
        return BackendResponse(self._reason(prompt, candidate=prompt.candidate))

    def _derivations(self, prompt: PromptBundle):
        extra = list(prompt.keywords)
        out = []
        for chunk in prompt.chunks:
            event = latest_timepoint(chunk.anchor_times) or chunk.pub_time
            out.append((chunk, derive_expiry(
                self.rule_table, chunk.text, extra, event,
                self.parser, prompt.search_time,
            )))
        return out

    def _reason(
        self, prompt: PromptBundle, candidate: TimePoint | None
    ) -> ReasoningTrajectory:
        derivs = self._derivations(prompt)
        # No dated evidence at all and nothing explicit: refuse to guess.
        toothless = all(
            chunk.is_fallback and not chunk.anchor_times for chunk, _ in derivs
        ) and not any(d.source == "explicit" for _, d in derivs)
        if toothless:
            steps = tuple(
                ReasoningStep(
                    claim=f"evidence {chunk.chunk_id} carries no temporal anchor",
                    chunk_id=chunk.chunk_id,
                )
                for chunk, _ in derivs
            )
            return ReasoningTrajectory(steps=steps, conclusion=None)

        anchor_idx = 0
        for i, (_, d) in enumerate(derivs):
            if d.source == "explicit":
                anchor_idx = i
                break
        anchor_event = derivs[anchor_idx][1].event_time
        t_init = derivs[anchor_idx][1].expiry

        steps: list[ReasoningStep] = []
        for chunk, d in derivs:
            if d.source == "explicit" or not strictly_after(d.event_time, anchor_event):
                steps.append(ReasoningStep(
                    claim=(
                        f"evidence {chunk.chunk_id} ({d.source}) implies "
                        f"expiration {d.expiry.render()}"
                    ),
                    chunk_id=chunk.chunk_id,
                    time=d.expiry,
                    asserts_expiry=True,
                ))
            else:
                steps.append(ReasoningStep(
                    claim=(
                        f"evidence {chunk.chunk_id} reports a later event "
                        f"at {d.event_time.render()}"
                    ),
                    chunk_id=chunk.chunk_id,
                    time=d.event_time,
                ))

        conclusion = t_init
        if candidate is not None:
            # Backward stress test: strictly newer events whose implied
            # horizon disagrees with the candidate supersede it.
            superseding = [
                d for _, d in derivs
                if strictly_after(d.event_time, anchor_event)
                and not agrees_at_granularity(d.expiry, candidate)
            ]
            if superseding:
                for d in superseding:
                    steps.append(ReasoningStep(
                        claim=(
                            f"event at {d.event_time.render()} supersedes the "
                            f"assumed horizon; implies {d.expiry.render()}"
                        ),
                        chunk_id=self._chunk_for(derivs, d),
                        time=d.expiry,
                        asserts_expiry=True,
                    ))
                conclusion = latest_timepoint(d.expiry for d in superseding)
            else:
                conclusion = candidate
        return ReasoningTrajectory(
            steps=tuple(steps), conclusion=conclusion, anchor_event=anchor_event
        )

    @staticmethod
    def _chunk_for(derivs, derivation) -> str:
        for chunk, d in derivs:
            if d is derivation:
                return chunk.chunk_id
        raise AssertionError("derivation lost its chunk")


class RemoteBackend:
    """HTTP completion backend with strict structured-output validation.

    Request: POST JSON {mode, prompt, response_schema}. Response must be
    JSON {trajectory: [{claim, chunk_id, time|null}...], conclusion:
    canonical time or "indeterminate", self_score: number|null}. Any
    schema violation raises; a timeout is retried once, then raises.
    """

    deterministic = False

    _RESPONSE_SCHEMA = {
        "trajectory": [{"claim": "string", "chunk_id": "string",
                        "time": "YYYY[-MM[-DD]] or null"}],
        "conclusion": "YYYY[-MM[-DD]] or 'indeterminate'",
        "self_score": "number in [0,1] or null",
    }

    def __init__(
        self,
        endpoint: str,
        deadline_ms: float = 800.0,
        max_concurrency: int = 4,
        retries: int = 1,
    ):
        if not endpoint:
            raise ValueError("RemoteBackend requires an endpoint URL")
        self.endpoint = endpoint
        self.deadline_ms = deadline_ms
        self.retries = retries
        self._slots = threading.Semaphore(max_concurrency)

    def complete(self, prompt: PromptBundle) -> BackendResponse:
        payload = json.dumps({
            "mode": prompt.mode,
            "prompt": prompt.render(),
            "response_schema": self._RESPONSE_SCHEMA,
        }, sort_keys=True).encode("utf-8")
        raw = self._post(payload)
        return self._parse(raw)

    def _post(self, payload: bytes) -> bytes:
        last_timeout: Exception | None = None
        for attempt in range(self.retries + 1):
            request = urllib.request.Request(
                self.endpoint,
                data=payload,
                headers={"Content-Type": "application/json"},
                method="POST",
            )
            try:
                with self._slots:
                    with urllib.request.urlopen(
                        request, timeout=self.deadline_ms / 1000.0
                    ) as resp:
                        return resp.read()
            except urllib.error.HTTPError as exc:
                raise BackendError(f"backend returned HTTP {exc.code}") from exc
            except (TimeoutError, socket.timeout) as exc:
                last_timeout = exc
                logger.warning("backend timeout (attempt %d)", attempt + 1)
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, (TimeoutError, socket.timeout)):
                    last_timeout = exc
                    logger.warning("backend timeout (attempt %d)", attempt + 1)
                else:
                    raise BackendError(f"backend unreachable: {exc.reason}") from exc
        raise BackendTimeoutError(
            f"backend timed out after {self.retries + 1} attempts"
        ) from last_timeout

    @staticmethod
    def _parse(raw: bytes) -> BackendResponse:
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BackendSchemaError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise BackendSchemaError("response root must be an object")
        steps_raw = doc.get("trajectory")
        if not isinstance(steps_raw, list):
            raise BackendSchemaError("response lacks a trajectory list")
        steps = []
        for i, item in enumerate(steps_raw):
            if not isinstance(item, dict):
                raise BackendSchemaError(f"trajectory[{i}] is not an object")
            claim = item.get("claim")
            chunk_id = item.get("chunk_id")
            if not isinstance(claim, str) or not isinstance(chunk_id, str):
                raise BackendSchemaError(f"trajectory[{i}] missing claim/chunk_id")
            time_raw = item.get("time")
            time_point = None
            if time_raw is not None:
                if not isinstance(time_raw, str):
                    raise BackendSchemaError(f"trajectory[{i}].time must be a string")
                try:
                    time_point = TimePoint.parse_canonical(time_raw)
                except ValueError as exc:
                    raise BackendSchemaError(
                        f"trajectory[{i}].time: {exc}"
                    ) from exc
            steps.append(ReasoningStep(
                claim=claim,
                chunk_id=chunk_id,
                time=time_point,
                asserts_expiry=time_point is not None,
            ))
        conclusion_raw = doc.get("conclusion")
        if not isinstance(conclusion_raw, str):
            raise BackendSchemaError("response lacks a conclusion string")
        if conclusion_raw == "indeterminate":
            conclusion = None
        else:
            try:
                conclusion = TimePoint.parse_canonical(conclusion_raw)
            except ValueError as exc:
                raise BackendSchemaError(f"bad conclusion: {exc}") from exc
        score_raw = doc.get("self_score")
        if score_raw is not None and not isinstance(score_raw, (int, float)):
            raise BackendSchemaError("self_score must be a number or null")
        score = None if score_raw is None else float(score_raw)
        return BackendResponse(
            trajectory=ReasoningTrajectory(tuple(steps), conclusion),
            self_score=score,
        )


def _validate_citations(traj: ReasoningTrajectory, prompt: PromptBundle) -> None:
    known = {c.chunk_id for c in prompt.chunks}
    for step in traj.steps:
        if step.chunk_id not in known:
            raise BackendSchemaError(
                f"trajectory cites unknown chunk {step.chunk_id!r}"
            )


def infer_forward(backend: ReasoningBackend, prompt: PromptBundle) -> InferenceOutcome:
    """Run the forward pass and collect the candidate horizon set.

    Candidates are the conclusion plus every horizon the trajectory
    asserts, deduplicated in assertion order.
    """
    if prompt.mode != "forward":
        raise ValueError("infer_forward requires a forward-mode prompt")
    response = backend.complete(prompt)
    traj = response.trajectory
    _validate_citations(traj, prompt)
    if traj.conclusion is None:
        raise NoVerdictError("no verdict: backend concluded indeterminate")
    candidates: list[TimePoint] = [traj.conclusion]
    for step in traj.steps:
        if step.asserts_expiry and step.time is not None:
            if step.time not in candidates:
                candidates.append(step.time)
    return InferenceOutcome(
        t_init=traj.conclusion,
        candidates=tuple(candidates),
        forward=traj,
        anchor_event=traj.anchor_event,
    )


def verify_backward(
    backend: ReasoningBackend,
    prompt_bwd: PromptBundle,
    forward: ReasoningTrajectory,
) -> tuple[ReasoningTrajectory, float]:
    """Backward stress test of the forward conclusion.

    Returns the backward trajectory and s_self: the backend's own score
    when it reports one; otherwise 0.0 on contradiction (the backward
    conclusion abandons the candidate), else the fraction of forward
    steps whose cited times the backward pass reproduces.
    """
    if prompt_bwd.mode != "backward":
        raise ValueError("verify_backward requires a backward-mode prompt")
    response = backend.complete(prompt_bwd)
    traj = response.trajectory
    _validate_citations(traj, prompt_bwd)
    if traj.conclusion is None:
        raise NoVerdictError("no verdict: backward pass was indeterminate")
    if response.self_score is not None:
        return traj, min(1.0, max(0.0, response.self_score))
    candidate = prompt_bwd.candidate
    if not agrees_at_granularity(traj.conclusion, candidate):
        return traj, 0.0
    cited = [s for s in forward.steps if s.time is not None]
    if not cited:
        return traj, 1.0
    confirmed_pairs = {(s.chunk_id, s.time) for s in traj.steps if s.time is not None}
    confirmed = sum(1 for s in cited if (s.chunk_id, s.time) in confirmed_pairs)
    return traj, confirmed / len(cited)


def consistency_penalty(s_self: float) -> float:
    """Penalty complementing the self-consistency score: 1 - s_self."""
    if not 0.0 <= s_self <= 1.0:
        raise ValueError(f"s_self must be in [0, 1], got {s_self}")
    return 1.0 - s_self


def granularity_penalty(t_init: TimePoint, t_gt: TimePoint) -> int:
    """Absolute difference of granularity depths (year=1, month=2, day=3)."""
    return abs(granularity_depth(t_init) - granularity_depth(t_gt))


def time_distance(
    t_init: TimePoint, t_gt: TimePoint, horizon_days: float = DEFAULT_H_NORM
) -> float:
    """Normalized day distance, midpoint-resolved, saturating at 1."""
    if horizon_days <= 0:
        raise ValueError("horizon_days must be positive")
    gap = abs(t_init.resolve_ordinal() - t_gt.resolve_ordinal())
    return min(gap / horizon_days, 1.0)


def temporal_objective(
    d_time: float,
    l_gran: float,
    l_cons: float,
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
) -> float:
    """Combined score for a candidate verdict; lower is better.

    Used to rank verdicts against ground truth in evaluation and to
    pick among backend samples; nothing in this package trains on it.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalty weights must be non-negative")
    return d_time + lambda1 * l_gran + lambda2 * l_cons
