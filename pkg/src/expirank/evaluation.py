"""Offline evaluation: synthetic corpora, desk-scale reranking, metrics.

The corpus generator plants an event date and validity class per query
so the true horizon is known by construction. Three rankings are
compared on identical inputs: a no-feature ordering, a 30-day recency
window, and the expiry-aware pipeline. Reported metrics are the age of
top results (day_away@k) and a concordant/discordant pairwise ordering
ratio against freshness-satisfaction labels, per freshness tier.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import random
import statistics
from dataclasses import dataclass, replace
from typing import Sequence

from .corpus import CandidateJudgment, Document, EvalQuery
from .errors import CorpusFormatError
from .extraction import (
    DEFAULT_ALPHA,
    DEFAULT_TAU,
    DEFAULT_WINDOW,
    build_focus,
    extract_query_anchor,
)
from .inference import OracleBackend
from .pipeline import compute_verdict
from .rules import RuleTable
from .signal import (
    CircuitBreaker,
    FeatureVector,
    ThresholdCache,
    expiry_flag,
    get_threshold,
)
from .temporal_parser import TemporalParser
from .timepoint import TimePoint, elapsed_days

__all__ = [
    "RerankWeights",
    "RankedDoc",
    "EvalReport",
    "generate_corpus",
    "rerank",
    "day_away_at_k",
    "pairwise_ordering_ratio",
    "run_offline_eval",
    "WINDOW_BASELINE_DAYS",
    "PIPELINES",
]

# The traditional recency rule the expiry-aware ranking is compared to.
WINDOW_BASELINE_DAYS = 30.0

PIPELINES = ("plain", "window", "expiry")

DAY_AWAY_KS = (4, 10)


@dataclass(frozen=True)
class RerankWeights:
    """Documented linear reranker weights; relevance grade dominates.

    The feature block contributes at most flag + cross_rel + cross_auth
    = 2.0, below one grade step (10.0), so the fresh flag reorders only
    within a grade band. Age carries weight 0 by design: freshness
    enters through the flag, not as a direct penalty.
    """

    grade: float = 10.0
    flag: float = 1.0
    cross_rel: float = 0.5
    cross_auth: float = 0.5
    age: float = 0.0


@dataclass(frozen=True)
class RankedDoc:
    """One candidate with its judgments, features, and reranker score."""

    docid: str
    grade: int
    label: int
    time_factor: TimePoint
    age_days: float
    features: FeatureVector
    score: float = 0.0


def rerank(
    candidates: Sequence[RankedDoc], weights: RerankWeights = RerankWeights()
) -> list[RankedDoc]:
    """Score and stable-sort candidates, best first."""
    scored = [
        replace(c, score=(
            weights.grade * c.grade
            + weights.flag * c.features.f_exp
            + weights.cross_rel * c.features.cross_rel
            + weights.cross_auth * c.features.cross_auth
            + weights.age * c.features.age_days
        ))
        for c in candidates
    ]
    scored.sort(key=lambda c: -c.score)
    return scored


def day_away_at_k(
    ranking: Sequence[RankedDoc], k: int, search_time: TimePoint
) -> tuple[float, float] | None:
    """(median, mean) age in days of the top min(k, n) results.

    Ages clamp at zero; an empty ranking has no defined value and is
    excluded from aggregates by returning None.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not ranking:
        return None
    ages = [elapsed_days(c.time_factor, search_time) for c in ranking[:k]]
    return statistics.median(ages), statistics.fmean(ages)


def pairwise_ordering_ratio(
    tiered_rankings: Sequence[tuple[str, Sequence[RankedDoc]]],
    tier: str,
) -> float | None:
    """Concordant/discordant pair ratio for queries of the given tier.

    A pair is concordant when the higher-labeled document ranks above
    the lower-labeled one; equal labels are skipped. Counts pool across
    queries. All-concordant yields +inf; no unequal pairs yields None.
    """
    concordant = 0
    discordant = 0
    for query_tier, ranking in tiered_rankings:
        if query_tier != tier:
            continue
        for i in range(len(ranking)):
            for j in range(i + 1, len(ranking)):
                upper, lower = ranking[i].label, ranking[j].label
                if upper == lower:
                    continue
                if upper > lower:
                    concordant += 1
                else:
                    discordant += 1
    if concordant == 0 and discordant == 0:
        return None
    if discordant == 0:
        return math.inf
    return concordant / discordant


# ---------------------------------------------------------------------------
# Synthetic corpus generation.
# ---------------------------------------------------------------------------

_PLACES = (
    "arlova", "bexley", "corvel", "drayton", "elmsworth", "farrow",
    "gilmore", "halvern", "ivoryn", "jasper", "kelwick", "lorring",
)

_FILLERS = ("update", "report", "notice", "bulletin", "summary", "briefing")

_BASE_SEARCH_DATE = _dt.date(2026, 6, 15)

# Per-query document layout: two top-grade docs, two six-doc grade bands
# each split into three pre-horizon and three post-horizon docs, and two
# stale tail docs. The bands straddle the k=4 and k=10 cutoffs so the
# window baseline and the expiry-aware ranking pick different documents.
_HEAD_COUNT = 2
_BAND_SPLIT = 3
_TAIL_COUNT = 2


@dataclass(frozen=True)
class _QueryPlan:
    kind: str           # breaking | superseded | scheduled | periodic | policy | default
    tier: str
    query_text: str
    topic: str          # unique place token
    noun: str           # class keyword used in text
    validity_days: int
    gap_days: int       # search_time - horizon
    superseded: bool = False


def _plan_query(rng: random.Random, index: int) -> _QueryPlan:
    place = f"{rng.choice(_PLACES)}{index}"
    bucket = index % 10
    if bucket < 4:
        # Week tier: hard news with a 3-day validity; every fourth one
        # carries an earlier superseded event.
        noun = rng.choice(("fire", "flood", "storm"))
        return _QueryPlan(
            kind="breaking",
            tier="week",
            query_text=f"{place} {noun}",
            topic=place,
            noun=noun,
            validity_days=3,
            gap_days=rng.randint(3, 6),
            superseded=(bucket == 3),
        )
    if bucket < 6:
        noun = rng.choice(("festival", "election", "exhibition"))
        return _QueryPlan(
            kind="scheduled",
            tier="month",
            query_text=f"{place} {noun}",
            topic=place,
            noun=noun,
            validity_days=0,
            gap_days=rng.randint(10, 25),
        )
    if bucket < 7:
        return _QueryPlan(
            kind="periodic",
            tier="month",
            query_text=f"{place} weekly market",
            topic=place,
            noun="market",
            validity_days=7,
            gap_days=rng.randint(10, 25),
        )
    if bucket < 9:
        return _QueryPlan(
            kind="policy",
            tier="none",
            query_text=f"{place} parking regulations",
            topic=place,
            noun="regulations",
            validity_days=3650,
            gap_days=rng.randint(40, 50),
        )
    return _QueryPlan(
        kind="default",
        tier="none",
        query_text=f"{place} garden guide",
        topic=place,
        noun="guide",
        validity_days=30,
        gap_days=rng.randint(40, 50),
    )


def _doc_sentences(plan: _QueryPlan, event: TimePoint, filler: str) -> list[str]:
    topic, noun = plan.topic, plan.noun
    if plan.kind in ("breaking", "superseded"):
        middle = f"The {topic} {noun} was declared contained on {event.render()}."
    elif plan.kind == "scheduled":
        middle = f"The {topic} {noun} took place on {event.render()}."
    elif plan.kind == "periodic":
        middle = f"The weekly {topic} {noun} session ran on {event.render()}."
    elif plan.kind == "policy":
        middle = f"The {topic} parking {noun} took effect on {event.render()}."
    else:
        middle = f"The {topic} garden {noun} was revised on {event.render()}."
    return [
        f"{topic} {noun} {filler}.",
        middle,
        f"Crews across {topic} handled the {noun} follow-up.",
        f"The {topic} {noun} desk posted further details.",
        f"Contact the {topic} {noun} office for records.",
    ]


def _make_doc(
    plan: _QueryPlan,
    qid: str,
    index: int,
    pub: _dt.date,
    event: TimePoint,
    authority: float,
    rng: random.Random,
) -> Document:
    return Document(
        docid=f"{qid}-d{index:02d}",
        title=f"{plan.topic} {plan.noun} {rng.choice(_FILLERS)}",
        sentences=tuple(_doc_sentences(plan, event, rng.choice(_FILLERS))),
        pub_time=TimePoint.from_date(pub),
        authority=authority,
        source=f"src-{index % 5}",
    )


def _sample_ages(rng: random.Random, low: int, high: int, count: int) -> list[int]:
    # Ages may repeat; the range can be narrower than the count.
    high = max(low, high)
    return [rng.randint(low, high) for _ in range(count)]


def generate_corpus(
    seed: int,
    n_queries: int = 60,
    rule_table: RuleTable | None = None,
) -> tuple[list[EvalQuery], list[Document]]:
    """Deterministic synthetic corpus with planted ground-truth horizons.

    Every document of a query mentions the planted event date, so the
    rule table derives the same horizon the generator recorded as
    gt_expiry. Post-horizon documents are always strictly younger than
    pre-horizon ones within a band, which is what lets an expiry-aware
    ranking surface fresher results than a recency window.
    """
    del rule_table  # validity constants below mirror the default table
    rng = random.Random(seed)
    queries: list[EvalQuery] = []
    documents: list[Document] = []

    for qi in range(n_queries):
        plan = _plan_query(rng, qi)
        qid = f"q{qi:04d}"
        search_date = _BASE_SEARCH_DATE + _dt.timedelta(days=rng.randint(0, 45))
        search_time = TimePoint.from_date(search_date)
        horizon_date = search_date - _dt.timedelta(days=plan.gap_days)
        event_date = horizon_date - _dt.timedelta(days=plan.validity_days)
        event = TimePoint.from_date(event_date)
        gt_expiry = TimePoint.from_date(horizon_date)
        gap = plan.gap_days

        # Pre-horizon ("stale") publication ages per kind. In the week
        # and month tiers they sit inside the 30-day window the baseline
        # trusts; pub dates always postdate the mentioned event.
        if plan.kind == "policy":
            stale_low, stale_high = gap + 1, gap + 200
        elif plan.kind == "default":
            stale_low, stale_high = gap + 1, gap + 25
        elif plan.kind == "periodic":
            stale_low, stale_high = gap + 1, min(29, gap + 6)
        else:
            stale_low, stale_high = gap + 1, min(29, gap + 2)
        if plan.tier == "none":
            # Post-horizon docs older than the window, so the window
            # baseline flags nothing on evergreen queries.
            fresh_low, fresh_high = max(31, gap - 9), gap - 1
        else:
            fresh_low, fresh_high = 0, gap - 1

        def draw_doc(index: int, age: int, authority: float) -> Document:
            pub = search_date - _dt.timedelta(days=age)
            return _make_doc(plan, qid, index, pub, event, authority, rng)

        judgments: list[CandidateJudgment] = []
        doc_index = 0

        def add(doc: Document, grade: int, label: int) -> None:
            documents.append(doc)
            judgments.append(CandidateJudgment(doc.docid, grade, label))

        # Head: two top-grade post-horizon docs.
        for age in _sample_ages(rng, fresh_low, fresh_high, _HEAD_COUNT):
            add(draw_doc(doc_index, age, 0.8), 4, 2)
            doc_index += 1

        superseded_doc: Document | None = None
        if plan.superseded:
            # An older event whose horizon the newer event invalidates.
            old_event = TimePoint.from_date(event_date - _dt.timedelta(days=5))
            old_age = gap + 2
            pub = search_date - _dt.timedelta(days=old_age)
            superseded_doc = Document(
                docid=f"{qid}-old",
                title=f"{plan.topic} {plan.noun} {plan.noun} early {plan.noun} report",
                sentences=(
                    f"{plan.topic} {plan.noun} {plan.noun} alert.",
                    f"The {plan.topic} {plan.noun} was declared contained on "
                    f"{old_event.render()}.",
                    f"{plan.topic} {plan.noun} crews stood down.",
                ),
                pub_time=TimePoint.from_date(pub),
                authority=0.3,
                source="src-old",
            )

        # Two grade bands straddling the k=4 and k=10 cutoffs.
        for band_grade in (3, 2):
            stale_ages = sorted(
                _sample_ages(rng, stale_low, stale_high, _BAND_SPLIT), reverse=True
            )
            for age in stale_ages:
                add(draw_doc(doc_index, age, 0.9), band_grade, 1)
                doc_index += 1
            if superseded_doc is not None and band_grade == 3:
                add(superseded_doc, band_grade, 1)
                superseded_doc = None
            fresh_ages = sorted(
                _sample_ages(rng, fresh_low, fresh_high, _BAND_SPLIT), reverse=True
            )
            for age in fresh_ages:
                add(draw_doc(doc_index, age, 0.55), band_grade, 2)
                doc_index += 1

        # Tail: clearly stale low-grade docs.
        for age in _sample_ages(rng, gap + 250, gap + 400, _TAIL_COUNT):
            add(draw_doc(doc_index, age, 0.3), 1, 0)
            doc_index += 1

        queries.append(EvalQuery(
            qid=qid,
            text=plan.query_text,
            search_time=search_time,
            tier=plan.tier,
            gt_expiry=gt_expiry,
            candidates=tuple(judgments),
        ))

    return queries, documents


# ---------------------------------------------------------------------------
# Offline evaluation run.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics plus per-query diagnostics."""

    query_count: int
    document_count: int
    day_away: dict
    pairwise: dict
    deltas: dict
    provenance_counts: dict
    diagnostics: list

    def to_json_bytes(self) -> bytes:
        def encode(value):
            if isinstance(value, float) and math.isinf(value):
                return "inf"
            if isinstance(value, dict):
                return {k: encode(v) for k, v in value.items()}
            if isinstance(value, list):
                return [encode(v) for v in value]
            return value

        payload = {
            "query_count": self.query_count,
            "document_count": self.document_count,
            "day_away": encode(self.day_away),
            "pairwise": encode(self.pairwise),
            "deltas": encode(self.deltas),
            "provenance_counts": encode(self.provenance_counts),
            "diagnostics": encode(self.diagnostics),
        }
        return json.dumps(payload, sort_keys=True, indent=2).encode("utf-8") + b"\n"

    def render_text(self) -> str:
        def fmt(value) -> str:
            if value is None:
                return "   --  "
            if isinstance(value, float) and math.isinf(value):
                return "   inf "
            return f"{value:7.2f}"

        lines = [
            f"queries: {self.query_count}   documents: {self.document_count}",
            "",
            "day_away (mean over queries; lower is fresher)",
            "  k   stat    plain   window   expiry",
        ]
        for k in DAY_AWAY_KS:
            for stat in ("median", "mean"):
                row = [fmt(self.day_away[str(k)][p][stat]) for p in PIPELINES]
                lines.append(f"  {k:<3} {stat:<7}{row[0]} {row[1]} {row[2]}")
        lines.append("")
        lines.append("pairwise ordering ratio (higher is better)")
        lines.append("  tier    plain   window   expiry")
        for tier in ("none", "month", "week"):
            row = [fmt(self.pairwise[tier][p]) for p in PIPELINES]
            lines.append(f"  {tier:<7}{row[0]} {row[1]} {row[2]}")
        lines.append("")
        lines.append("expiry vs window deltas (day_away negative = fresher)")
        for k in DAY_AWAY_KS:
            med = self.deltas["day_away"][str(k)]["median"]
            mean = self.deltas["day_away"][str(k)]["mean"]
            lines.append(f"  k={k}: median {fmt(med).strip()}, mean {fmt(mean).strip()}")
        return "\n".join(lines) + "\n"


def _aggregate(values: list[float]) -> float | None:
    return statistics.fmean(values) if values else None


def run_offline_eval(
    queries: Sequence[EvalQuery],
    documents: Sequence[Document],
    rule_table: RuleTable | None = None,
    parser: TemporalParser | None = None,
    backend=None,
    cache: ThresholdCache | None = None,
    breaker: CircuitBreaker | None = None,
    weights: RerankWeights = RerankWeights(),
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    window: int = DEFAULT_WINDOW,
    decay_per_day: float | None = None,
    force_breaker_open: bool = False,
    keep_rankings: bool = False,
) -> EvalReport:
    """Run the three pipelines over identical inputs and aggregate.

    The expiry-aware pipeline acquires horizons through the same
    cache/breaker path production uses, so forcing the breaker open
    exercises the degradation contract: every flag drops to 0 and the
    expiry ranking collapses onto the no-feature ordering.
    """
    rule_table = rule_table or RuleTable.default()
    parser = parser or TemporalParser()
    backend = backend or OracleBackend(rule_table, parser)
    cache = cache or ThresholdCache(path=None)
    breaker = breaker or CircuitBreaker()

    docs_by_id = {d.docid: d for d in documents}
    missing = [
        f"query {q.qid}: unknown docid {j.docid}"
        for q in queries for j in q.candidates if j.docid not in docs_by_id
    ]
    if missing:
        raise CorpusFormatError(missing)

    day_away_values: dict[int, dict[str, dict[str, list[float]]]] = {
        k: {p: {"median": [], "mean": []} for p in PIPELINES} for k in DAY_AWAY_KS
    }
    tiered: dict[str, list[tuple[str, list[RankedDoc]]]] = {p: [] for p in PIPELINES}
    provenance_counts: dict[str, int] = {}
    diagnostics: list[dict] = []
    rankings_out: list[dict] = []

    for query in queries:
        if force_breaker_open:
            # Re-force every query so a long run cannot drift into
            # half-open and let a probe close the breaker mid-eval.
            breaker.force_open()
        cand_docs = [docs_by_id[j.docid] for j in query.candidates]
        holder: dict = {}

        def pipeline_fn(q: str, st: TimePoint, _docs=cand_docs, _h=holder):
            result = compute_verdict(
                q, _docs, st, backend=backend, rule_table=rule_table,
                parser=parser, window=window, alpha=alpha, tau=tau,
                decay_per_day=decay_per_day,
                max_candidate_docs=max(len(_docs), 1),
            )
            _h["result"] = result
            return result.verdict.t_exp, result.verdict.s_self

        t_exp, provenance, s_self = get_threshold(
            query.text, query.search_time, cache, pipeline_fn, breaker
        )
        provenance_counts[provenance] = provenance_counts.get(provenance, 0) + 1

        if "result" in holder:
            focus = holder["result"].focus
        else:
            anchor = extract_query_anchor(query.text, query.search_time, parser)
            focus = build_focus(
                anchor, cand_docs, query.search_time, parser=parser,
                window=window, alpha=alpha, tau=tau, decay_per_day=decay_per_day,
            )
        s_rel_by_doc: dict[str, float] = {}
        for chunk in focus.chunks:
            key = chunk.source_id
            if chunk.s_rel > s_rel_by_doc.get(key, 0.0):
                s_rel_by_doc[key] = chunk.s_rel

        per_pipeline: dict[str, list[RankedDoc]] = {}
        for pipeline_name in PIPELINES:
            entries = []
            for judgment in query.candidates:
                doc = docs_by_id[judgment.docid]
                age = elapsed_days(doc.pub_time, query.search_time)
                if pipeline_name == "plain":
                    flag = 0
                elif pipeline_name == "window":
                    flag = 1 if age <= WINDOW_BASELINE_DAYS else 0
                else:
                    flag = expiry_flag(doc.pub_time, t_exp) if t_exp is not None else 0
                s_rel_doc = s_rel_by_doc.get(doc.docid, 0.0)
                features = FeatureVector(
                    f_exp=flag,
                    s_rel_doc=s_rel_doc,
                    authority=doc.authority,
                    cross_rel=flag * s_rel_doc,
                    cross_auth=flag * doc.authority,
                    age_days=age,
                )
                entries.append(RankedDoc(
                    docid=doc.docid,
                    grade=judgment.grade,
                    label=judgment.label,
                    time_factor=doc.pub_time,
                    age_days=age,
                    features=features,
                ))
            ranking = rerank(entries, weights)
            per_pipeline[pipeline_name] = ranking
            tiered[pipeline_name].append((query.tier, ranking))
            for k in DAY_AWAY_KS:
                stats = day_away_at_k(ranking, k, query.search_time)
                if stats is not None:
                    day_away_values[k][pipeline_name]["median"].append(stats[0])
                    day_away_values[k][pipeline_name]["mean"].append(stats[1])

        diag = {
            "qid": query.qid,
            "tier": query.tier,
            "provenance": provenance,
            "t_exp": t_exp.render() if t_exp is not None else None,
            "gt_expiry": query.gt_expiry.render() if query.gt_expiry else None,
            "s_self": s_self,
        }
        diagnostics.append(diag)
        if keep_rankings:
            rankings_out.append({
                "qid": query.qid,
                "rankings": {
                    p: [c.docid for c in per_pipeline[p]] for p in PIPELINES
                },
            })

    day_away_report = {
        str(k): {
            p: {
                "median": _aggregate(day_away_values[k][p]["median"]),
                "mean": _aggregate(day_away_values[k][p]["mean"]),
            }
            for p in PIPELINES
        }
        for k in DAY_AWAY_KS
    }
    pairwise_report = {
        tier: {p: pairwise_ordering_ratio(tiered[p], tier) for p in PIPELINES}
        for tier in ("none", "month", "week")
    }

    def delta(a: float | None, b: float | None) -> float | None:
        if a is None or b is None:
            return None
        if math.isinf(a) and math.isinf(b):
            return 0.0
        return a - b

    deltas = {
        "day_away": {
            str(k): {
                stat: delta(
                    day_away_report[str(k)]["expiry"][stat],
                    day_away_report[str(k)]["window"][stat],
                )
                for stat in ("median", "mean")
            }
            for k in DAY_AWAY_KS
        },
        "pairwise": {
            tier: delta(pairwise_report[tier]["expiry"],
                        pairwise_report[tier]["window"])
            for tier in ("none", "month", "week")
        },
    }

    if keep_rankings:
        diagnostics = [
            {**diag, **rank} for diag, rank in zip(diagnostics, rankings_out)
        ]

    return EvalReport(
        query_count=len(queries),
        document_count=len(documents),
        day_away=day_away_report,
        pairwise=pairwise_report,
        deltas=deltas,
        provenance_counts=provenance_counts,
        diagnostics=diagnostics,
    )
