"""Offline evaluation: reranking, metrics, synthetic corpus, report."""

import datetime as dt
import re
import statistics

import pytest

from expirank.corpus import (
    EvalQuery,
    dump_documents,
    dump_queries,
    load_documents,
    load_queries,
)
from expirank.errors import CorpusFormatError
from expirank.evaluation import (
    DAY_AWAY_KS,
    PIPELINES,
    WINDOW_BASELINE_DAYS,
    EvalReport,
    RankedDoc,
    RerankWeights,
    day_away_at_k,
    generate_corpus,
    pairwise_ordering_ratio,
    rerank,
    run_offline_eval,
)
from expirank.signal import CircuitBreaker, FeatureVector, ThresholdCache
from expirank.timepoint import TimePoint

SEARCH_DATE = dt.date(2026, 6, 15)
SEARCH = TimePoint.from_date(SEARCH_DATE)

ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")


def feature(flag=0, s_rel=0.0, authority=0.0, age=0.0):
    return FeatureVector(
        f_exp=flag, s_rel_doc=s_rel, authority=authority,
        cross_rel=flag * s_rel, cross_auth=flag * authority, age_days=age,
    )


def rdoc(docid, grade, label=1, age=0.0, flag=0, s_rel=0.0, authority=0.0,
         score=0.0):
    return RankedDoc(
        docid=docid,
        grade=grade,
        label=label,
        time_factor=TimePoint.from_date(SEARCH_DATE - dt.timedelta(days=age)),
        age_days=float(age),
        features=feature(flag, s_rel, authority, float(age)),
        score=score,
    )


class TestRerank:
    def test_grade_dominates_features(self):
        plain_top = rdoc("a", 4)
        boosted = rdoc("b", 3, flag=1, s_rel=1.0, authority=1.0)
        ranking = rerank([boosted, plain_top])
        assert [c.docid for c in ranking] == ["a", "b"]
        assert ranking[0].score == pytest.approx(40.0)
        assert ranking[1].score == pytest.approx(32.0)

    def test_flag_orders_within_grade(self):
        stale = rdoc("stale", 3)
        fresh = rdoc("fresh", 3, flag=1)
        ranking = rerank([stale, fresh])
        assert [c.docid for c in ranking] == ["fresh", "stale"]

    def test_equal_scores_keep_input_order(self):
        first = rdoc("first", 3)
        second = rdoc("second", 3)
        assert [c.docid for c in rerank([first, second])] == ["first", "second"]
        assert [c.docid for c in rerank([second, first])] == ["second", "first"]

    def test_zero_features_reduce_to_grade_sort(self):
        docs = [rdoc("a", 2), rdoc("b", 4), rdoc("c", 4), rdoc("d", 1)]
        assert [c.docid for c in rerank(docs)] == ["b", "c", "a", "d"]

    def test_score_is_replaced_not_accumulated(self):
        doc = rdoc("a", 4, score=999.0)
        assert rerank([doc])[0].score == pytest.approx(40.0)

    def test_age_weight_applies_when_configured(self):
        old = rdoc("old", 3, age=5.0)
        new = rdoc("new", 3, age=1.0)
        ranking = rerank([old, new], RerankWeights(age=-1.0))
        assert [c.docid for c in ranking] == ["new", "old"]

    def test_default_weights_frozen(self):
        weights = RerankWeights()
        assert (weights.grade, weights.flag) == (10.0, 1.0)
        assert (weights.cross_rel, weights.cross_auth) == (0.5, 0.5)
        assert weights.age == 0.0


class TestDayAway:
    def test_median_and_mean_of_top_k(self):
        ages = [1, 3, 5, 100]
        ranking = [rdoc(f"d{i}", 3, age=a) for i, a in enumerate(ages)]
        got = day_away_at_k(ranking, 4, SEARCH)
        assert got == (statistics.median(ages), statistics.fmean(ages))
        assert got == (4.0, 27.25)

    def test_k_truncates_without_sorting(self):
        ranking = [rdoc("a", 3, age=1), rdoc("b", 3, age=3), rdoc("c", 3, age=9)]
        assert day_away_at_k(ranking, 2, SEARCH) == (2.0, 2.0)

    def test_k_beyond_length_uses_all(self):
        ranking = [rdoc("a", 3, age=4)]
        assert day_away_at_k(ranking, 10, SEARCH) == (4.0, 4.0)

    def test_empty_ranking_is_none(self):
        assert day_away_at_k([], 4, SEARCH) is None

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            day_away_at_k([rdoc("a", 3)], 0, SEARCH)

    def test_age_comes_from_time_factor(self):
        # deliberately inconsistent age_days field: time_factor wins
        doc = RankedDoc(
            docid="a", grade=3, label=1,
            time_factor=TimePoint.from_date(SEARCH_DATE - dt.timedelta(days=8)),
            age_days=99.0, features=feature(), score=0.0,
        )
        assert day_away_at_k([doc], 1, SEARCH) == (8.0, 8.0)

    def test_future_time_factor_clamps_to_zero(self):
        doc = rdoc("a", 3, age=-5)
        assert day_away_at_k([doc], 1, SEARCH) == (0.0, 0.0)


class TestPairwiseRatio:
    def test_pools_counts_across_queries(self):
        r1 = [rdoc("a", 3, label=2), rdoc("b", 3, label=1), rdoc("c", 3, label=0)]
        r2 = [rdoc("d", 3, label=1), rdoc("e", 3, label=2)]
        tiered = [("week", r1), ("week", r2)]
        assert pairwise_ordering_ratio(tiered, "week") == pytest.approx(3.0)

    def test_all_concordant_is_inf(self):
        tiered = [("week", [rdoc("a", 3, label=2), rdoc("b", 3, label=0)])]
        assert pairwise_ordering_ratio(tiered, "week") == float("inf")

    def test_all_discordant_is_zero(self):
        tiered = [("week", [rdoc("a", 3, label=0), rdoc("b", 3, label=2)])]
        assert pairwise_ordering_ratio(tiered, "week") == 0.0

    def test_equal_labels_skipped(self):
        tiered = [("week", [rdoc("a", 3, label=1), rdoc("b", 3, label=1)])]
        assert pairwise_ordering_ratio(tiered, "week") is None

    def test_tier_filtering(self):
        week = [rdoc("a", 3, label=0), rdoc("b", 3, label=2)]
        month = [rdoc("c", 3, label=2), rdoc("d", 3, label=0)]
        tiered = [("week", week), ("month", month)]
        assert pairwise_ordering_ratio(tiered, "month") == float("inf")
        assert pairwise_ordering_ratio(tiered, "week") == 0.0
        assert pairwise_ordering_ratio(tiered, "none") is None


class TestGenerateCorpus:
    def test_deterministic_for_seed(self, tmp_path):
        q1, d1 = generate_corpus(seed=7, n_queries=10)
        q2, d2 = generate_corpus(seed=7, n_queries=10)
        assert q1 == q2 and d1 == d2
        a_docs, b_docs = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        dump_documents(d1, str(a_docs))
        dump_documents(d2, str(b_docs))
        assert a_docs.read_bytes() == b_docs.read_bytes()

    def test_seeds_differ(self):
        assert generate_corpus(seed=1, n_queries=5) != \
            generate_corpus(seed=2, n_queries=5)

    def test_layout_counts(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        assert len(queries) == 10
        assert len(documents) == 161  # 16 per query plus one superseded extra
        docids = [d.docid for d in documents]
        assert len(set(docids)) == len(docids)
        known = set(docids)
        for query in queries:
            assert {j.docid for j in query.candidates} <= known
            labels = [j.label for j in query.candidates]
            assert labels.count(2) == 8  # head pair plus two fresh triples
            assert labels.count(0) == 2
            grades = [j.grade for j in query.candidates]
            assert grades.count(4) == 2 and grades.count(1) == 2

    def test_superseded_query_carries_old_doc(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        superseded = [q for q in queries if len(q.candidates) == 17]
        assert [q.qid for q in superseded] == ["q0003"]
        old = [d for d in documents if d.docid.endswith("-old")]
        assert len(old) == 1 and old[0].authority == 0.3

    def test_every_doc_mentions_the_planted_event(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        by_id = {d.docid: d for d in documents}
        for query in queries:
            dates = set()
            for judgment in query.candidates:
                doc = by_id[judgment.docid]
                found = ISO_DATE.findall(doc.sentences[1])
                assert len(found) == 1
                if not doc.docid.endswith("-old"):
                    dates.add(found[0])
            assert len(dates) == 1  # one shared event per query

    def test_week_tier_straddles_horizon_inside_window(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        by_id = {d.docid: d for d in documents}
        week = [q for q in queries if q.tier == "week"]
        assert len(week) == 4
        for query in week:
            gap = (SEARCH_DATE and None) or None  # placeholder, see below
        for query in week:
            horizon = query.gt_expiry
            fresher = staler = 0
            for judgment in query.candidates:
                doc = by_id[judgment.docid]
                age = query.search_time.resolve_ordinal() - \
                    doc.pub_time.resolve_ordinal()
                if doc.pub_time.resolve_ordinal() > horizon.resolve_ordinal():
                    fresher += 1
                    assert judgment.label == 2
                elif judgment.label == 1:
                    staler += 1
                    assert age <= 29  # stale yet inside the 30-day window
            assert fresher >= 1 and staler >= 1

    def test_evergreen_fresh_docs_sit_outside_window(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        by_id = {d.docid: d for d in documents}
        for query in (q for q in queries if q.tier == "none"):
            for judgment in query.candidates:
                doc = by_id[judgment.docid]
                age = query.search_time.resolve_ordinal() - \
                    doc.pub_time.resolve_ordinal()
                assert age > WINDOW_BASELINE_DAYS

    def test_policy_event_sits_ten_years_before_horizon(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        by_id = {d.docid: d for d in documents}
        policy = [q for q in queries if "parking regulations" in q.text]
        assert len(policy) == 2
        for query in policy:
            doc = by_id[query.candidates[0].docid]
            event = ISO_DATE.findall(doc.sentences[1])[0]
            event_date = dt.date.fromisoformat(event)
            horizon_date = dt.date.fromisoformat(query.gt_expiry.render())
            assert (horizon_date - event_date).days == 3650

    def test_jsonl_roundtrip(self, tmp_path):
        queries, documents = generate_corpus(seed=7, n_queries=4)
        qpath, dpath = str(tmp_path / "q.jsonl"), str(tmp_path / "d.jsonl")
        dump_queries(queries, qpath)
        dump_documents(documents, dpath)
        assert load_queries(qpath) == queries
        assert load_documents(dpath) == documents


class TestRunOfflineEval:
    def _small(self, **kwargs):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        return run_offline_eval(queries, documents, **kwargs)

    def test_small_run_structure(self):
        report = self._small()
        assert report.query_count == 10
        assert report.document_count == 161
        assert report.provenance_counts == {"backend": 10}
        for k in DAY_AWAY_KS:
            for pipeline in PIPELINES:
                cell = report.day_away[str(k)][pipeline]
                assert cell["median"] is not None
                assert cell["mean"] is not None
        assert len(report.diagnostics) == 10

    def test_verdicts_match_planted_ground_truth(self):
        report = self._small()
        for diag in report.diagnostics:
            assert diag["t_exp"] == diag["gt_expiry"], diag["qid"]

    def test_expiry_beats_window_on_freshness(self):
        report = self._small()
        for k in DAY_AWAY_KS:
            expiry = report.day_away[str(k)]["expiry"]["mean"]
            window = report.day_away[str(k)]["window"]["mean"]
            assert expiry < window
        week = report.pairwise["week"]
        assert week["expiry"] > week["window"]

    def test_report_bytes_deterministic(self):
        a = self._small().to_json_bytes()
        b = self._small().to_json_bytes()
        assert a == b

    def test_warm_cache_skips_backend(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        cache = ThresholdCache(path=None)
        first = run_offline_eval(queries, documents, cache=cache)
        second = run_offline_eval(queries, documents, cache=cache)
        assert first.provenance_counts == {"backend": 10}
        assert second.provenance_counts == {"cache": 10}
        assert first.day_away == second.day_away
        assert first.pairwise == second.pairwise

    def test_forced_open_breaker_degrades_to_plain(self):
        queries, documents = generate_corpus(seed=7, n_queries=10)
        report = run_offline_eval(
            queries, documents,
            breaker=CircuitBreaker(),
            force_breaker_open=True,
            keep_rankings=True,
        )
        assert report.provenance_counts == {"fallback": 10}
        for diag in report.diagnostics:
            assert diag["rankings"]["expiry"] == diag["rankings"]["plain"]

    def test_missing_docid_is_itemized(self):
        queries, documents = generate_corpus(seed=7, n_queries=2)
        ghost = EvalQuery(
            qid="qghost", text="missing doc", search_time=SEARCH,
            tier="none", gt_expiry=None,
            candidates=(queries[0].candidates[0],),
        )
        trimmed = [d for d in documents
                   if d.docid != queries[0].candidates[0].docid]
        with pytest.raises(CorpusFormatError) as excinfo:
            run_offline_eval([ghost] + queries, trimmed)
        message = str(excinfo.value)
        assert "unknown docid" in message
        assert queries[0].candidates[0].docid in message

    def test_empty_inputs_yield_empty_report(self):
        report = run_offline_eval([], [])
        assert report.query_count == 0
        assert report.document_count == 0
        for k in DAY_AWAY_KS:
            for pipeline in PIPELINES:
                assert report.day_away[str(k)][pipeline]["median"] is None
        for tier in ("none", "month", "week"):
            for pipeline in PIPELINES:
                assert report.pairwise[tier][pipeline] is None
        assert report.render_text()  # none-safe formatting
        assert report.to_json_bytes().endswith(b"\n")


class TestEvalReport:
    def _report(self):
        day_away = {
            str(k): {p: {"median": 4.0, "mean": 5.5} for p in PIPELINES}
            for k in DAY_AWAY_KS
        }
        pairwise = {
            tier: {"plain": 1.5, "window": None, "expiry": float("inf")}
            for tier in ("none", "month", "week")
        }
        deltas = {
            "day_away": {
                str(k): {"median": -1.0, "mean": -2.0} for k in DAY_AWAY_KS
            },
            "pairwise": {tier: None for tier in ("none", "month", "week")},
        }
        return EvalReport(
            query_count=3, document_count=48,
            day_away=day_away, pairwise=pairwise, deltas=deltas,
            provenance_counts={"backend": 3}, diagnostics=[],
        )

    def test_json_encodes_inf_and_none(self):
        raw = self._report().to_json_bytes()
        assert b'"inf"' in raw
        assert b"null" in raw
        assert raw.endswith(b"\n")
        assert raw == self._report().to_json_bytes()

    def test_text_table_renders_placeholders(self):
        text = self._report().render_text()
        assert "queries: 3" in text
        assert "inf" in text
        assert "--" in text
        assert "pairwise ordering ratio" in text


def test_module_constants_frozen():
    assert WINDOW_BASELINE_DAYS == 30.0
    assert PIPELINES == ("plain", "window", "expiry")
    assert DAY_AWAY_KS == (4, 10)
