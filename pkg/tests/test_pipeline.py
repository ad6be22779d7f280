"""End-to-end verdict computation."""

import pytest

from conftest import make_doc
from expirank.errors import NoEvidenceError
from expirank.extraction import QueryAnchor
from expirank.inference import (
    BackendResponse,
    OracleBackend,
    ReasoningStep,
    ReasoningTrajectory,
)
from expirank.pipeline import (
    DEFAULT_MAX_CANDIDATE_DOCS,
    compute_verdict,
    select_candidates,
)
from expirank.timepoint import TimePoint


def fire_doc(docid="d1", authority=0.9):
    return make_doc(docid, [
        "city fire crews fought the blaze on 2025-05-30.",
        "city fire damage is being assessed.",
        "city fire units remain on scene.",
    ], "2025-05-31", authority=authority)


def newer_fire_doc(docid="d2", authority=0.5):
    # deliberately keyword-sparse so the older document stays the
    # highest-relevance chunk and anchors the reasoning
    return make_doc(docid, [
        "another city fire broke out on 2025-06-05.",
        "crews returned downtown.",
        "alerts remain active.",
    ], "2025-06-06", authority=authority)


class CountingBackend:
    """Delegates to the oracle while counting completions."""

    deterministic = True

    def __init__(self):
        self.inner = OracleBackend()
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.inner.complete(prompt)


class FixedBackend:
    """Nondeterministic-flagged backend returning one canned response."""

    deterministic = False

    def __init__(self, response):
        self.response = response
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.response


class QueueBackend:
    deterministic = False

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.responses.pop(0)


def _response(day, chunk_id="c1"):
    t = TimePoint(2025, 6, day) if day < 32 else TimePoint(2026, 1, 1)
    return BackendResponse(ReasoningTrajectory(
        steps=(ReasoningStep("concluded", chunk_id, t, True),),
        conclusion=t,
    ))


class TestSelectCandidates:
    def test_overlap_ordering_and_exclusion(self):
        anchor = QueryAnchor("fire rescue", ("fire", "rescue"), ())
        d_both = make_doc("db", ["fire rescue drill."], "2025-01-01")
        d_one = make_doc("da", ["fire safety notes."], "2025-01-01")
        d_none = make_doc("dz", ["gardening tips."], "2025-01-01")
        got = select_candidates(anchor, [d_none, d_one, d_both])
        assert [d.docid for d in got] == ["db", "da"]

    def test_repetition_does_not_beat_coverage(self):
        anchor = QueryAnchor("fire rescue", ("fire", "rescue"), ())
        repeats = make_doc("dr", ["fire fire fire fire."], "2025-01-01")
        covers = make_doc("dc", ["fire rescue."], "2025-01-01")
        got = select_candidates(anchor, [repeats, covers])
        assert [d.docid for d in got] == ["dc", "dr"]

    def test_equal_overlap_ties_break_by_docid(self):
        anchor = QueryAnchor("fire", ("fire",), ())
        docs = [
            make_doc("nb", ["fire two."], "2025-01-01"),
            make_doc("na", ["fire one."], "2025-01-01"),
        ]
        got = select_candidates(anchor, docs)
        assert [d.docid for d in got] == ["na", "nb"]

    def test_title_counts_toward_overlap(self):
        anchor = QueryAnchor("fire", ("fire",), ())
        doc = make_doc("dt", ["nothing relevant."], "2025-01-01",
                       title="fire season outlook")
        assert select_candidates(anchor, [doc]) == [doc]

    def test_limit_caps_selection(self):
        anchor = QueryAnchor("fire", ("fire",), ())
        docs = [make_doc(f"d{i}", ["fire notes."], "2025-01-01")
                for i in range(6)]
        got = select_candidates(anchor, docs, limit=3)
        assert [d.docid for d in got] == ["d0", "d1", "d2"]
        assert DEFAULT_MAX_CANDIDATE_DOCS == 20


class TestComputeVerdict:
    def test_single_event_end_to_end(self):
        result = compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1)
        )
        assert result.verdict.t_exp == TimePoint(2025, 6, 2)
        assert result.outcome.t_init == TimePoint(2025, 6, 2)
        assert result.outcome.s_self == 1.0
        assert result.verdict.s_self == 1.0
        assert result.outcome.backward is not None
        assert len(result.focus) >= 1
        assert result.anchor.keywords == ("city", "fire")

    def test_deterministic_across_calls(self):
        docs = [fire_doc(), newer_fire_doc()]
        a = compute_verdict("city fire", docs, TimePoint(2025, 6, 7))
        b = compute_verdict("city fire", docs, TimePoint(2025, 6, 7))
        assert a == b

    def test_no_keyword_overlap_raises(self):
        with pytest.raises(NoEvidenceError):
            compute_verdict(
                "quantum physics", [fire_doc()], TimePoint(2025, 6, 1)
            )

    def test_weak_evidence_raises(self):
        # gated chunk exists but scores under tau and nothing falls back
        doc = make_doc("d1", [
            "the fire hydrant inventory was updated on 2025-05-30.",
        ], "2025-05-30")
        with pytest.raises(NoEvidenceError):
            compute_verdict("fire", [doc], TimePoint(2025, 12, 1))

    def test_contradiction_grows_candidates(self):
        docs = [fire_doc("d1", 0.9), newer_fire_doc("d2", 0.5)]
        result = compute_verdict("city fire", docs, TimePoint(2025, 6, 7))
        assert result.outcome.s_self == 0.0
        assert result.outcome.backward.conclusion == TimePoint(2025, 6, 8)
        assert TimePoint(2025, 6, 8) in result.outcome.candidates
        assert TimePoint(2025, 6, 8) in result.verdict.support
        # the older, higher-authority evidence still outweighs it here
        assert result.verdict.t_exp == TimePoint(2025, 6, 2)
        assert result.verdict.s_self == 0.0

    def test_superseding_event_wins_with_authority(self):
        docs = [fire_doc("d1", 0.3), newer_fire_doc("d2", 0.95)]
        result = compute_verdict("city fire", docs, TimePoint(2025, 6, 7))
        assert result.verdict.t_exp == TimePoint(2025, 6, 8)

    def test_deterministic_backend_runs_once(self):
        backend = CountingBackend()
        compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1),
            backend=backend, samples=5,
        )
        assert backend.calls == 2  # one forward, one backward

    def test_sampled_backend_runs_samples_times(self):
        backend = FixedBackend(_response(2))
        compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1),
            backend=backend, samples=3,
        )
        assert backend.calls == 6

    def test_zero_samples_clamped_to_one_run(self):
        backend = FixedBackend(_response(2))
        compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1),
            backend=backend, samples=0,
        )
        assert backend.calls == 2

    def test_sample_closest_to_consensus_selected(self):
        far = _response(99)  # 2026-01-01
        near = _response(2)  # 2025-06-02, the rule-backed horizon
        backend = QueueBackend([far, far, near, near])
        result = compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1),
            backend=backend, samples=2,
        )
        assert backend.calls == 4
        assert result.verdict.t_exp == TimePoint(2025, 6, 2)
        assert result.outcome.t_init == TimePoint(2025, 6, 2)

    def test_knob_plumbing(self):
        result = compute_verdict(
            "city fire", [fire_doc()], TimePoint(2025, 6, 1),
            window=3, alpha=0.5, tau=0.2, samples=1, max_candidate_docs=5,
        )
        assert result.verdict.t_exp == TimePoint(2025, 6, 2)
