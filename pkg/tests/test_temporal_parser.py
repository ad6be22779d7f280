import datetime as dt

from hypothesis import given, strategies as st

from expirank.temporal_parser import (
    PatternConfig,
    TemporalParser,
    build_temporal_index,
    parse_temporal_expressions,
)
from expirank.timepoint import TimePoint

REF = TimePoint(2025, 6, 1)


def parse_one(text: str, parser: TemporalParser, ref=REF):
    return parser.parse_sentence(text, 0, ref)


class TestAbsoluteDates:
    def test_iso_date(self, parser):
        got = parse_one("The policy took effect on 2025-03-15.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 3, 15)]
        assert got[0].sentence_index == 0
        assert not got[0].is_relative

    def test_quarter_expression(self, parser):
        got = parse_one("Revenue grew in 2025 Q3.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, quarter=3)]
        assert got[0].normalized.depth == 2

    def test_textual_month_day_year(self, parser):
        got = parse_one("Announced on March 15, 2025 in a briefing.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 3, 15)]

    def test_day_month_year(self, parser):
        got = parse_one("Signed 15 March 2025.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 3, 15)]

    def test_month_year_only(self, parser):
        got = parse_one("Opened in March 2025 to the public.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 3)]

    def test_bare_year(self, parser):
        got = parse_one("The 2024 season set records.", parser)
        assert [m.normalized for m in got] == [TimePoint(2024)]

    def test_full_date_not_double_counted(self, parser):
        # The day-level match consumes its span: no year/month echoes.
        got = parse_one("Effective 2025-03-15, rates change.", parser)
        assert len(got) == 1
        assert got[0].normalized.depth == 3

    def test_ambiguous_numeric_defaults_month_first(self, parser):
        got = parse_one("Filed 3/15/2025 at the office.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 3, 15)]

    def test_ambiguous_numeric_dmy_config(self):
        p = TemporalParser(PatternConfig(
            date_patterns=PatternConfig.default().date_patterns,
            relative_rules=(),
            month_names=dict(PatternConfig.default().month_names),
            ambiguous_numeric_order="dmy",
        ))
        got = parse_one("Filed 3/12/2025 at the office.", p)
        assert [m.normalized for m in got] == [TimePoint(2025, 12, 3)]

    def test_two_digit_year_pivot(self, parser):
        got = parse_one("Archived copy from 5/1/99.", parser)
        assert [m.normalized for m in got] == [TimePoint(1999, 5, 1)]
        got = parse_one("Updated 5/1/24.", parser)
        assert [m.normalized for m in got] == [TimePoint(2024, 5, 1)]

    def test_calendar_invalid_skipped(self, parser):
        assert parse_one("Logged on 2025-02-30 by mistake.", parser) == []

    def test_unrecognized_skipped(self, parser):
        assert parse_one("See you next fortnight sometime.", parser) == []


class TestRelativeExpressions:
    def test_yesterday(self, parser):
        got = parse_one("The fire was extinguished yesterday.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 5, 31)]
        assert got[0].is_relative

    def test_n_days_ago(self, parser):
        got = parse_one("Reported 10 days ago by the desk.", parser)
        expected = dt.date(2025, 6, 1) - dt.timedelta(days=10)
        assert [m.normalized for m in got] == [TimePoint.from_date(expected)]

    def test_last_month_is_month_granular(self, parser):
        got = parse_one("Sales dipped last month.", parser)
        assert [m.normalized for m in got] == [TimePoint(2025, 5)]

    def test_last_year(self, parser):
        got = parse_one("The rule changed last year.", parser)
        assert [m.normalized for m in got] == [TimePoint(2024)]

    def test_month_rollover(self, parser):
        got = parse_one("Opened last month.", parser, ref=TimePoint(2025, 1, 15))
        assert [m.normalized for m in got] == [TimePoint(2024, 12)]

    def test_relative_skipped_for_coarse_reference(self, parser):
        got = parser.parse_sentence("It happened yesterday.", 0, TimePoint(2025, 6))
        assert got == []


class TestDeterminism:
    @given(st.text(max_size=120))
    def test_same_input_same_output(self, text):
        p = TemporalParser()
        first = p.parse_sentence(text, 0, REF)
        second = p.parse_sentence(text, 0, REF)
        assert first == second

    def test_mentions_ordered_by_position(self, parser):
        got = parse_one("Between 2025-03-15 and 2025-04-20 demand rose.", parser)
        assert [m.normalized for m in got] == [
            TimePoint(2025, 3, 15), TimePoint(2025, 4, 20),
        ]


class TestIndex:
    def test_empty_doc(self, parser):
        index = build_temporal_index([], REF, parser)
        assert index.is_empty()

    def test_grouping_across_sentences(self, parser):
        sentences = [
            "Rates changed on 2025-03-15.",
            "No dates here.",
            "Also nothing.",
            "More filler.",
            "As confirmed on 2025-03-15 again.",
        ]
        index = build_temporal_index(sentences, REF, parser)
        assert index.entries[TimePoint(2025, 3, 15)] == [0, 4]
        assert index.anchor_sentences() == [0, 4]

    def test_index_partition_matches_flat_mentions(self, parser):
        sentences = [
            "Start 2025-01-10.",
            "Then March 2025 happened.",
            "Finally 2026 arrives.",
        ]
        flat = parse_temporal_expressions(sentences, REF, parser)
        index = build_temporal_index(sentences, REF, parser)
        assert sorted(
            ((m.normalized, m.sentence_index) for m in flat),
            key=lambda p: (p[0].render(), p[1]),
        ) == sorted(index.pairs(), key=lambda p: (p[0].render(), p[1]))

    def test_times_in_span(self, parser):
        sentences = ["On 2025-01-10.", "On 2025-02-11.", "On 2025-03-12."]
        index = build_temporal_index(sentences, REF, parser)
        assert index.times_in_span(1, 2) == [TimePoint(2025, 2, 11), TimePoint(2025, 3, 12)]
