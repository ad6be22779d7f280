"""Temporal-expression parsing and the document temporal index.

The parser is deliberately closed-world: it recognizes the date patterns
and relative expressions declared in its pattern config, nothing else.
Unrecognized expressions are skipped (logged at debug level), which keeps
parsing deterministic for a fixed config.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .timepoint import TimePoint

logger = logging.getLogger(__name__)

__all__ = [
    "PatternConfig",
    "TemporalMention",
    "TemporalParser",
    "DocumentTemporalIndex",
    "parse_temporal_expressions",
    "build_temporal_index",
]

_MONTH_NAMES = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7,
    "aug": 8, "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}

_MONTH_NAME_ALT = (
    "january|february|march|april|may|june|july|august|september|october"
    "|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec"
)

# Absolute patterns are tried in order; an earlier match consumes its span
# so "2025-03-15" never also yields "2025-03" or "2025".
_DEFAULT_DATE_PATTERNS = [
    {"name": "iso_date",
     "regex": r"(?<![\d-])(?P<year>\d{4})-(?P<month>\d{1,2})-(?P<day>\d{1,2})(?![\d-])"},
    {"name": "slash_ymd",
     "regex": r"(?<![\d/.])(?P<year>\d{4})[/.](?P<month>\d{1,2})[/.](?P<day>\d{1,2})(?![\d/.])"},
    {"name": "textual_mdy",
     "regex": rf"\b(?P<month_name>{_MONTH_NAME_ALT})\.?\s+(?P<day>\d{{1,2}})(?:st|nd|rd|th)?,?\s+(?P<year>\d{{4}})\b"},
    {"name": "textual_dmy",
     "regex": rf"\b(?P<day>\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?(?P<month_name>{_MONTH_NAME_ALT})\.?,?\s+(?P<year>\d{{4}})\b"},
    {"name": "numeric_ambiguous",
     "regex": r"(?<![\d/])(?P<a>\d{1,2})/(?P<b>\d{1,2})/(?P<year>\d{4})(?!\d)"},
    {"name": "numeric_ambiguous_y2",
     "regex": r"(?<![\d/])(?P<a>\d{1,2})/(?P<b>\d{1,2})/(?P<y2>\d{2})(?!\d)"},
    {"name": "quarter",
     "regex": r"\b(?P<year>\d{4})\s*[-\s]?Q(?P<quarter>[1-4])\b"},
    {"name": "quarter_prefix",
     "regex": r"\bQ(?P<quarter>[1-4])\s+(?:of\s+)?(?P<year>\d{4})\b"},
    {"name": "iso_year_month",
     "regex": r"(?<![\d-])(?P<year>\d{4})-(?P<month>\d{1,2})(?![\d-])"},
    {"name": "textual_month_year",
     "regex": rf"\b(?P<month_name>{_MONTH_NAME_ALT})\.?,?\s+(?:of\s+)?(?P<year>\d{{4}})\b"},
    {"name": "bare_year",
     "regex": r"(?<![\d-])(?P<year>(?:19|20)\d{2})(?![\d-])"},
]

# Closed relative-expression vocabulary: token pattern -> calendar offset.
# "offset" is a fixed shift; "scale" multiplies the first capture group.
_DEFAULT_RELATIVE_RULES = [
    {"pattern": r"\byesterday\b", "unit": "day", "offset": -1},
    {"pattern": r"\btoday\b", "unit": "day", "offset": 0},
    {"pattern": r"\btomorrow\b", "unit": "day", "offset": 1},
    {"pattern": r"\blast\s+week\b", "unit": "day", "offset": -7},
    {"pattern": r"\blast\s+month\b", "unit": "month", "offset": -1},
    {"pattern": r"\blast\s+year\b", "unit": "year", "offset": -1},
    {"pattern": r"\bthis\s+month\b", "unit": "month", "offset": 0},
    {"pattern": r"\bthis\s+year\b", "unit": "year", "offset": 0},
    {"pattern": r"\b(\d+)\s+days?\s+ago\b", "unit": "day", "scale": -1},
    {"pattern": r"\b(\d+)\s+weeks?\s+ago\b", "unit": "day", "scale": -7},
    {"pattern": r"\b(\d+)\s+months?\s+ago\b", "unit": "month", "scale": -1},
    {"pattern": r"\b(\d+)\s+years?\s+ago\b", "unit": "year", "scale": -1},
]

_ALLOWED_CONFIG_KEYS = {
    "date_patterns", "relative_rules", "month_names",
    "two_digit_year_pivot", "ambiguous_numeric_order",
}


@dataclass(frozen=True)
class PatternConfig:
    """Declarative parser configuration (see README for the file schema)."""

    date_patterns: tuple = ()
    relative_rules: tuple = ()
    month_names: dict = field(default_factory=dict)
    two_digit_year_pivot: int = 70
    ambiguous_numeric_order: str = "mdy"  # month/day order for a/b/year forms

    @classmethod
    def default(cls) -> "PatternConfig":
        return cls(
            date_patterns=tuple(_DEFAULT_DATE_PATTERNS),
            relative_rules=tuple(_DEFAULT_RELATIVE_RULES),
            month_names=dict(_MONTH_NAMES),
        )

    @classmethod
    def from_json(cls, path: str) -> "PatternConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - _ALLOWED_CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown pattern-config keys: {sorted(unknown)}")
        base = cls.default()
        return cls(
            date_patterns=tuple(raw.get("date_patterns", base.date_patterns)),
            relative_rules=tuple(raw.get("relative_rules", base.relative_rules)),
            month_names={str(k).lower(): int(v)
                         for k, v in raw.get("month_names", base.month_names).items()},
            two_digit_year_pivot=int(raw.get("two_digit_year_pivot",
                                             base.two_digit_year_pivot)),
            ambiguous_numeric_order=str(raw.get("ambiguous_numeric_order",
                                                base.ambiguous_numeric_order)),
        )


@dataclass(frozen=True)
class TemporalMention:
    """A recognized temporal expression tied back to its sentence."""

    surface: str
    normalized: TimePoint
    sentence_index: int
    is_relative: bool = False


class DocumentTemporalIndex:
    """Time -> sentence-positions mapping for one document."""

    def __init__(self, mentions: Iterable[TemporalMention] = ()):
        self.entries: dict[TimePoint, list[int]] = {}
        for m in mentions:
            self.entries.setdefault(m.normalized, []).append(m.sentence_index)

    def is_empty(self) -> bool:
        return not self.entries

    def anchor_sentences(self) -> list[int]:
        """Sorted distinct sentence indices that carry a temporal mention."""
        seen: set[int] = set()
        for positions in self.entries.values():
            seen.update(positions)
        return sorted(seen)

    def times_in_span(self, start: int, end: int) -> list[TimePoint]:
        """TimePoints mentioned anywhere in sentences [start, end]."""
        hits = [t for t, positions in self.entries.items()
                if any(start <= p <= end for p in positions)]
        hits.sort(key=lambda t: (t.chronological_key(), t.render()))
        return hits

    def pairs(self) -> list[tuple[TimePoint, int]]:
        out = []
        for t, positions in self.entries.items():
            out.extend((t, p) for p in positions)
        return out


class TemporalParser:
    """Deterministic pattern-driven temporal parser."""

    def __init__(self, config: PatternConfig | None = None):
        self.config = config or PatternConfig.default()
        self._date_patterns = [
            (p["name"], re.compile(p["regex"], re.IGNORECASE))
            for p in self.config.date_patterns
        ]
        self._relative_rules = [
            (re.compile(r["pattern"], re.IGNORECASE), r)
            for r in self.config.relative_rules
        ]

    def parse_sentences(
        self, sentences: Sequence[str], reference_time: TimePoint
    ) -> list[TemporalMention]:
        mentions: list[TemporalMention] = []
        for idx, sentence in enumerate(sentences):
            mentions.extend(self._parse_one(sentence, idx, reference_time))
        return mentions

    def parse_sentence(
        self, sentence: str, index: int, reference_time: TimePoint
    ) -> list[TemporalMention]:
        """Mentions in one sentence, tagged with the given sentence index."""
        return self._parse_one(sentence, index, reference_time)

    def _parse_one(
        self, sentence: str, idx: int, reference: TimePoint
    ) -> list[TemporalMention]:
        found: list[tuple[int, int, TemporalMention]] = []
        consumed: list[tuple[int, int]] = []

        def overlaps(a: int, b: int) -> bool:
            return any(a < e and s < b for s, e in consumed)

        for name, rx in self._date_patterns:
            for m in rx.finditer(sentence):
                if overlaps(m.start(), m.end()):
                    continue
                tp = self._normalize_absolute(name, m)
                if tp is None:
                    continue
                consumed.append((m.start(), m.end()))
                found.append((m.start(), m.end(),
                              TemporalMention(m.group(0), tp, idx)))
        for rx, rule in self._relative_rules:
            for m in rx.finditer(sentence):
                if overlaps(m.start(), m.end()):
                    continue
                tp = self._resolve_relative(rule, m, reference)
                if tp is None:
                    continue
                consumed.append((m.start(), m.end()))
                found.append((m.start(), m.end(),
                              TemporalMention(m.group(0), tp, idx, is_relative=True)))

        found.sort(key=lambda item: (item[0], item[1]))
        return [mention for _, _, mention in found]

    def _normalize_absolute(self, name: str, m: re.Match) -> TimePoint | None:
        g = m.groupdict()
        try:
            if g.get("quarter"):
                return TimePoint(int(g["year"]), quarter=int(g["quarter"]))
            if g.get("a") is not None:
                a, b = int(g["a"]), int(g["b"])
                if self.config.ambiguous_numeric_order == "dmy":
                    day, month = a, b
                else:
                    month, day = a, b
                year = self._expand_year(g)
                logger.debug("ambiguous numeric date %r read as %04d-%02d-%02d",
                             m.group(0), year, month, day)
                return TimePoint(year, month, day)
            year = self._expand_year(g)
            month = None
            if g.get("month_name"):
                month = self.config.month_names.get(g["month_name"].lower())
                if month is None:
                    return None
            elif g.get("month"):
                month = int(g["month"])
            if g.get("day"):
                return TimePoint(year, month, int(g["day"]))
            if month is not None:
                return TimePoint(year, month)
            return TimePoint(year)
        except (ValueError, KeyError):
            logger.debug("skipping unnormalizable expression %r (%s)",
                         m.group(0), name)
            return None

    def _expand_year(self, g: dict) -> int:
        if g.get("y2") is not None:
            y2 = int(g["y2"])
            pivot = self.config.two_digit_year_pivot
            year = 2000 + y2 if y2 < pivot else 1900 + y2
            logger.debug("two-digit year %02d expanded to %d", y2, year)
            return year
        return int(g["year"])

    def _resolve_relative(
        self, rule: dict, m: re.Match, reference: TimePoint
    ) -> TimePoint | None:
        if reference.depth != 3:
            logger.debug("relative expression %r skipped: reference not a full date",
                         m.group(0))
            return None
        offset = rule.get("offset")
        if offset is None:
            try:
                offset = rule["scale"] * int(m.group(1))
            except (IndexError, ValueError):
                return None
        ref_date = _dt.date(reference.year, reference.month, reference.day)
        unit = rule["unit"]
        if unit == "day":
            d = ref_date + _dt.timedelta(days=offset)
            return TimePoint.from_date(d)
        if unit == "month":
            total = reference.year * 12 + (reference.month - 1) + offset
            return TimePoint(total // 12, total % 12 + 1)
        if unit == "year":
            return TimePoint(reference.year + offset)
        logger.debug("relative rule with unknown unit %r", unit)
        return None


def parse_temporal_expressions(
    sentences: Sequence[str],
    reference_time: TimePoint,
    parser: TemporalParser | None = None,
) -> list[TemporalMention]:
    """All recognized temporal mentions across the sentence sequence."""
    return (parser or TemporalParser()).parse_sentences(sentences, reference_time)


def build_temporal_index(
    sentences: Sequence[str],
    reference_time: TimePoint,
    parser: TemporalParser | None = None,
) -> DocumentTemporalIndex:
    """Group mentions by normalized TimePoint; empty text gives an empty index."""
    return DocumentTemporalIndex(
        parse_temporal_expressions(sentences, reference_time, parser)
    )
