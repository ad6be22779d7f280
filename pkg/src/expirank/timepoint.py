"""Hierarchical calendar points: year, year+quarter/month, or full date.

A TimePoint is the unit of all temporal reasoning in this package. Its
granularity depth is 1 (year), 2 (quarter or month), or 3 (day). Coarse
points resolve to the midpoint of their calendar span when day-level
arithmetic is needed; comparisons at mixed granularity use containment.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "TimePoint",
    "granularity_depth",
    "hierarchical_match_depth",
    "elapsed_days",
    "strictly_after",
    "compare_spans",
    "latest_timepoint",
    "agrees_at_granularity",
]

# Quarter q covers months 3q-2 .. 3q.
_QUARTER_FIRST_MONTH = {1: 1, 2: 4, 3: 7, 4: 10}

_CANONICAL_RE = re.compile(
    r"^(?P<year>\d{4})"
    r"(?:(?: Q(?P<quarter>[1-4]))|(?:-(?P<month>\d{2})(?:-(?P<day>\d{2}))?))?$"
)


@dataclass(frozen=True)
class TimePoint:
    """A calendar point with explicit granularity.

    Exactly one of these shapes is legal:
      year only            -> depth 1
      year + quarter       -> depth 2
      year + month         -> depth 2
      year + month + day   -> depth 3
    """

    year: int
    month: int | None = None
    day: int | None = None
    quarter: int | None = None

    def __post_init__(self) -> None:
        if self.quarter is not None:
            if self.month is not None or self.day is not None:
                raise ValueError("quarter points carry no month or day")
            if not 1 <= self.quarter <= 4:
                raise ValueError(f"quarter out of range: {self.quarter}")
        if self.day is not None and self.month is None:
            raise ValueError("day requires month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None:
            # Raises ValueError on calendar-invalid dates (no Feb 30).
            _dt.date(self.year, self.month, self.day)
        if not 1 <= self.year <= 9999:
            raise ValueError(f"year out of range: {self.year}")

    @property
    def depth(self) -> int:
        if self.day is not None:
            return 3
        if self.month is not None or self.quarter is not None:
            return 2
        return 1

    @classmethod
    def from_date(cls, d: _dt.date) -> "TimePoint":
        return cls(d.year, d.month, d.day)

    @classmethod
    def parse_canonical(cls, text: str) -> "TimePoint":
        """Parse the canonical render() forms: 2025, 2025 Q3, 2025-03, 2025-03-15."""
        s = text.strip()
        m = _CANONICAL_RE.match(s)
        if not m:
            raise ValueError(f"not a canonical time point: {text!r}")
        year = int(m.group("year"))
        if m.group("quarter"):
            return cls(year, quarter=int(m.group("quarter")))
        if m.group("day"):
            return cls(year, int(m.group("month")), int(m.group("day")))
        if m.group("month"):
            return cls(year, int(m.group("month")))
        return cls(year)

    def span(self) -> tuple[_dt.date, _dt.date]:
        """Inclusive (first_day, last_day) of the calendar span."""
        if self.day is not None:
            d = _dt.date(self.year, self.month, self.day)
            return d, d
        if self.month is not None:
            first = _dt.date(self.year, self.month, 1)
            return first, _last_day_of_month(self.year, self.month)
        if self.quarter is not None:
            m0 = _QUARTER_FIRST_MONTH[self.quarter]
            first = _dt.date(self.year, m0, 1)
            return first, _last_day_of_month(self.year, m0 + 2)
        return _dt.date(self.year, 1, 1), _dt.date(self.year, 12, 31)

    def resolve_ordinal(self) -> float:
        """Mean day-ordinal over the span: the unbiased midpoint under
        uniform uncertainty. Integral for depth-3 and odd spans."""
        first, last = self.span()
        return (first.toordinal() + last.toordinal()) / 2.0

    def midpoint_date(self) -> _dt.date:
        """Middle calendar day of the span (rounds down on even spans)."""
        first, last = self.span()
        return _dt.date.fromordinal((first.toordinal() + last.toordinal()) // 2)

    def add_days(self, days: int) -> "TimePoint":
        """Day-level offset from the midpoint; always yields a depth-3 point."""
        return TimePoint.from_date(self.midpoint_date() + _dt.timedelta(days=days))

    def chronological_key(self) -> tuple[float, int, int]:
        """Total order for sorting and deterministic tie-breaks."""
        first, _ = self.span()
        return (self.resolve_ordinal(), first.toordinal(), self.depth)

    def render(self) -> str:
        """Canonical text at the point's own granularity (re-parseable)."""
        if self.day is not None:
            return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.month is not None:
            return f"{self.year:04d}-{self.month:02d}"
        if self.quarter is not None:
            return f"{self.year:04d} Q{self.quarter}"
        return f"{self.year:04d}"

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.render()

    @property
    def level2(self) -> int | None:
        """Month number, or the quarter's sentinel; None at depth 1."""
        if self.month is not None:
            return self.month
        if self.quarter is not None:
            return -self.quarter
        return None


def _last_day_of_month(year: int, month: int) -> _dt.date:
    if month == 12:
        return _dt.date(year, 12, 31)
    return _dt.date(year, month + 1, 1) - _dt.timedelta(days=1)


def granularity_depth(t: TimePoint) -> int:
    """Hierarchical depth: year=1, quarter/month=2, day=3."""
    return t.depth


def _level2_agrees(a: TimePoint, b: TimePoint) -> bool:
    if a.month is not None and b.month is not None:
        return a.month == b.month
    if a.quarter is not None and b.quarter is not None:
        return a.quarter == b.quarter
    # Month vs quarter: agreement iff the month falls inside the quarter.
    month = a.month if a.month is not None else b.month
    quarter = a.quarter if a.quarter is not None else b.quarter
    if month is None or quarter is None:
        return False
    return _QUARTER_FIRST_MONTH[quarter] <= month <= _QUARTER_FIRST_MONTH[quarter] + 2


def hierarchical_match_depth(a: TimePoint, b: TimePoint) -> int:
    """Number of leading granularity levels on which a and b agree."""
    if a.year != b.year:
        return 0
    if a.depth < 2 or b.depth < 2 or not _level2_agrees(a, b):
        return 1
    if a.day is not None and b.day is not None and a.day == b.day and a.month == b.month:
        return 3
    return 2


def elapsed_days(t: TimePoint, reference: TimePoint) -> float:
    """Days from t back to the reference, midpoint-resolved, clamped at 0.

    A future t (relative to the reference) yields 0.0.
    """
    return max(0.0, reference.resolve_ordinal() - t.resolve_ordinal())


def strictly_after(a: TimePoint, b: TimePoint) -> bool:
    """Chronological a > b under midpoint resolution; equality is False."""
    return a.resolve_ordinal() > b.resolve_ordinal()


def compare_spans(a: TimePoint, b: TimePoint) -> int:
    """-1/0/+1 span comparison; 0 when the spans overlap (containment
    counts as equality at the coarser granularity)."""
    a_first, a_last = a.span()
    b_first, b_last = b.span()
    if a_last < b_first:
        return -1
    if b_last < a_first:
        return 1
    return 0


def latest_timepoint(times: "Iterable[TimePoint]") -> TimePoint | None:
    """Chronologically latest of the given points, or None if empty.

    Ties on the midpoint break toward the later span start, then the
    deeper granularity, then the rendered form, so the result is total.
    """
    pool = list(times)
    if not pool:
        return None
    return max(pool, key=lambda t: (t.chronological_key(), t.render()))


def agrees_at_granularity(t: TimePoint, reference: TimePoint) -> bool:
    """True when t matches the reference through all the reference's levels.

    Equivalent to: t equals the reference after truncation to the
    reference's granularity (so 2025-06-15 agrees with 2025-06).
    """
    return hierarchical_match_depth(t, reference) >= reference.depth
