"""Event-class rule table mapping content to validity horizons.

The reasoning backend and the fusion alignment check share one table so
that a chunk's implied expiry is derived identically in both places.
Derivation precedence:

1. An explicit validity statement ("valid until ...", "expires on ...")
   wins outright; the first date mention after the marker is the horizon.
2. Otherwise the event class decides: the horizon is the event time plus
   the class validity window. Scheduled events expire on the event date
   itself; periodic content gets its period length.

The table is data, not code: the built-in default can be replaced from a
JSON file without touching callers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .temporal_parser import TemporalParser
from .text import tokenize
from .timepoint import TimePoint

__all__ = [
    "EventClass",
    "RuleTable",
    "DerivedExpiry",
    "classify_event",
    "find_explicit_expiry",
    "derive_expiry",
]

# Period keyword -> validity in days, for the periodic class.
_DEFAULT_PERIODS = {
    "weekly": 7,
    "annual": 365,
    "yearly": 365,
    "monthly": 30,
    "quarterly": 91,
    "daily": 1,
}

_DEFAULT_CLASSES = (
    {
        "name": "periodic",
        "keywords": sorted(_DEFAULT_PERIODS),
        "validity_days": None,
        "periods": dict(_DEFAULT_PERIODS),
    },
    {
        "name": "breaking_news",
        "keywords": [
            "accident", "blast", "blaze", "collapse", "crash", "disaster",
            "earthquake", "emergency", "evacuation", "explosion", "fire",
            "flood", "landslide", "outage", "outbreak", "rescue", "spill",
            "storm", "typhoon", "wildfire",
        ],
        "validity_days": 3,
    },
    {
        "name": "sports_fixture",
        "keywords": [
            "championship", "cup", "derby", "final", "fixture", "game",
            "kickoff", "match", "playoff", "race", "semifinal", "tournament",
        ],
        "validity_days": 1,
    },
    {
        "name": "scheduled_event",
        "keywords": [
            "ceremony", "concert", "conference", "deadline", "election",
            "exam", "exhibition", "expo", "festival", "forum", "hearing",
            "launch", "premiere", "referendum", "summit", "vote",
        ],
        "validity_days": 0,
    },
    {
        "name": "policy",
        "keywords": [
            "act", "bylaw", "code", "decree", "directive", "law", "mandate",
            "ordinance", "policy", "regulation", "regulations", "statute",
        ],
        "validity_days": 3650,
    },
)

# Explicit validity markers; the horizon is the first date parsed after one.
_DEFAULT_EXPLICIT_MARKERS = (
    r"\bvalid\s+(?:until|through|thru)\b",
    r"\bexpires?\s+(?:on|at|in)?\b",
    r"\bexpiration\s+date\b",
    r"\beffective\s+until\b",
    r"\bin\s+effect\s+until\b",
    r"\bapplies\s+until\b",
)

_DEFAULT_FALLBACK_DAYS = 30

_ALLOWED_TABLE_KEYS = {"classes", "explicit_markers", "default_validity_days"}
_ALLOWED_CLASS_KEYS = {"name", "keywords", "validity_days", "periods"}


@dataclass(frozen=True)
class EventClass:
    """One row of the rule table.

    ``validity_days`` of 0 means the horizon is the event time itself;
    None marks a periodic class whose horizon comes from ``periods``.
    """

    name: str
    keywords: frozenset[str]
    validity_days: int | None
    periods: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.validity_days is None and not self.periods:
            raise ConfigError(f"class {self.name!r} has neither validity_days nor periods")
        if self.validity_days is not None and self.validity_days < 0:
            raise ConfigError(f"class {self.name!r} has negative validity_days")


@dataclass(frozen=True)
class RuleTable:
    """Ordered event classes plus explicit-statement markers.

    Classification scans classes in declared order and the first keyword
    hit wins, so more specific classes belong earlier.
    """

    classes: tuple[EventClass, ...]
    explicit_markers: tuple[str, ...]
    default_validity_days: int = _DEFAULT_FALLBACK_DAYS

    def __post_init__(self) -> None:
        if self.default_validity_days < 0:
            raise ConfigError("default_validity_days must be >= 0")
        names = [c.name for c in self.classes]
        if len(names) != len(set(names)):
            raise ConfigError("duplicate event class names")
        for pattern in self.explicit_markers:
            try:
                re.compile(pattern, re.IGNORECASE)
            except re.error as exc:
                raise ConfigError(f"bad explicit marker {pattern!r}: {exc}") from exc

    @classmethod
    def default(cls) -> "RuleTable":
        return cls(
            classes=tuple(_class_from_mapping(raw) for raw in _DEFAULT_CLASSES),
            explicit_markers=_DEFAULT_EXPLICIT_MARKERS,
        )

    @classmethod
    def from_json(cls, path: str) -> "RuleTable":
        """Load a table from JSON; unknown keys are rejected."""
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read rule table {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"rule table {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("rule table root must be an object")
        unknown = set(raw) - _ALLOWED_TABLE_KEYS
        if unknown:
            raise ConfigError(f"unknown rule table keys: {sorted(unknown)}")
        if "classes" not in raw or not isinstance(raw["classes"], list):
            raise ConfigError("rule table needs a 'classes' list")
        classes = tuple(_class_from_mapping(item) for item in raw["classes"])
        markers = raw.get("explicit_markers", list(_DEFAULT_EXPLICIT_MARKERS))
        if not isinstance(markers, list) or not all(isinstance(m, str) for m in markers):
            raise ConfigError("explicit_markers must be a list of strings")
        default_days = raw.get("default_validity_days", _DEFAULT_FALLBACK_DAYS)
        if not isinstance(default_days, int):
            raise ConfigError("default_validity_days must be an integer")
        return cls(
            classes=classes,
            explicit_markers=tuple(markers),
            default_validity_days=default_days,
        )

    def marker_patterns(self) -> tuple[re.Pattern[str], ...]:
        return tuple(re.compile(p, re.IGNORECASE) for p in self.explicit_markers)


def _class_from_mapping(raw: object) -> EventClass:
    if not isinstance(raw, dict):
        raise ConfigError("event class entries must be objects")
    unknown = set(raw) - _ALLOWED_CLASS_KEYS
    if unknown:
        raise ConfigError(f"unknown event class keys: {sorted(unknown)}")
    name = raw.get("name")
    keywords = raw.get("keywords")
    if not isinstance(name, str) or not name:
        raise ConfigError("event class needs a non-empty name")
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise ConfigError(f"class {name!r}: keywords must be a list of strings")
    validity = raw.get("validity_days")
    if validity is not None and not isinstance(validity, int):
        raise ConfigError(f"class {name!r}: validity_days must be an integer or null")
    periods = raw.get("periods", {})
    if not isinstance(periods, dict) or not all(
        isinstance(k, str) and isinstance(v, int) and v > 0 for k, v in periods.items()
    ):
        raise ConfigError(f"class {name!r}: periods must map keyword -> positive days")
    return EventClass(
        name=name,
        keywords=frozenset(k.lower() for k in keywords),
        validity_days=validity,
        periods={k.lower(): v for k, v in periods.items()},
    )


@dataclass(frozen=True)
class DerivedExpiry:
    """A horizon plus how it was obtained.

    ``source`` is "explicit", an event class name, or "default".
    """

    expiry: TimePoint
    source: str
    event_time: TimePoint


def classify_event(table: RuleTable, tokens: list[str]) -> EventClass | None:
    """First class in table order with any keyword among the tokens."""
    token_set = set(tokens)
    for cls in table.classes:
        if cls.keywords & token_set:
            return cls
    return None


def _class_validity_days(table: RuleTable, cls: EventClass, tokens: list[str]) -> int:
    if cls.validity_days is not None:
        return cls.validity_days
    # Periodic class: the first period keyword present decides, scanning
    # tokens in order so the match is deterministic.
    for token in tokens:
        if token in cls.periods:
            return cls.periods[token]
    return table.default_validity_days


def find_explicit_expiry(
    table: RuleTable,
    text: str,
    parser: TemporalParser,
    reference: TimePoint,
) -> TimePoint | None:
    """Horizon from an explicit validity statement, if the text has one.

    The earliest marker occurrence wins; its horizon is the first date
    mention parsed from the text after the marker.
    """
    best: tuple[int, TimePoint] | None = None
    for pattern in table.marker_patterns():
        match = pattern.search(text)
        if match is None:
            continue
        tail = text[match.end():]
        mentions = parser.parse_sentence(tail, 0, reference)
        if not mentions:
            continue
        candidate = (match.start(), mentions[0].normalized)
        if best is None or candidate[0] < best[0]:
            best = candidate
    return best[1] if best else None


def derive_expiry(
    table: RuleTable,
    text: str,
    extra_tokens: list[str],
    event_time: TimePoint,
    parser: TemporalParser,
    reference: TimePoint,
) -> DerivedExpiry:
    """Expiration horizon for a piece of content.

    ``extra_tokens`` carries query tokens so classification sees both the
    content and the information need. ``event_time`` anchors class-based
    horizons; ``reference`` resolves relative dates in explicit statements.
    """
    explicit = find_explicit_expiry(table, text, parser, reference)
    if explicit is not None:
        return DerivedExpiry(expiry=explicit, source="explicit", event_time=event_time)
    tokens = tokenize(text) + [t.lower() for t in extra_tokens]
    cls = classify_event(table, tokens)
    if cls is None:
        days = table.default_validity_days
        source = "default"
    else:
        days = _class_validity_days(table, cls, tokens)
        source = cls.name
    if days == 0:
        # Horizon is the event time itself, at its stated granularity.
        return DerivedExpiry(expiry=event_time, source=source, event_time=event_time)
    return DerivedExpiry(
        expiry=event_time.add_days(days),
        source=source,
        event_time=event_time,
    )
