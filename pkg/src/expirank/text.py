"""Tokenization shared by query parsing, chunk scoring, and event rules.

Whitespace/punctuation split plus lowercasing; no stemming. The stopword
list is configurable; the default covers common English function words.
"""

from __future__ import annotations

import re

__all__ = ["tokenize", "content_tokens", "DEFAULT_STOPWORDS", "load_stopwords"]

_WORD_RE = re.compile(r"\w+", re.UNICODE)

DEFAULT_STOPWORDS = frozenset("""
a an and are as at be been but by did do does for from had has have he her
him his how i if in into is it its may me my no nor not of on or our out
she so than that the their them then there these they this to upon was we
were what when where which who will with you your
""".split())


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens in order of appearance."""
    return [w.lower() for w in _WORD_RE.findall(text)]


def content_tokens(text: str, stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> list[str]:
    """Tokens with stopwords removed."""
    return [t for t in tokenize(text) if t not in stopwords]


def load_stopwords(path: str) -> frozenset[str]:
    """One stopword per line; blank lines and #-comments ignored."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.append(word)
    return frozenset(words)
