"""Corpus record formats and line-delimited JSON IO.

Documents arrive pre-segmented into sentences; segmentation is upstream.
One record per line. Document fields: docid, title, sentences, pub_time,
authority, source. Query fields: qid, text, search_time, tier, gt_expiry,
candidates (docid/grade/label triples).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import CorpusFormatError
from .timepoint import TimePoint

__all__ = [
    "Document",
    "CandidateJudgment",
    "EvalQuery",
    "load_documents",
    "load_queries",
    "dump_documents",
    "dump_queries",
]

TIERS = ("none", "month", "week")


@dataclass(frozen=True)
class Document:
    docid: str
    title: str
    sentences: tuple[str, ...]
    pub_time: TimePoint
    authority: float
    source: str = ""

    def to_record(self) -> dict:
        return {
            "docid": self.docid,
            "title": self.title,
            "sentences": list(self.sentences),
            "pub_time": self.pub_time.render(),
            "authority": self.authority,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Document":
        authority = float(rec["authority"])
        if not 0.0 <= authority <= 1.0:
            raise ValueError(f"authority out of [0,1]: {authority}")
        return cls(
            docid=str(rec["docid"]),
            title=str(rec.get("title", "")),
            sentences=tuple(str(s) for s in rec["sentences"]),
            pub_time=TimePoint.parse_canonical(rec["pub_time"]),
            authority=authority,
            source=str(rec.get("source", "")),
        )


@dataclass(frozen=True)
class CandidateJudgment:
    """Per-candidate judgments: graded base relevance and freshness label."""

    docid: str
    grade: int  # base relevance, 0-4
    label: int  # freshness satisfaction, 0-2

    def to_record(self) -> list:
        return [self.docid, self.grade, self.label]


@dataclass(frozen=True)
class EvalQuery:
    qid: str
    text: str
    search_time: TimePoint
    tier: str = "none"  # none | month (<= 1 month) | week (<= 1 week)
    gt_expiry: TimePoint | None = None
    candidates: tuple[CandidateJudgment, ...] = ()

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown freshness tier: {self.tier!r}")

    def to_record(self) -> dict:
        return {
            "qid": self.qid,
            "text": self.text,
            "search_time": self.search_time.render(),
            "tier": self.tier,
            "gt_expiry": self.gt_expiry.render() if self.gt_expiry else None,
            "candidates": [c.to_record() for c in self.candidates],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvalQuery":
        gt = rec.get("gt_expiry")
        candidates = []
        for item in rec.get("candidates", []):
            docid, grade, label = item
            grade, label = int(grade), int(label)
            if not 0 <= grade <= 4:
                raise ValueError(f"grade out of range: {grade}")
            if not 0 <= label <= 2:
                raise ValueError(f"label out of range: {label}")
            candidates.append(CandidateJudgment(str(docid), grade, label))
        return cls(
            qid=str(rec["qid"]),
            text=str(rec["text"]),
            search_time=TimePoint.parse_canonical(rec["search_time"]),
            tier=str(rec.get("tier", "none")),
            gt_expiry=TimePoint.parse_canonical(gt) if gt else None,
            candidates=tuple(candidates),
        )


def _load_jsonl(path: str, builder, what: str) -> list:
    out, problems = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(builder(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"{what} line {lineno}: {exc}")
    if problems:
        raise CorpusFormatError(problems)
    return out


def load_documents(path: str) -> list[Document]:
    return _load_jsonl(path, Document.from_record, "document")


def load_queries(path: str) -> list[EvalQuery]:
    return _load_jsonl(path, EvalQuery.from_record, "query")


def dump_documents(docs: Iterable[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


def dump_queries(queries: Iterable[EvalQuery], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(q.to_record(), ensure_ascii=False) + "\n")
