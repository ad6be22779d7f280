import pytest

from expirank.corpus import Document
from expirank.rules import RuleTable
from expirank.temporal_parser import TemporalParser
from expirank.timepoint import TimePoint


@pytest.fixture(scope="session")
def parser() -> TemporalParser:
    return TemporalParser()


@pytest.fixture(scope="session")
def rule_table() -> RuleTable:
    return RuleTable.default()


def make_doc(
    docid: str,
    sentences,
    pub: str,
    authority: float = 0.8,
    title: str = "",
) -> Document:
    return Document(
        docid=docid,
        title=title,
        sentences=tuple(sentences),
        pub_time=TimePoint.parse_canonical(pub),
        authority=authority,
        source="test",
    )
