from hypothesis import given, strategies as st

from expirank.text import DEFAULT_STOPWORDS, content_tokens, load_stopwords, tokenize


class TestTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert tokenize("Hong-Kong FIRE, 2025!") == ["hong", "kong", "fire", "2025"]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("   ...   ") == []

    @given(st.text(max_size=200))
    def test_tokens_are_lowercase_word_chars(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token


class TestContentTokens:
    def test_drops_stopwords(self):
        got = content_tokens("the fire was extinguished on the hill", DEFAULT_STOPWORDS)
        assert "the" not in got
        assert "was" not in got
        assert "fire" in got
        assert "extinguished" in got

    def test_preserves_order_and_multiplicity(self):
        got = content_tokens("fire fire rescue", DEFAULT_STOPWORDS)
        assert got == ["fire", "fire", "rescue"]


class TestStopwordFile:
    def test_load_skips_comments_and_blanks(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("# comment line\nthe\n\nAnd\n  of  \n", encoding="utf-8")
        words = load_stopwords(str(path))
        assert words == frozenset({"the", "and", "of"})
