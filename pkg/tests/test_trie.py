"""Character and suffix tries against brute-force oracles."""

import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostline.trie import (
    CharTrie,
    SuffixTrie,
    backoff_tails,
    build_char_trie,
    build_suffix_trie,
    mpcpp_completions,
    word_starts,
)


def oracle_topk(utterances, prefix, k, max_len=500):
    """Filter-and-sort reference for top_completions: no trie involved."""
    tally = Counter(u[:max_len] for u in utterances)
    hits = [
        (text[len(prefix):], count)
        for text, count in tally.items()
        if text.startswith(prefix)
    ]
    hits.sort(key=lambda it: (-it[1], it[0]))
    return hits[:k]


def oracle_suffix_counts(utterances, min_freq, max_len=500):
    """Count word-aligned suffixes, floor by frequency, then truncate."""
    tally = Counter()
    for u in utterances:
        for start in word_starts(u):
            tally[u[start:]] += 1
    kept = Counter()
    for suffix, count in tally.items():
        if count >= min_freq:
            kept[suffix[:max_len]] += count
    return kept


SMALL_CORPUS = [
    "how are you",
    "how are you",
    "how are you doing",
    "how about no",
    "hello there",
    "hello",
    "say how are you",
]


class TestWordStarts:
    @pytest.mark.parametrize(
        "text,starts",
        [
            ("", []),
            ("   ", []),
            ("a", [0]),
            ("a bb  c", [0, 2, 6]),
            ("  leading space", [2, 10]),
            ("tab\there", [0, 4]),
        ],
    )
    def test_examples(self, text, starts):
        assert word_starts(text) == starts


class TestCharTrie:
    def test_matches_oracle_on_small_corpus(self):
        trie = build_char_trie(SMALL_CORPUS)
        for prefix in ["h", "how", "how are you", "hello", "x", "", "how are you doing"]:
            for k in (1, 2, 10):
                assert trie.top_completions(prefix, k) == oracle_topk(SMALL_CORPUS, prefix, k)

    def test_frequency_beats_alphabet(self):
        trie = build_char_trie(["az", "az", "aa"])
        assert trie.top_completions("a", 2) == [("z", 2), ("a", 1)]

    def test_ties_break_lexicographically(self):
        trie = build_char_trie(["ab", "aa", "ac"])
        assert trie.top_completions("a", 3) == [("a", 1), ("b", 1), ("c", 1)]

    def test_exact_hit_includes_empty_remainder(self):
        trie = build_char_trie(["hello", "hello world"])
        assert trie.top_completions("hello", 5) == [("", 1), (" world", 1)]

    def test_miss_returns_nothing(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.top_completions("zebra", 5) == []
        assert trie.top_completions("how are you doing?", 5) == []

    def test_k_zero_returns_nothing(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.top_completions("h", 0) == []

    def test_build_is_input_order_independent(self):
        shuffled = SMALL_CORPUS[:]
        random.Random(5).shuffle(shuffled)
        a, b = build_char_trie(SMALL_CORPUS), build_char_trie(shuffled)
        assert a.strings == b.strings
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_max_len_truncates_and_merges(self):
        trie = build_char_trie(["abcdef", "abcxyz"], max_len=3)
        assert trie.top_completions("ab", 5) == [("c", 2)]

    def test_prefix_count(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.prefix_count("how") == 4
        assert trie.prefix_count("how are you") == 3
        assert trie.prefix_count("") == len(SMALL_CORPUS)
        assert trie.prefix_count("nope") == 0

    def test_is_indexed(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.is_indexed("hello")
        assert not trie.is_indexed("hell")
        assert not trie.is_indexed("hello!")


class TestTrieNode:
    def test_root_pass_count_is_corpus_size(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.root.pass_count == len(SMALL_CORPUS)

    def test_terminal_count(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert trie.node("how are you").terminal_count == 2
        assert trie.node("how are").terminal_count == 0

    def test_children_partition_pass_counts(self):
        trie = build_char_trie(SMALL_CORPUS)
        node = trie.node("h")
        kids = node.children()
        assert set(kids) == {"o", "e"}
        assert sum(c.pass_count for c in kids.values()) == node.pass_count
        assert all(kids[ch].prefix == "h" + ch for ch in kids)

    def test_terminal_plus_children_cover_node(self):
        trie = build_char_trie(["a", "ab", "ac", "ac"])
        node = trie.node("a")
        kids = node.children()
        assert node.terminal_count + sum(c.pass_count for c in kids.values()) == node.pass_count


class TestCodepointEdges:
    def test_max_codepoint_interval(self):
        top = chr(0x10FFFF)
        corpus = [top, top + "a", "plain"]
        trie = build_char_trie(corpus)
        assert trie.top_completions(top, 5) == [("", 1), ("a", 1)]

    def test_empty_prefix_spans_everything(self):
        trie = build_char_trie(SMALL_CORPUS)
        assert len(trie.top_completions("", 100)) == len(set(SMALL_CORPUS))


@settings(max_examples=200, deadline=None)
@given(
    utterances=st.lists(st.text(alphabet="ab ", min_size=1, max_size=8), min_size=1, max_size=30),
    prefix=st.text(alphabet="ab ", max_size=4),
    k=st.integers(min_value=1, max_value=5),
)
def test_top_completions_equals_oracle(utterances, prefix, k):
    trie = build_char_trie(utterances)
    assert trie.top_completions(prefix, k) == oracle_topk(utterances, prefix, k)


class TestSuffixTrie:
    def test_counts_match_oracle(self):
        trie = build_suffix_trie(SMALL_CORPUS, min_freq=2)
        expected = oracle_suffix_counts(SMALL_CORPUS, min_freq=2)
        assert Counter(dict(zip(trie.strings, trie.counts.tolist()))) == expected

    def test_min_freq_floor(self):
        trie = build_suffix_trie(["one two", "three two"], min_freq=2)
        assert trie.strings == ["two"]
        assert trie.counts.tolist() == [2]

    def test_rare_suffixes_absent(self):
        trie = build_suffix_trie(SMALL_CORPUS, min_freq=2)
        assert not trie.is_indexed("about no")

    def test_suffixes_are_word_aligned(self):
        trie = build_suffix_trie(["abc def", "xbc def"], min_freq=2)
        assert trie.is_indexed("def")
        assert not trie.is_indexed("bc def")


class TestBackoffTails:
    def test_longest_first_including_full_prefix(self):
        assert backoff_tails("say how ar") == ["say how ar", "how ar", "ar"]

    def test_trailing_space_keeps_word_tails(self):
        assert backoff_tails("say how ") == ["say how ", "how "]

    def test_whitespace_only_gives_nothing(self):
        assert backoff_tails("   ") == []


class TestMpcppCompletions:
    @pytest.fixture()
    def tries(self):
        return build_char_trie(SMALL_CORPUS), build_suffix_trie(SMALL_CORPUS, min_freq=2)

    def test_direct_hit_reports_main_route(self, tries):
        char_trie, suffix_trie = tries
        cands, source, key = mpcpp_completions(char_trie, suffix_trie, "how ar", 3)
        assert source == "MPC"
        assert key == "how ar"
        assert cands[0] == ("e you", 2)

    def test_backoff_hits_longest_matching_tail(self, tries):
        char_trie, suffix_trie = tries
        cands, source, key = mpcpp_completions(char_trie, suffix_trie, "well how ar", 3)
        assert source == "MPCPP"
        assert key == "how ar"
        assert cands[0][0] == "e you"

    def test_backoff_can_drop_several_words(self, tries):
        char_trie, suffix_trie = tries
        cands, source, key = mpcpp_completions(char_trie, suffix_trie, "well then ar", 3)
        assert source == "MPCPP"
        assert key == "ar"
        assert cands[0][0] == "e you"

    def test_total_miss_is_empty(self, tries):
        char_trie, suffix_trie = tries
        cands, source, _ = mpcpp_completions(char_trie, suffix_trie, "zzz", 3)
        assert cands == []
        assert source == "MPCPP"


class TestSerialization:
    def test_char_trie_roundtrip_preserves_queries(self, tmp_path):
        trie = build_char_trie(SMALL_CORPUS)
        trie.save(tmp_path / "t.ghst")
        loaded = CharTrie.load(tmp_path / "t.ghst")
        assert loaded.max_len == trie.max_len
        for prefix in ["h", "how are", "", "zebra"]:
            assert loaded.top_completions(prefix, 10) == trie.top_completions(prefix, 10)

    def test_suffix_trie_roundtrip_keeps_min_freq(self, tmp_path):
        trie = build_suffix_trie(SMALL_CORPUS, min_freq=3)
        trie.save(tmp_path / "t.ghst")
        loaded = SuffixTrie.load(tmp_path / "t.ghst")
        assert loaded.min_freq == 3
        assert loaded.strings == trie.strings

    def test_save_is_deterministic(self, tmp_path):
        build_char_trie(SMALL_CORPUS).save(tmp_path / "a.ghst")
        build_char_trie(SMALL_CORPUS).save(tmp_path / "b.ghst")
        assert (tmp_path / "a.ghst").read_bytes() == (tmp_path / "b.ghst").read_bytes()
