"""Prefix tries over utterances and their word-aligned suffixes.

The layout is a sorted array of distinct strings with multiplicities rather
than a pointer structure: a trie node is the bisect interval of strings
sharing a prefix, its pass count the interval's summed multiplicity.  That
keeps build deterministic, serialisation flat, and lookup a pair of binary
searches.  The node view (:class:`TrieNode`) exposes the classic recursive
shape for callers that need to walk children.
"""

from __future__ import annotations

from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .container import decode_string_list, encode_string_list, read_container, write_container

#: Indexed strings are truncated to this many characters.
DEFAULT_MAX_LEN = 500

#: Word-aligned suffixes rarer than this are not indexed.
DEFAULT_MIN_FREQ = 2

_MAX_CODEPOINT = 0x10FFFF


def _interval_upper_key(prefix: str) -> str | None:
    """Smallest string sorting after every string that starts with ``prefix``."""
    for i in reversed(range(len(prefix))):
        cp = ord(prefix[i])
        if cp < _MAX_CODEPOINT:
            return prefix[:i] + chr(cp + 1)
    return None


def word_starts(text: str) -> list[int]:
    """Start offsets of maximal non-whitespace runs."""
    starts = []
    in_word = False
    for i, ch in enumerate(text):
        if ch.isspace():
            in_word = False
        elif not in_word:
            starts.append(i)
            in_word = True
    return starts


@dataclass
class TrieNode:
    """Read-only view of one trie node, identified by its prefix."""

    trie: "CharTrie"
    prefix: str
    lo: int
    hi: int

    @property
    def pass_count(self) -> int:
        return int(self.trie.counts[self.lo : self.hi].sum())

    @property
    def terminal_count(self) -> int:
        if self.lo < self.hi and self.trie.strings[self.lo] == self.prefix:
            return int(self.trie.counts[self.lo])
        return 0

    def children(self) -> dict[str, "TrieNode"]:
        out: dict[str, TrieNode] = {}
        depth = len(self.prefix)
        i = self.lo
        if i < self.hi and self.trie.strings[i] == self.prefix:
            i += 1
        while i < self.hi:
            ch = self.trie.strings[i][depth]
            child = self.trie.node(self.prefix + ch)
            out[ch] = child
            i = child.hi
        return out


class CharTrie:
    """Character trie over full utterances, the MPC candidate source."""

    kind = "char_trie"

    def __init__(self, strings: list[str], counts: np.ndarray, max_len: int, meta: dict | None = None):
        self.strings = strings
        self.counts = np.asarray(counts, dtype=np.int64)
        self.max_len = max_len
        self.meta = dict(meta or {})

    def _interval(self, prefix: str) -> tuple[int, int]:
        lo = bisect_left(self.strings, prefix)
        upper = _interval_upper_key(prefix)
        hi = len(self.strings) if upper is None else bisect_left(self.strings, upper)
        return lo, hi

    def node(self, prefix: str) -> TrieNode:
        lo, hi = self._interval(prefix)
        return TrieNode(self, prefix, lo, hi)

    @property
    def root(self) -> TrieNode:
        return self.node("")

    def prefix_count(self, prefix: str) -> int:
        """How many indexed strings pass through ``prefix``."""
        lo, hi = self._interval(prefix)
        return int(self.counts[lo:hi].sum())

    def is_indexed(self, text: str) -> bool:
        """Exact-string membership, used for seen/unseen marking."""
        lo, hi = self._interval(text[: self.max_len])
        return lo < hi and self.strings[lo] == text[: self.max_len]

    def top_completions(self, prefix: str, k: int) -> list[tuple[str, int]]:
        """Up to ``k`` remainders ranked by frequency desc, then lexicographic.

        The empty remainder appears when the prefix itself is indexed; the
        caller decides whether that means "stop suggesting".
        """
        lo, hi = self._interval(prefix)
        if lo >= hi or k <= 0:
            return []
        window = self.counts[lo:hi]
        order = np.argsort(-window, kind="stable")[:k]
        depth = len(prefix)
        return [(self.strings[lo + int(i)][depth:], int(window[int(i)])) for i in order]

    def save(self, path: str) -> None:
        blob, offsets = encode_string_list(self.strings)
        meta = dict(self.meta)
        meta["max_len"] = self.max_len
        write_container(path, self.kind, meta, {"blob": blob, "offsets": offsets, "counts": self.counts})

    @classmethod
    def load(cls, path: str) -> "CharTrie":
        _, meta, sections = read_container(path, expect_kind=cls.kind)
        strings = decode_string_list(sections["blob"], sections["offsets"])
        max_len = meta.pop("max_len")
        return cls(strings, sections["counts"], max_len, meta)


class SuffixTrie(CharTrie):
    """Same layout, indexing word-aligned suffixes above a frequency floor."""

    kind = "suffix_trie"

    def __init__(self, strings, counts, max_len, min_freq: int = DEFAULT_MIN_FREQ, meta=None):
        super().__init__(strings, counts, max_len, meta)
        self.min_freq = min_freq

    def save(self, path: str) -> None:
        blob, offsets = encode_string_list(self.strings)
        meta = dict(self.meta)
        meta["max_len"] = self.max_len
        meta["min_freq"] = self.min_freq
        write_container(path, self.kind, meta, {"blob": blob, "offsets": offsets, "counts": self.counts})

    @classmethod
    def load(cls, path: str) -> "SuffixTrie":
        _, meta, sections = read_container(path, expect_kind=cls.kind)
        strings = decode_string_list(sections["blob"], sections["offsets"])
        return cls(strings, sections["counts"], meta.pop("max_len"), meta.pop("min_freq"), meta)


def build_char_trie(
    utterances: list[str], max_len: int = DEFAULT_MAX_LEN, meta: dict | None = None
) -> CharTrie:
    """Index every utterance (truncated to ``max_len``) with multiplicity."""
    tally: Counter[str] = Counter(u[:max_len] for u in utterances)
    items = sorted(tally.items())
    strings = [s for s, _ in items]
    counts = np.array([c for _, c in items], dtype=np.int64)
    return CharTrie(strings, counts, max_len, meta)


def build_suffix_trie(
    utterances: list[str],
    min_freq: int = DEFAULT_MIN_FREQ,
    max_len: int = DEFAULT_MAX_LEN,
    meta: dict | None = None,
) -> SuffixTrie:
    """Index word-aligned suffixes occurring at least ``min_freq`` times.

    Each utterance contributes one suffix per word start (the first being the
    utterance itself); counts accumulate across the whole corpus before the
    frequency floor is applied.
    """
    tally: Counter[str] = Counter()
    for utterance in utterances:
        for start in word_starts(utterance):
            tally[utterance[start:]] += 1
    kept: Counter[str] = Counter()
    for suffix, count in tally.items():
        if count >= min_freq:
            kept[suffix[:max_len]] += count
    items = sorted(kept.items())
    strings = [s for s, _ in items]
    counts = np.array([c for _, c in items], dtype=np.int64)
    return SuffixTrie(strings, counts, max_len, min_freq, meta)


def backoff_tails(prefix: str) -> list[str]:
    """Suffixes of ``prefix`` starting at each word, longest first.

    The full prefix is included (dropping zero words); whitespace-only
    prefixes produce nothing.
    """
    return [prefix[start:] for start in word_starts(prefix)]


def mpcpp_completions(
    char_trie: CharTrie, suffix_trie: SuffixTrie, prefix: str, k: int
) -> tuple[list[tuple[str, int]], str, str]:
    """Main-trie completions, falling back to suffix-tail matches.

    Returns ``(candidates, source, matched_key)`` where source distinguishes
    a direct hit from a backoff hit and ``matched_key`` is the string whose
    interval produced the candidates (needed for confidence normalisation).
    """
    direct = char_trie.top_completions(prefix, k)
    if direct:
        return direct, "MPC", prefix
    for tail in backoff_tails(prefix):
        cands = suffix_trie.top_completions(tail, k)
        if cands:
            return cands, "MPCPP", tail
    return [], "MPCPP", prefix
