"""Subword vocabulary: pair-merge learning and longest-prefix-match encoding.

Merges never cross whitespace, so pieces are word fragments (or whole words)
and whitespace characters stay single-character tokens.  Every character seen
in training is itself a token, which makes encoding total over training text.
"""

from __future__ import annotations

import heapq
import logging
from collections import Counter

logger = logging.getLogger(__name__)

#: Reserved end-of-utterance id; its surface is the empty string.
EOS_ID = 0

DEFAULT_TARGET_SIZE = 4096


class VocabularyError(ValueError):
    """Raised for unlearnable corpora and unencodable text."""


class SubwordVocabulary:
    """Token inventory with id 0 reserved for the end-of-utterance marker.

    ``target_size`` at learning time counts text tokens only; the end marker
    is an extra reserved slot, so ``size == len(pieces) + 1``.
    """

    def __init__(self, pieces: list[str]):
        self.tokens = [""] + list(pieces)
        self.token_ids = {piece: i + 1 for i, piece in enumerate(pieces)}
        if len(self.token_ids) != len(pieces):
            raise VocabularyError("duplicate token surfaces")
        if any(not piece for piece in pieces):
            raise VocabularyError("empty token surface outside the reserved slot")
        self.max_piece_len = max((len(p) for p in pieces), default=0)
        self._consistent_cache: dict[str, tuple[int, ...]] = {}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        """Greedy longest-prefix-match segmentation.

        Total on any string over the training alphabet; an unknown character
        raises, naming the character and its offset.
        """
        ids: list[int] = []
        i, n = 0, len(text)
        while i < n:
            m = min(self.max_piece_len, n - i)
            while m > 1 and text[i : i + m] not in self.token_ids:
                m -= 1
            tid = self.token_ids.get(text[i : i + m])
            if tid is None:
                raise VocabularyError(
                    f"character {text[i]!r} at offset {i} is not in the vocabulary"
                )
            ids.append(tid)
            i += m
        return ids

    def decode(self, ids: list[int]) -> str:
        return "".join(self.tokens[t] for t in ids)

    def tokens_consistent_with(self, pending: str) -> tuple[int, ...] | None:
        """Text-token ids whose surface can extend a partially typed word.

        A piece is consistent when one of piece/pending is a prefix of the
        other.  ``None`` means no constraint (empty pending); the end marker
        is never consistent with unconsumed characters.
        """
        if not pending:
            return None
        cached = self._consistent_cache.get(pending)
        if cached is None:
            cached = tuple(
                tid
                for tid in range(1, len(self.tokens))
                if (
                    pending.startswith(self.tokens[tid])
                    if len(self.tokens[tid]) <= len(pending)
                    else self.tokens[tid].startswith(pending)
                )
            )
            self._consistent_cache[pending] = cached
        return cached


def _mergeable(left: str, right: str) -> bool:
    return not any(ch.isspace() for ch in left) and not any(ch.isspace() for ch in right)


def _merge_in_seq(seq: list[str], left: str, right: str, merged: str) -> list[str]:
    out: list[str] = []
    i, n = 0, len(seq)
    while i < n:
        if i < n - 1 and seq[i] == left and seq[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def learn_vocabulary(utterances: list[str], target_size: int = DEFAULT_TARGET_SIZE) -> SubwordVocabulary:
    """Iterative most-frequent-pair merging, weighted by utterance multiplicity.

    Stops at ``target_size`` text tokens or when no within-word pair occurs
    at least twice.  Ties break on higher count first, then lexicographically
    smaller pair, so the merge sequence is deterministic.
    """
    if not utterances:
        raise VocabularyError("cannot learn a vocabulary from an empty corpus")
    weighted = Counter(utterances)
    seqs: list[list[str]] = []
    weights: list[int] = []
    for text, w in sorted(weighted.items()):
        seqs.append(list(text))
        weights.append(w)
    alphabet = sorted({ch for seq in seqs for ch in seq})
    if not alphabet:
        raise VocabularyError("corpus has no characters")
    if target_size < len(alphabet):
        raise VocabularyError(
            f"target_size {target_size} is below the corpus alphabet size {len(alphabet)}"
        )
    pieces = list(alphabet)
    known = set(pieces)

    pair_counts: Counter = Counter()
    pair_seqs: dict[tuple[str, str], set[int]] = {}
    for idx, (seq, w) in enumerate(zip(seqs, weights)):
        for pair in zip(seq, seq[1:]):
            if _mergeable(*pair):
                pair_counts[pair] += w
                pair_seqs.setdefault(pair, set()).add(idx)

    # Lazy max-heap: stale entries (count changed since push) are skipped on
    # pop, so the first entry matching its live count is the true maximum.
    heap = [(-count, pair) for pair, count in pair_counts.items()]
    heapq.heapify(heap)

    def bump(pair: tuple[str, str], delta: int, idx: int | None = None) -> None:
        count = pair_counts[pair] + delta
        if count <= 0:
            pair_counts.pop(pair, None)
            return
        pair_counts[pair] = count
        if idx is not None:
            pair_seqs.setdefault(pair, set()).add(idx)
        heapq.heappush(heap, (-count, pair))

    while len(pieces) < target_size and heap:
        neg, pair = heapq.heappop(heap)
        count = pair_counts.get(pair)
        if count is None or count != -neg:
            continue
        if count < 2:
            break
        left, right = pair
        merged = left + right
        if merged not in known:
            pieces.append(merged)
            known.add(merged)
        for idx in sorted(pair_seqs.get(pair, ())):
            seq = seqs[idx]
            w = weights[idx]
            new_seq = _merge_in_seq(seq, left, right, merged)
            if len(new_seq) == len(seq):
                continue
            old_pairs = Counter(p for p in zip(seq, seq[1:]) if _mergeable(*p))
            new_pairs = Counter(p for p in zip(new_seq, new_seq[1:]) if _mergeable(*p))
            seqs[idx] = new_seq
            for p, c in (old_pairs - new_pairs).items():
                bump(p, -c * w)
            for p, c in (new_pairs - old_pairs).items():
                bump(p, c * w, idx)

    logger.info("learned %d text tokens (%d-character alphabet)", len(pieces), len(alphabet))
    return SubwordVocabulary(pieces)
