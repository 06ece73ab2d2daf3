"""Backoff n-gram language model over subword tokens, with beam completion.

Counting, pruning, and interpolated absolute-discount estimation happen at
training time; querying composes a full next-token distribution from the
unigram base upward, one backoff level per context length.  The unigram
table covers text tokens only, so the end marker is predictable exactly
where it was observed with enough support; this keeps every composed
distribution summing to one by construction.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .container import decode_string_list, encode_string_list, read_container, write_container
from .evaluation import truncate_words
from .types import SOURCE_QB, Suggestion
from .vocab import EOS_ID, SubwordVocabulary, VocabularyError

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 8
DEFAULT_PRUNE = (0, 1, 1, 2, 2, 3, 3, 4)
DEFAULT_DISCOUNT = 0.75
DEFAULT_BEAM_WIDTH = 10
DEFAULT_MAX_CHARS = 256

#: Hypotheses that have not covered the typed word fragment after this many
#: tokens are dropped; if none survive, the model abstains.
FRAGMENT_TOKEN_BUDGET = 3


@dataclass
class StopPolicy:
    """Early-stopping rule for generation; exactly one kind per call."""

    kind: str = "none"  # none | max_words | entropy
    t: int = 3
    threshold: float = 0.6

    def __post_init__(self) -> None:
        if self.kind not in ("none", "max_words", "entropy"):
            raise ValueError(f"unknown stop policy kind {self.kind!r}")
        if self.kind == "max_words" and not 1 <= self.t <= 10:
            raise ValueError("word budget must be in 1..10")
        if self.kind == "entropy" and self.threshold <= 0:
            raise ValueError("entropy threshold must be positive")


def entropy(distribution: np.ndarray) -> float:
    """Shannon entropy in nats, 0·ln 0 := 0."""
    p = distribution[distribution > 0.0]
    return float(-np.dot(p, np.log(p)))


class NGramModel:
    """Immutable pruned backoff model; concurrent queries are safe."""

    kind = "ngram"

    def __init__(
        self,
        vocab: SubwordVocabulary,
        order: int,
        unigram: np.ndarray,
        tables: list[dict],
        prune_thresholds: tuple[int, ...],
        discount: float,
        meta: dict | None = None,
    ):
        self.vocab = vocab
        self.order = order
        self.unigram = np.ascontiguousarray(unigram, dtype=np.float64)
        self.tables = tables
        self.prune_thresholds = tuple(prune_thresholds)
        self.discount = discount
        self.meta = dict(meta or {})
        # Confidence is NLL normalized by token count; recorded so readers of
        # the model file know which convention scores were produced under.
        self.meta.setdefault("score_norm", "tokens")

    def _context_levels(self, context: tuple[int, ...]) -> list:
        levels = []
        for k in range(2, self.order + 1):
            if len(context) < k - 1:
                break
            entry = self.tables[k].get(context[len(context) - k + 1 :])
            if entry is not None:
                levels.append(entry)
        return levels

    def next_token_distribution(self, context_ids) -> np.ndarray:
        """Full distribution over the vocabulary (end marker at id 0)."""
        context = tuple(context_ids)[-(self.order - 1) :] if self.order > 1 else ()
        return _kernels.fill_distribution(self.unigram, self._context_levels(context))

    def prob(self, context_ids, token_id: int) -> float:
        """Pointwise P(token | context); equals the distribution entry."""
        context = tuple(context_ids)[-(self.order - 1) :] if self.order > 1 else ()
        p = float(self.unigram[token_id])
        for ids, probs, bow in self._context_levels(context):
            j = int(np.searchsorted(ids, token_id))
            if j < len(ids) and int(ids[j]) == token_id:
                p = float(probs[j])
            else:
                p = bow * p
        return p

    def sequence_nll(self, text: str) -> tuple[float, int]:
        """Total −ln P over the encoded utterance plus its end marker."""
        ids = self.vocab.encode(text)
        ids.append(EOS_ID)
        total = 0.0
        for pos, tid in enumerate(ids):
            p = self.prob(tuple(ids[max(0, pos - self.order + 1) : pos]), tid)
            if p <= 0.0:
                return math.inf, len(ids)
            total -= math.log(p)
        return total, len(ids)

    def perplexity(self, utterances: list[str]) -> float:
        total, n = 0.0, 0
        for utterance in utterances:
            nll, count = self.sequence_nll(utterance)
            total += nll
            n += count
        if n == 0:
            raise ValueError("no tokens to score")
        return math.exp(total / n)

    def save(self, path: str) -> None:
        blob, offsets = encode_string_list(self.vocab.tokens)
        meta = dict(self.meta)
        meta.update(
            order=self.order,
            prune_thresholds=list(self.prune_thresholds),
            discount=self.discount,
        )
        sections: dict = {
            "tokens_blob": blob,
            "tokens_off": offsets,
            "unigram": self.unigram,
        }
        for k in range(2, self.order + 1):
            contexts = sorted(self.tables[k])
            ctx_flat = np.array(
                [tid for ctx in contexts for tid in ctx], dtype=np.int32
            ).reshape(-1)
            n_targets = np.array(
                [len(self.tables[k][ctx][0]) for ctx in contexts], dtype=np.int32
            )
            tids = (
                np.concatenate([self.tables[k][ctx][0] for ctx in contexts])
                if contexts
                else np.empty(0, dtype=np.int32)
            )
            probs = (
                np.concatenate([self.tables[k][ctx][1] for ctx in contexts])
                if contexts
                else np.empty(0)
            )
            bows = np.array([self.tables[k][ctx][2] for ctx in contexts])
            sections[f"ctx{k}"] = ctx_flat
            sections[f"nt{k}"] = n_targets
            sections[f"tid{k}"] = tids
            sections[f"tp{k}"] = probs
            sections[f"bow{k}"] = bows
        write_container(path, self.kind, meta, sections)

    @classmethod
    def load(cls, path: str) -> "NGramModel":
        _, meta, sections = read_container(path, expect_kind=cls.kind)
        tokens = decode_string_list(sections["tokens_blob"], sections["tokens_off"])
        vocab = SubwordVocabulary(tokens[1:])
        order = meta.pop("order")
        prune = tuple(meta.pop("prune_thresholds"))
        discount = meta.pop("discount")
        tables: list[dict] = [{} for _ in range(order + 1)]
        for k in range(2, order + 1):
            ctx_flat = sections[f"ctx{k}"]
            n_targets = sections[f"nt{k}"]
            tids = np.ascontiguousarray(sections[f"tid{k}"], dtype=np.int32)
            probs = np.ascontiguousarray(sections[f"tp{k}"], dtype=np.float64)
            bows = sections[f"bow{k}"]
            n_ctx = len(n_targets)
            pos = 0
            for i in range(n_ctx):
                ctx = tuple(int(t) for t in ctx_flat[i * (k - 1) : (i + 1) * (k - 1)])
                nt = int(n_targets[i])
                tables[k][ctx] = (
                    tids[pos : pos + nt],
                    probs[pos : pos + nt],
                    float(bows[i]),
                )
                pos += nt
        return cls(vocab, order, sections["unigram"], tables, prune, discount, meta)


def train_ngram(
    vocab: SubwordVocabulary,
    utterances: list[str],
    order: int = DEFAULT_ORDER,
    prune_thresholds=DEFAULT_PRUNE,
    discount: float = DEFAULT_DISCOUNT,
    meta: dict | None = None,
) -> NGramModel:
    """Count, prune, and estimate the interpolated absolute-discount model.

    Order-i entries with count ≤ prune_thresholds[i-1] are dropped before
    estimation, so denominators reflect what the model actually stores and
    every stored context's distribution sums to one exactly.
    """
    if not utterances:
        raise ValueError("cannot train on an empty corpus")
    if order < 1:
        raise ValueError("order must be at least 1")
    prune_thresholds = tuple(prune_thresholds)
    if len(prune_thresholds) != order:
        raise ValueError(f"need {order} pruning thresholds, got {len(prune_thresholds)}")
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")

    counts: list[Counter] = [Counter() for _ in range(order + 1)]
    weighted = Counter(utterances)
    for text, w in sorted(weighted.items()):
        ids = vocab.encode(text)
        ids.append(EOS_ID)
        n = len(ids)
        for pos in range(n):
            if ids[pos] != EOS_ID:
                counts[1][(ids[pos],)] += w
            for k in range(2, order + 1):
                if pos - k + 1 < 0:
                    break
                counts[k][tuple(ids[pos - k + 1 : pos + 1])] += w

    unigram = np.zeros(vocab.size, dtype=np.float64)
    kept_uni = {t: c for t, c in counts[1].items() if c > prune_thresholds[0]}
    total = sum(kept_uni.values())
    if total == 0:
        raise ValueError("no unigrams survive pruning")
    for (tid,), c in kept_uni.items():
        unigram[tid] = c / total

    tables: list[dict] = [{} for _ in range(order + 1)]
    model = NGramModel(vocab, order, unigram, tables, prune_thresholds, discount, meta)
    for k in range(2, order + 1):
        grouped: dict[tuple, list[tuple[int, int]]] = {}
        threshold = prune_thresholds[k - 1]
        for gram, c in counts[k].items():
            if c > threshold:
                grouped.setdefault(gram[:-1], []).append((gram[-1], c))
        for ctx in sorted(grouped):
            targets = sorted(grouped[ctx])
            c_total = sum(c for _, c in targets)
            bow = discount * len(targets) / c_total
            ids = np.array([t for t, _ in targets], dtype=np.int32)
            probs = np.empty(len(targets), dtype=np.float64)
            for j, (tid, c) in enumerate(targets):
                lower = model.prob(ctx[1:], tid)
                probs[j] = (c - discount) / c_total + bow * lower
            tables[k][ctx] = (ids, probs, float(bow))
    logger.info(
        "trained order-%d model: %s contexts per order",
        order,
        [len(tables[k]) for k in range(2, order + 1)],
    )
    return model


@dataclass
class BeamState:
    """One hypothesis: emitted tokens, their surface, and accumulated NLL.

    ``surface`` covers the typed word fragment first; only characters beyond
    it are suggestion text.
    """

    token_history: tuple[int, ...]
    surface: str
    cum_nll: float
    finished: bool = False
    stop_reason: str = ""


def split_prefix(prefix: str) -> tuple[str, str]:
    """Split at the last whitespace: (encodable body, dangling fragment)."""
    for i in reversed(range(len(prefix))):
        if prefix[i].isspace():
            return prefix[: i + 1], prefix[i + 1 :]
    return "", prefix


def _abstention(reason: str) -> Suggestion:
    return Suggestion("", 0.0, SOURCE_QB, {"reason": reason})


def qb_topk(
    model: NGramModel,
    prefix: str,
    k: int = 1,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    stop: StopPolicy | None = None,
    max_chars: int = DEFAULT_MAX_CHARS,
    max_tokens: int | None = None,
) -> list[Suggestion]:
    """Beam-search completions of ``prefix``, best first.

    The prefix body (through the last whitespace) becomes model context; the
    dangling fragment constrains admissible tokens character-by-character
    until it is covered.  A hypothesis finishes on the end marker, on the
    char/token budget, or when the stop policy fires; the finished pool is
    never pruned.  Scores are −(cum_nll / token_count), higher is better.
    """
    if not prefix:
        raise ValueError("prefix must be non-empty")
    stop = stop or StopPolicy()
    vocab = model.vocab
    body, fragment = split_prefix(prefix)
    try:
        body_ids = vocab.encode(body)
    except VocabularyError as exc:
        return [_abstention(str(exc))]

    ctx_len = model.order - 1
    # Hypotheses agreeing on (context tail, token count, surface length) have
    # identical futures, so only the cheapest needs to live on.  Word-budget
    # stopping depends on surface content, which breaks that equivalence.
    dedup = stop.kind != "max_words"
    live: list[BeamState] = [BeamState((), "", 0.0)]
    finished: list[BeamState] = []
    guard = max_tokens if max_tokens is not None else max_chars + FRAGMENT_TOKEN_BUDGET + 1

    for _ in range(guard):
        if not live:
            break
        proposals: dict = {}
        serial = 0
        for st in live:
            context = tuple(body_ids) + st.token_history
            dist = model.next_token_distribution(context)
            if stop.kind == "entropy" and entropy(dist) > stop.threshold:
                # A halted hypothesis is only showable once the typed
                # fragment is covered; otherwise it never produced text.
                if len(st.surface) >= len(fragment):
                    finished.append(
                        BeamState(st.token_history, st.surface, st.cum_nll, True, "entropy")
                    )
                continue
            pending = fragment[len(st.surface) :]
            allowed = vocab.tokens_consistent_with(pending)
            if allowed is None:
                # Only the state's best `beam_width` successors can matter;
                # the end marker rides along because it finishes hypotheses
                # rather than competing for a live slot.
                if len(dist) > beam_width:
                    cand = np.argpartition(-dist, beam_width)[:beam_width].tolist()
                    if EOS_ID not in cand:
                        cand.append(EOS_ID)
                    cand = [t for t in cand if dist[t] > 0.0]
                else:
                    cand = np.nonzero(dist > 0.0)[0].tolist()
            else:
                cand = [t for t in allowed if dist[t] > 0.0]
            for tid in cand:
                nll = st.cum_nll - math.log(float(dist[tid]))
                hist = st.token_history + (int(tid),)
                if tid == EOS_ID:
                    finished.append(BeamState(hist, st.surface, nll, True, "eos"))
                    continue
                surface = st.surface + vocab.tokens[tid]
                if len(surface) < len(fragment):
                    if len(hist) >= FRAGMENT_TOKEN_BUDGET:
                        continue
                    text = ""
                else:
                    text = surface[len(fragment) :]
                if max_tokens is not None and len(hist) >= max_tokens:
                    if len(surface) >= len(fragment):
                        finished.append(BeamState(hist, surface, nll, True, "max_tokens"))
                    continue
                if stop.kind == "max_words" and text:
                    cut = truncate_words(text, stop.t)
                    if cut != text:
                        finished.append(
                            BeamState(hist, fragment + cut, nll, True, "max_words")
                        )
                        continue
                if len(text) >= max_chars:
                    finished.append(
                        BeamState(hist, fragment + text[:max_chars], nll, True, "max_chars")
                    )
                    continue
                if dedup:
                    tail = (tuple(body_ids) + hist)[-ctx_len:] if ctx_len else ()
                    key = (tail, len(hist), len(surface))
                else:
                    key = serial
                    serial += 1
                prev = proposals.get(key)
                if prev is None or (nll, surface) < (prev.cum_nll, prev.surface):
                    proposals[key] = BeamState(hist, surface, nll)
        live = sorted(proposals.values(), key=lambda s: (s.cum_nll, s.surface))[:beam_width]
        if max_tokens is not None and finished:
            best = max(
                -(s.cum_nll / len(s.token_history))
                for s in finished
                if s.token_history
            )
            # An unfinished hypothesis can never beat `best` if even a free
            # ride to the full token budget leaves it behind.
            live = [s for s in live if -(s.cum_nll / max_tokens) >= best]

    by_text: dict[str, tuple[float, BeamState]] = {}
    for s in finished:
        if not s.token_history:
            continue
        text = s.surface[len(fragment) :] if len(s.surface) >= len(fragment) else ""
        score = -(s.cum_nll / len(s.token_history))
        cur = by_text.get(text)
        if cur is None or score > cur[0]:
            by_text[text] = (score, s)
    ranked = sorted(by_text.items(), key=lambda kv: (-kv[1][0], kv[0]))
    out = [
        Suggestion(
            text,
            score,
            SOURCE_QB,
            {"tokens": len(s.token_history), "nll": s.cum_nll, "stop": s.stop_reason},
        )
        for text, (score, s) in ranked[:k]
    ]
    if not out:
        return [_abstention("no admissible hypothesis")]
    return out


def qb_suggest(
    model: NGramModel,
    prefix: str,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    stop: StopPolicy | None = None,
    max_chars: int = DEFAULT_MAX_CHARS,
    max_tokens: int | None = None,
) -> Suggestion:
    """Single best completion (or an abstention) for the prefix."""
    return qb_topk(
        model, prefix, k=1, beam_width=beam_width, stop=stop,
        max_chars=max_chars, max_tokens=max_tokens,
    )[0]
