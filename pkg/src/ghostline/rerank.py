"""Context-aware candidate reranking: TF-IDF cosine plus a length penalty.

The combined score is alpha * scaled model score + beta * cosine similarity
+ gamma * scaled length penalty.  Cosine enters unscaled; the other two are
min-max scaled to [-1, 1] within the candidate set, since that is the only
population they are ever compared against.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .container import decode_string_list, encode_string_list, read_container, write_container

logger = logging.getLogger(__name__)

#: Maximal alphanumeric runs of the lowercased text (underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class RerankConfig:
    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    k: int = 10

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("rerank weights must be non-negative")


class TfIdfModel:
    """Fitted idf table; transform yields L2-normalized sparse vectors."""

    kind = "tfidf"

    def __init__(self, vocabulary: dict[str, int], idf: np.ndarray, n_docs: int, meta: dict | None = None):
        self.vocabulary = vocabulary
        self.idf = np.asarray(idf, dtype=np.float64)
        self.n_docs = n_docs
        self.meta = dict(meta or {})

    def transform(self, text: str) -> dict[int, float]:
        """Sparse tf-idf vector; terms outside the vocabulary contribute 0."""
        counts = Counter(
            self.vocabulary[term] for term in tokenize(text) if term in self.vocabulary
        )
        if not counts:
            return {}
        vec = {i: tf * self.idf[i] for i, tf in counts.items()}
        norm = math.sqrt(sum(v * v for v in vec.values()))
        return {i: v / norm for i, v in vec.items()}

    def save(self, path: str) -> None:
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        blob, offsets = encode_string_list(terms)
        meta = dict(self.meta)
        meta["n_docs"] = self.n_docs
        write_container(path, self.kind, meta, {"terms_blob": blob, "terms_off": offsets, "idf": self.idf})

    @classmethod
    def load(cls, path: str) -> "TfIdfModel":
        _, meta, sections = read_container(path, expect_kind=cls.kind)
        terms = decode_string_list(sections["terms_blob"], sections["terms_off"])
        vocabulary = {term: i for i, term in enumerate(terms)}
        return cls(vocabulary, sections["idf"], meta.pop("n_docs"), meta)


def fit_tfidf(train_texts: list[str], meta: dict | None = None) -> TfIdfModel:
    """idf(term) = ln((1 + N) / (1 + df)) + 1 over the training documents."""
    if not train_texts:
        raise ValueError("cannot fit tf-idf on an empty corpus")
    df: Counter = Counter()
    for text in train_texts:
        df.update(set(tokenize(text)))
    terms = sorted(df)
    n = len(train_texts)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
    return TfIdfModel({t: i for i, t in enumerate(terms)}, idf, n, meta)


def cosine(a: dict[int, float], b: dict[int, float]) -> float:
    """Dot product of L2-normalized sparse vectors; zero vectors give 0."""
    if len(a) > len(b):
        a, b = b, a
    return sum(v * b[i] for i, v in a.items() if i in b)


def length_penalty(completion_len_chars: int) -> float:
    return 1.0 / (1.0 + completion_len_chars)


def scale_to_unit_interval(values: list[float]) -> list[float]:
    """Min-max map onto [-1, 1]; a constant list maps to all zeros."""
    if not values:
        raise ValueError("cannot scale an empty list")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [2.0 * (v - lo) / (hi - lo) - 1.0 for v in values]


def rerank(
    candidates: list[tuple[str, float]],
    prefix: str,
    context: tuple[str, ...],
    tfidf: TfIdfModel,
    cfg: RerankConfig | None = None,
) -> list[tuple[str, float]]:
    """Reorder candidates by the combined context-aware score.

    Original model rank is derived by (score desc, text asc), making the
    result independent of input permutation; combined-score ties resolve
    back to that original rank.
    """
    cfg = cfg or RerankConfig()
    if not candidates:
        return []
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][1], candidates[i][0]))
    ranked = [candidates[i] for i in order]
    context_vec = tfidf.transform(" ".join(context))
    cos = [cosine(tfidf.transform(prefix + text), context_vec) for text, _ in ranked]
    scaled_scores = scale_to_unit_interval([score for _, score in ranked])
    scaled_penalties = scale_to_unit_interval([length_penalty(len(text)) for text, _ in ranked])
    combined = [
        cfg.alpha * scaled_scores[i] + cfg.beta * cos[i] + cfg.gamma * scaled_penalties[i]
        for i in range(len(ranked))
    ]
    final = sorted(range(len(ranked)), key=lambda i: (-combined[i], i))
    return [(ranked[i][0], combined[i]) for i in final]
