"""The shared suggestion core behind the CLI and the HTTP service.

Everything that answers "what should the ghost text be for this prefix"
funnels through :meth:`GhostEngine.suggest`, so the three entry points
cannot drift apart.
"""

from __future__ import annotations

import logging

from .container import ContainerFormatError, read_container
from .ngram import NGramModel, StopPolicy, qb_topk
from .rerank import RerankConfig, TfIdfModel, rerank
from .trie import CharTrie, SuffixTrie, backoff_tails
from .types import SOURCE_MPC, SOURCE_MPCPP, SOURCE_QB, SOURCE_RERANKED, Suggestion

logger = logging.getLogger(__name__)

_LOADERS = {
    CharTrie.kind: ("char_trie", CharTrie.load),
    SuffixTrie.kind: ("suffix_trie", SuffixTrie.load),
    NGramModel.kind: ("ngram", NGramModel.load),
    TfIdfModel.kind: ("tfidf", TfIdfModel.load),
}


def mpc_confidence(frequency: int, sibling_total: int) -> float:
    """Relative frequency of a completion under its prefix node, in (0, 1]."""
    if not 1 <= frequency <= sibling_total:
        raise ValueError("frequency must lie in [1, sibling_total]")
    return frequency / sibling_total


class GhostEngine:
    def __init__(
        self,
        char_trie: CharTrie | None = None,
        suffix_trie: SuffixTrie | None = None,
        ngram: NGramModel | None = None,
        tfidf: TfIdfModel | None = None,
    ):
        self.char_trie = char_trie
        self.suffix_trie = suffix_trie
        self.ngram = ngram
        self.tfidf = tfidf

    @classmethod
    def load(cls, index_paths: list[str]) -> "GhostEngine":
        """Load any mix of index files, routing each by its kind tag."""
        engine = cls()
        for path in index_paths:
            kind, _, _ = read_container(path)
            if kind not in _LOADERS:
                raise ContainerFormatError(f"{path}: unknown index kind {kind!r}")
            attr, loader = _LOADERS[kind]
            setattr(engine, attr, loader(path))
            logger.info("loaded %s index from %s", kind, path)
        return engine

    def fingerprints(self) -> dict[str, str]:
        """Corpus fingerprint recorded in each loaded artifact."""
        out = {}
        for name in ("char_trie", "suffix_trie", "ngram", "tfidf"):
            artifact = getattr(self, name)
            if artifact is not None and "corpus_fingerprint" in artifact.meta:
                out[name] = artifact.meta["corpus_fingerprint"]
        return out

    def models(self) -> list[str]:
        available = []
        if self.char_trie is not None:
            available.append("mpc")
        if self.char_trie is not None and self.suffix_trie is not None:
            available.append("mpcpp")
        if self.ngram is not None:
            available.append("qb")
        return available

    def inventory(self) -> list[dict]:
        out = []
        for name in ("char_trie", "suffix_trie", "ngram", "tfidf"):
            artifact = getattr(self, name)
            if artifact is not None:
                out.append({"name": name, "kind": artifact.kind, "meta": dict(artifact.meta)})
        return out

    def _require(self, attr: str, model: str):
        artifact = getattr(self, attr)
        if artifact is None:
            raise ValueError(f"model {model!r} needs a loaded {attr} index")
        return artifact

    def candidates(
        self,
        prefix: str,
        model: str = "mpc",
        k: int = 10,
        stop: StopPolicy | None = None,
        beam_width: int | None = None,
    ) -> tuple[list[tuple[str, float]], str]:
        """Top-k (text, confidence) candidates and the source label."""
        if model == "mpc":
            trie = self._require("char_trie", model)
            total = trie.prefix_count(prefix)
            cands = trie.top_completions(prefix, k)
            return [(text, mpc_confidence(f, total)) for text, f in cands], SOURCE_MPC
        if model == "mpcpp":
            main = self._require("char_trie", model)
            suffixes = self._require("suffix_trie", model)
            direct = main.top_completions(prefix, k)
            if direct:
                total = main.prefix_count(prefix)
                return [(t, mpc_confidence(f, total)) for t, f in direct], SOURCE_MPCPP
            for tail in backoff_tails(prefix):
                cands = suffixes.top_completions(tail, k)
                if cands:
                    total = suffixes.prefix_count(tail)
                    return [(t, mpc_confidence(f, total)) for t, f in cands], SOURCE_MPCPP
            return [], SOURCE_MPCPP
        if model == "qb":
            ngram = self._require("ngram", model)
            kwargs = {} if beam_width is None else {"beam_width": beam_width}
            suggestions = qb_topk(ngram, prefix, k=k, stop=stop, **kwargs)
            return [(s.text, s.score) for s in suggestions if not s.is_abstention], SOURCE_QB
        raise ValueError(f"unknown model {model!r}")

    def suggest(
        self,
        prefix: str,
        context: tuple[str, ...] = (),
        model: str = "mpc",
        use_rerank: bool = False,
        stop: StopPolicy | None = None,
        min_confidence: float | None = None,
        rerank_cfg: RerankConfig | None = None,
        beam_width: int | None = None,
    ) -> Suggestion:
        """The single ghost suggestion for a prefix; empty text = abstain."""
        cfg = rerank_cfg or RerankConfig()
        k = cfg.k if use_rerank else 1
        cands, source = self.candidates(
            prefix, model=model, k=k, stop=stop, beam_width=beam_width
        )
        if not cands:
            return Suggestion("", 0.0, source, {"reason": "no candidates"})
        if use_rerank:
            if self.tfidf is None:
                raise ValueError("reranking needs a loaded tfidf index")
            reranked = rerank(cands, prefix, tuple(context), self.tfidf, cfg)
            text, score = reranked[0]
            suggestion = Suggestion(text, score, SOURCE_RERANKED, {"base": source})
        else:
            text, score = cands[0]
            suggestion = Suggestion(text, score, source)
        if not suggestion.text:
            return Suggestion("", 0.0, suggestion.source, {"reason": "empty completion"})
        if min_confidence is not None and suggestion.score < min_confidence:
            return Suggestion(
                "", 0.0, suggestion.source, {"reason": "below min_confidence"}
            )
        return suggestion
