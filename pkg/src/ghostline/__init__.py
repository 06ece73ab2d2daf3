"""Inline chat ghost-text engine.

Builds trie and subword n-gram completion models from dialog corpora,
serves single ghost suggestions with optional context reranking and
entropy-based early stopping, and evaluates them with prefix-match metrics.
"""

__version__ = "0.1.0"
