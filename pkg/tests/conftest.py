"""Shared fixtures: small corpora and pre-trained models reused across files."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpusgen import make_corpus_file, make_utterances, write_jsonl

from ghostline.ngram import train_ngram
from ghostline.vocab import SubwordVocabulary, learn_vocabulary


@pytest.fixture(scope="session")
def template_corpus_path(tmp_path_factory) -> Path:
    """The classic one-liner corpus: 'how are you' a hundred times."""
    path = tmp_path_factory.mktemp("corpora") / "template.jsonl"
    dialogs = [
        {
            "dialog_id": f"d{i}",
            "turns": [
                {"speaker": "bot", "text": "hello"},
                {"speaker": "human", "text": "how are you"},
            ],
        }
        for i in range(100)
    ]
    return write_jsonl(path, dialogs)


@pytest.fixture(scope="session")
def medium_corpus_path(tmp_path_factory) -> Path:
    """Five thousand utterances with Zipf-style template repetition."""
    path = tmp_path_factory.mktemp("corpora") / "medium.jsonl"
    return make_corpus_file(path, 5000, seed=11)


@pytest.fixture(scope="session")
def medium_model():
    """Subword n-gram model trained on the medium corpus texts."""
    utterances = make_utterances(5000, seed=11)
    vocab = learn_vocabulary(utterances, target_size=256)
    return train_ngram(vocab, utterances, order=3, prune_thresholds=(0, 1, 1))


@pytest.fixture()
def char_vocab() -> SubwordVocabulary:
    """Character-level vocabulary over a tiny alphabet, no merges."""
    return SubwordVocabulary(list("abcd "))
