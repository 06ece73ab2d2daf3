"""N-gram counting, smoothing, and entropy against hand-rolled oracles."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostline.ngram import NGramModel, StopPolicy, entropy, train_ngram
from ghostline.vocab import EOS_ID, SubwordVocabulary


def count_grams(vocab, utterances, order):
    """Sliding-window n-gram counts: end marker appended, no start padding."""
    counts = [Counter() for _ in range(order + 1)]
    for text in utterances:
        ids = vocab.encode(text)
        ids.append(EOS_ID)
        for pos in range(len(ids)):
            if ids[pos] != EOS_ID:
                counts[1][(ids[pos],)] += 1
            for k in range(2, order + 1):
                if pos - k + 1 < 0:
                    break
                counts[k][tuple(ids[pos - k + 1 : pos + 1])] += 1
    return counts


def oracle_prob(counts, prune, discount, order, context, token_id):
    """Recursive interpolated absolute discounting over pruned counts."""
    kept1 = {g[0]: c for g, c in counts[1].items() if c > prune[0]}
    total = sum(kept1.values())

    def p(ctx, tid):
        if not ctx:
            return kept1.get(tid, 0) / total
        k = len(ctx) + 1
        targets = {
            g[-1]: c
            for g, c in counts[k].items()
            if g[:-1] == ctx and c > prune[k - 1]
        }
        if not targets:
            return p(ctx[1:], tid)
        c_total = sum(targets.values())
        bow = discount * len(targets) / c_total
        base = (targets[tid] - discount) / c_total if tid in targets else 0.0
        return base + bow * p(ctx[1:], tid)

    ctx = tuple(context)[-(order - 1) :] if order > 1 else ()
    return p(ctx, token_id)


def oracle_nll(vocab, counts, prune, discount, order, text):
    ids = vocab.encode(text)
    ids.append(EOS_ID)
    total = 0.0
    for pos, tid in enumerate(ids):
        ctx = tuple(ids[max(0, pos - order + 1) : pos])
        p = oracle_prob(counts, prune, discount, order, ctx, tid)
        if p <= 0.0:
            return math.inf, len(ids)
        total -= math.log(p)
    return total, len(ids)


TOY_CORPUS = [
    "a bad cab",
    "a bad cab",
    "a dab",
    "bad cad",
    "cab a dab",
    "a bad dab",
]


@pytest.fixture()
def toy_model(char_vocab):
    return train_ngram(char_vocab, TOY_CORPUS, order=3, prune_thresholds=(0, 0, 1))


class TestUnigram:
    def test_relative_frequency(self, char_vocab):
        model = train_ngram(char_vocab, ["aaab"], order=1, prune_thresholds=(0,))
        a = char_vocab.token_ids["a"]
        b = char_vocab.token_ids["b"]
        assert model.unigram[a] == 0.75
        assert model.unigram[b] == 0.25

    def test_end_marker_gets_no_unigram_mass(self, toy_model):
        assert toy_model.unigram[EOS_ID] == 0.0

    def test_unigram_sums_to_one(self, toy_model):
        assert abs(toy_model.unigram.sum() - 1.0) < 1e-12


class TestBackoffProbabilities:
    def test_matches_recursive_oracle(self, char_vocab, toy_model):
        counts = count_grams(char_vocab, TOY_CORPUS, 3)
        rng = np.random.default_rng(3)
        ids = list(range(char_vocab.size))
        for _ in range(300):
            ctx = tuple(rng.choice(ids, size=rng.integers(0, 4)).tolist())
            tid = int(rng.choice(ids))
            want = oracle_prob(counts, (0, 0, 1), 0.75, 3, ctx, tid)
            assert toy_model.prob(ctx, tid) == pytest.approx(want, abs=1e-12)

    def test_prob_equals_distribution_entry_bitwise(self, char_vocab, toy_model):
        rng = np.random.default_rng(4)
        ids = list(range(char_vocab.size))
        for _ in range(100):
            ctx = tuple(rng.choice(ids, size=rng.integers(0, 4)).tolist())
            dist = toy_model.next_token_distribution(ctx)
            for tid in ids:
                assert toy_model.prob(ctx, tid) == dist[tid]

    def test_every_distribution_normalizes(self, char_vocab, toy_model):
        ids = list(range(char_vocab.size))
        rng = np.random.default_rng(5)
        for _ in range(200):
            ctx = tuple(rng.choice(ids, size=rng.integers(0, 5)).tolist())
            assert abs(toy_model.next_token_distribution(ctx).sum() - 1.0) < 1e-9

    def test_unseen_context_backs_off_to_unigram(self, toy_model):
        # Nothing ever follows the end marker, so neither the (EOS,) bigram
        # context nor any trigram context ending in it is stored.
        dist = toy_model.next_token_distribution((EOS_ID, EOS_ID))
        np.testing.assert_array_equal(dist, toy_model.unigram)

    def test_deterministic_corpus_is_nearly_certain(self, char_vocab):
        model = train_ngram(char_vocab, ["ab"] * 50, order=2, prune_thresholds=(0, 0))
        a = char_vocab.token_ids["a"]
        b = char_vocab.token_ids["b"]
        assert model.prob((a,), b) > 0.95
        assert model.prob((b,), EOS_ID) > 0.95


class TestPruning:
    def test_threshold_drops_rare_bigrams(self, char_vocab):
        # "cd" occurs once; with a bigram threshold of 1 the (c, d) entry
        # must vanish and the probability must come from backoff.
        corpus = ["ab"] * 5 + ["cd"]
        model = train_ngram(char_vocab, corpus, order=2, prune_thresholds=(0, 1))
        c = char_vocab.token_ids["c"]
        d = char_vocab.token_ids["d"]
        assert (c,) not in model.tables[2]
        np.testing.assert_array_equal(
            model.next_token_distribution((c,)), model.unigram
        )
        assert model.prob((c,), d) == model.unigram[d]

    def test_kept_tables_renormalize_after_pruning(self, char_vocab):
        corpus = ["ab"] * 5 + ["ac"]
        model = train_ngram(char_vocab, corpus, order=2, prune_thresholds=(0, 1))
        a = char_vocab.token_ids["a"]
        dist = model.next_token_distribution((a,))
        assert abs(dist.sum() - 1.0) < 1e-12

    def test_wrong_threshold_count_rejected(self, char_vocab):
        with pytest.raises(ValueError, match="3 pruning thresholds"):
            train_ngram(char_vocab, ["ab"], order=3, prune_thresholds=(0, 0))

    def test_empty_corpus_rejected(self, char_vocab):
        with pytest.raises(ValueError, match="empty corpus"):
            train_ngram(char_vocab, [], order=2, prune_thresholds=(0, 0))


class TestSequenceScores:
    def test_nll_matches_oracle(self, char_vocab, toy_model):
        counts = count_grams(char_vocab, TOY_CORPUS, 3)
        for text in TOY_CORPUS + ["dab a", "cab"]:
            want, want_n = oracle_nll(char_vocab, counts, (0, 0, 1), 0.75, 3, text)
            got, got_n = toy_model.sequence_nll(text)
            assert got_n == want_n
            assert got == pytest.approx(want, abs=1e-9)

    def test_perplexity_matches_oracle(self, char_vocab):
        corpus = ["ab ab", "ab ba", "ba ab"]
        model = train_ngram(char_vocab, corpus, order=2, prune_thresholds=(0, 0))
        counts = count_grams(char_vocab, corpus, 2)
        total, n = 0.0, 0
        for text in corpus:
            nll, count = oracle_nll(char_vocab, counts, (0, 0), 0.75, 2, text)
            total += nll
            n += count
        assert model.perplexity(corpus) == pytest.approx(math.exp(total / n), abs=1e-9)

    def test_zero_probability_yields_infinite_nll(self, toy_model):
        # No training utterance ends in "c", so the end marker after "cc"
        # has probability zero all the way down to the unigram table.
        nll, count = toy_model.sequence_nll("cc")
        assert math.isinf(nll)
        assert count == 3

    def test_finite_for_plausible_ending(self, toy_model):
        nll, _ = toy_model.sequence_nll("dab")
        assert math.isfinite(nll)

    def test_unknown_character_raises(self, toy_model):
        with pytest.raises(Exception, match="offset"):
            toy_model.sequence_nll("xyz")


class TestEntropy:
    def test_one_hot_is_zero(self):
        assert entropy(np.array([0.0, 1.0, 0.0])) == 0.0

    def test_uniform_is_log_n(self):
        assert entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=1, max_size=50))
    def test_matches_independent_sum(self, raw):
        dist = np.array(raw) / np.sum(raw)
        want = -sum(p * math.log(p) for p in dist.tolist() if p > 0)
        assert entropy(dist) == pytest.approx(want, abs=1e-12)

    def test_zero_entries_contribute_nothing(self):
        assert entropy(np.array([0.5, 0.0, 0.5])) == pytest.approx(math.log(2), abs=1e-12)


class TestStopPolicy:
    def test_default_is_none(self):
        assert StopPolicy().kind == "none"

    @pytest.mark.parametrize("t", [0, 11])
    def test_word_budget_range(self, t):
        with pytest.raises(ValueError, match="1..10"):
            StopPolicy(kind="max_words", t=t)

    def test_entropy_threshold_positive(self):
        with pytest.raises(ValueError, match="positive"):
            StopPolicy(kind="entropy", threshold=0.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown stop policy"):
            StopPolicy(kind="sometimes")


class TestSerialization:
    def test_roundtrip_preserves_distributions(self, char_vocab, toy_model, tmp_path):
        toy_model.save(tmp_path / "m.ghst")
        loaded = NGramModel.load(tmp_path / "m.ghst")
        assert loaded.order == toy_model.order
        assert loaded.prune_thresholds == toy_model.prune_thresholds
        assert loaded.discount == toy_model.discount
        assert loaded.vocab.tokens == char_vocab.tokens
        rng = np.random.default_rng(6)
        ids = list(range(char_vocab.size))
        for _ in range(100):
            ctx = tuple(rng.choice(ids, size=rng.integers(0, 4)).tolist())
            np.testing.assert_array_equal(
                loaded.next_token_distribution(ctx),
                toy_model.next_token_distribution(ctx),
            )

    def test_score_norm_recorded_in_header(self, toy_model, tmp_path):
        toy_model.save(tmp_path / "m.ghst")
        assert NGramModel.load(tmp_path / "m.ghst").meta["score_norm"] == "tokens"

    def test_save_is_deterministic(self, char_vocab, toy_model, tmp_path):
        toy_model.save(tmp_path / "a.ghst")
        train_ngram(char_vocab, TOY_CORPUS, order=3, prune_thresholds=(0, 0, 1)).save(
            tmp_path / "b.ghst"
        )
        assert (tmp_path / "a.ghst").read_bytes() == (tmp_path / "b.ghst").read_bytes()


class TestTrainingInputOrder:
    def test_utterance_order_does_not_matter(self, char_vocab):
        a = train_ngram(char_vocab, TOY_CORPUS, order=2, prune_thresholds=(0, 0))
        b = train_ngram(char_vocab, TOY_CORPUS[::-1], order=2, prune_thresholds=(0, 0))
        np.testing.assert_array_equal(a.unigram, b.unigram)
        assert sorted(a.tables[2]) == sorted(b.tables[2])
        for ctx in a.tables[2]:
            np.testing.assert_array_equal(a.tables[2][ctx][0], b.tables[2][ctx][0])
            np.testing.assert_array_equal(a.tables[2][ctx][1], b.tables[2][ctx][1])
