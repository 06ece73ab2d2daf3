"""Compiled and numpy kernels must agree bit for bit."""

import numpy as np
import pytest

from ghostline import _kernels
from ghostline._kernels import pure


def random_case(rng, size, n_levels):
    unigram = rng.random(size)
    unigram /= unigram.sum()
    levels = []
    for _ in range(n_levels):
        width = rng.integers(1, size + 1)
        ids = np.sort(rng.choice(size, size=width, replace=False)).astype(np.int32)
        probs = rng.random(width)
        levels.append((ids, probs, float(rng.random())))
    return unigram, levels


def test_backend_is_reported():
    assert _kernels.BACKEND in ("compiled", "numpy")


def test_pure_fill_semantics():
    unigram = np.array([0.5, 0.25, 0.25])
    levels = [
        (np.array([0], dtype=np.int32), np.array([0.875]), 0.5),
        (np.array([2], dtype=np.int32), np.array([0.75]), 0.25),
    ]
    out = pure.fill_distribution(unigram, levels)
    # level 1: all scaled by 0.5, then id 0 pinned; level 2: scaled by 0.25, id 2 pinned.
    # Every operand is a dyadic rational, so the comparison is exact.
    np.testing.assert_array_equal(out, np.array([0.21875, 0.03125, 0.75]))


def test_pure_fill_does_not_mutate_inputs():
    unigram = np.array([0.5, 0.5])
    pure.fill_distribution(unigram, [(np.array([0], dtype=np.int32), np.array([1.0]), 0.0)])
    np.testing.assert_array_equal(unigram, np.array([0.5, 0.5]))


def test_no_levels_returns_unigram_copy():
    unigram = np.array([0.25, 0.75])
    out = pure.fill_distribution(unigram, [])
    np.testing.assert_array_equal(out, unigram)
    assert out is not unigram


@pytest.mark.skipif(_kernels.BACKEND != "compiled", reason="compiled kernel not built")
class TestCompiledParity:
    def test_bitwise_equality_on_random_cases(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            size = int(rng.integers(1, 300))
            unigram, levels = random_case(rng, size, int(rng.integers(0, 5)))
            a = pure.fill_distribution(unigram, levels)
            b = _kernels.fill_distribution(unigram, levels)
            assert a.tobytes() == b.tobytes()

    def test_bitwise_equality_large_vocab(self):
        rng = np.random.default_rng(8)
        unigram, levels = random_case(rng, 8192, 7)
        a = pure.fill_distribution(unigram, levels)
        b = _kernels.fill_distribution(unigram, levels)
        assert a.tobytes() == b.tobytes()
