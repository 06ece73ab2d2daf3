"""Numpy implementation of the distribution-fill kernel.

Kept in elementwise lockstep with the compiled version: scale the whole
vector by the backoff weight, then scatter the explicit probabilities, one
level at a time.  Both backends therefore produce bit-identical float64
output for the same inputs.
"""

from __future__ import annotations

import numpy as np


def fill_distribution(unigram: np.ndarray, levels: list) -> np.ndarray:
    """Compose a full next-token distribution from backoff levels.

    ``levels`` holds ``(ids, probs, bow)`` triples ordered from shortest to
    longest context; each level rescales everything below it by ``bow`` and
    then overwrites its explicitly stored entries.
    """
    dist = unigram.copy()
    for ids, probs, bow in levels:
        dist *= bow
        dist[ids] = probs
    return dist
