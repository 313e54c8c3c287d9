"""Track-level descriptor built from frame probabilities and frame features.

Layout of the 79 values: 10-bin probability histogram, 30-bin histogram of
voiced run lengths (runs of 30 frames or more share the last bin), then the
39 per-column feature means.
"""

from __future__ import annotations

import numpy as np

N_PROB_BINS = 10
N_NGRAM_BINS = 30
TRACK_VECTOR_LEN = N_PROB_BINS + N_NGRAM_BINS + 39


def probability_histogram(pv) -> np.ndarray:
    pv = np.asarray(pv, dtype=float)
    if pv.size == 0:
        raise ValueError("empty probability vector")
    bins = np.minimum(np.floor(pv * N_PROB_BINS).astype(np.int64), N_PROB_BINS - 1)
    return np.bincount(bins, minlength=N_PROB_BINS) / pv.size


def voiced_runs(pv, threshold: float = 0.5) -> list[int]:
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    voiced = np.asarray(pv, dtype=float) >= threshold
    if not voiced.any():
        return []
    edges = np.diff(np.concatenate([[0], voiced.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return (ends - starts).tolist()


def ngram_histogram(runs) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    if runs.size == 0:
        return np.zeros(N_NGRAM_BINS)
    if runs.min() < 1:
        raise ValueError("run lengths must be >= 1")
    counts = np.bincount(np.minimum(runs, N_NGRAM_BINS) - 1, minlength=N_NGRAM_BINS)
    return counts / runs.size


def build_track_vector(pv, features: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    pv = np.asarray(pv, dtype=float)
    features = np.asarray(features, dtype=float)
    if pv.shape[0] != features.shape[0]:
        raise ValueError(f"{pv.shape[0]} probabilities for {features.shape[0]} frames")
    return np.concatenate([
        probability_histogram(pv),
        ngram_histogram(voiced_runs(pv, threshold)),
        features.mean(axis=0),
    ])
