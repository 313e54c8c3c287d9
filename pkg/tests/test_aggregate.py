import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sictag.aggregate import (
    TRACK_VECTOR_LEN,
    build_track_vector,
    ngram_histogram,
    probability_histogram,
    voiced_runs,
)


# naive oracles: plain loops, no numpy tricks

def naive_prob_hist(pv):
    counts = [0] * 10
    for p in pv:
        b = int(p * 10)
        counts[min(b, 9)] += 1
    return counts


def naive_runs(pv, thr):
    runs, cur = [], 0
    for p in pv:
        if p >= thr:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return runs


def naive_ngram_counts(runs):
    counts = [0] * 30
    for length in runs:
        counts[min(length, 30) - 1] += 1
    return counts


def random_pv(rng):
    n = int(rng.integers(1, 5001))
    kind = rng.integers(3)
    if kind == 0:
        return rng.uniform(0, 1, n)
    if kind == 1:
        # long runs: blocky signal
        return np.repeat(rng.uniform(0, 1, n // 40 + 1), 40)[:n]
    # exact bin edges, including 1.0
    return rng.integers(0, 11, n) / 10.0


def test_oracles_on_1000_random_vectors():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        pv = random_pv(rng)
        hist = probability_histogram(pv)
        counts = naive_prob_hist(pv)
        assert np.array_equal(np.round(hist * pv.size).astype(int), counts)
        assert abs(hist.sum() - 1.0) <= 1e-9

        runs = voiced_runs(pv, 0.5)
        assert runs == naive_runs(pv, 0.5)
        assert sum(runs) == int(np.sum(pv >= 0.5))

        ng = ngram_histogram(runs)
        oracle = naive_ngram_counts(runs)
        if runs:
            assert np.array_equal(np.round(ng * len(runs)).astype(int), oracle)
            assert abs(ng.sum() - 1.0) <= 1e-9
        else:
            assert np.all(ng == 0)


def test_probability_histogram_examples():
    np.testing.assert_array_equal(probability_histogram([0.0] * 4), [1] + [0] * 9)
    h = probability_histogram([0.05, 0.15, 0.95, 1.0])
    assert h[0] == 0.25 and h[1] == 0.25 and h[9] == 0.5
    with pytest.raises(ValueError):
        probability_histogram([])


def test_probability_histogram_uniform_statistics():
    for seed in range(5):
        h = probability_histogram(np.random.default_rng(seed).uniform(0, 1, 1000))
        assert np.all(np.abs(h - 0.1) <= 0.05)


def test_voiced_runs_examples():
    assert voiced_runs([0.9, 0.9, 0.2, 0.8]) == [2, 1]
    assert voiced_runs([0.1, 0.2, 0.49]) == []
    assert voiced_runs([0.5], 0.5) == [1]
    with pytest.raises(ValueError):
        voiced_runs([0.5], 1.0)


def test_ngram_examples():
    h = ngram_histogram([2, 1])
    assert h[0] == 0.5 and h[1] == 0.5 and h.sum() == 1.0
    assert ngram_histogram([35])[29] == 1.0
    assert ngram_histogram([30])[29] == 1.0
    assert ngram_histogram([29])[28] == 1.0
    np.testing.assert_array_equal(ngram_histogram([]), np.zeros(30))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=300))
def test_reversal_gives_same_ngram_histogram(pv):
    pv = np.array(pv)
    fwd = voiced_runs(pv)
    rev = voiced_runs(pv[::-1])
    assert rev == fwd[::-1]
    np.testing.assert_array_equal(ngram_histogram(fwd), ngram_histogram(rev))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=300), st.floats(0.01, 0.99))
def test_run_length_conservation(pv, thr):
    pv = np.array(pv)
    assert sum(voiced_runs(pv, thr)) == int(np.sum(pv >= thr))


def test_track_vector_layout():
    v = build_track_vector(np.zeros(7), np.zeros((7, 39)))
    assert v.shape == (TRACK_VECTOR_LEN,) == (79,)
    expected = np.zeros(79)
    expected[0] = 1.0
    np.testing.assert_array_equal(v, expected)


def test_track_vector_matches_parts():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(1, 400))
        pv = rng.uniform(0, 1, n)
        fm = rng.normal(size=(n, 39))
        v = build_track_vector(pv, fm, 0.5)
        np.testing.assert_array_equal(v[:10], probability_histogram(pv))
        np.testing.assert_array_equal(v[10:40], ngram_histogram(naive_runs(pv, 0.5)))
        np.testing.assert_allclose(v[40:], fm.mean(axis=0), atol=1e-12)
        assert np.all(np.isfinite(v))


def test_track_vector_length_mismatch():
    with pytest.raises(ValueError):
        build_track_vector(np.zeros(5), np.zeros((6, 39)))
