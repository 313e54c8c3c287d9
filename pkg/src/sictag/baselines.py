"""Reference classifiers: constant predictors, RCA, GA (RANSAC) and VQMM."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Label
from .seeding import rng_for
from .track_model import TrackPrediction

GA_SCHEMA = "ga_model/1"
VQMM_SCHEMA = "vqmm_model/1"


class BaselineError(ValueError):
    pass


def _check_schema(doc, schema):
    if doc.get("schema") != schema:
        raise BaselineError(f"expected schema {schema}, found {doc.get('schema')!r}")


def _both_classes(labels):
    y = np.array([Label(lab).sign for lab in labels], dtype=float)
    if y.size == 0 or np.all(y == y[0]):
        raise BaselineError("single-class training set")
    return y


# -- trivial predictors ------------------------------------------------------

def predict_all(isrcs, label: Label) -> list[TrackPrediction]:
    margin = float(Label(label).sign)
    return [TrackPrediction(i, Label(label), margin) for i in isrcs]


def predict_rca(isrcs, seed: int) -> list[TrackPrediction]:
    """Random half split: ceil(n/2) Songs, the rest Instrumentals."""
    isrcs = list(isrcs)
    if not isrcs:
        raise BaselineError("RCA needs at least one track")
    perm = rng_for(seed, "rca").permutation(len(isrcs))
    n_song = (len(isrcs) + 1) // 2
    margin = np.ones(len(isrcs))
    margin[perm[:n_song]] = -1.0
    return [TrackPrediction.from_margin(i, m) for i, m in zip(isrcs, margin)]


# -- GA: mean MFCC + RANSAC hyperplane ---------------------------------------

@dataclass(frozen=True)
class GaConfig:
    iterations: int = 100
    inlier_threshold: float = 0.5
    seed: int = 0


@dataclass
class RansacModel:
    hyperplane: np.ndarray  # weights followed by bias
    config: GaConfig
    n_inliers: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.hyperplane.size - 1:
            raise BaselineError(f"expected {self.hyperplane.size - 1} features, got {X.shape[1]}")
        return X @ self.hyperplane[:-1] + self.hyperplane[-1]

    def to_dict(self):
        return {"schema": GA_SCHEMA, "hyperplane": self.hyperplane.tolist(),
                "config": asdict(self.config), "n_inliers": self.n_inliers}

    @classmethod
    def from_dict(cls, doc):
        _check_schema(doc, GA_SCHEMA)
        return cls(np.asarray(doc["hyperplane"], dtype=float), GaConfig(**doc["config"]),
                   int(doc.get("n_inliers", 0)))


def track_mean_mfcc(features: np.ndarray, n_mfcc: int = 13) -> np.ndarray:
    return np.asarray(features, dtype=float)[:, :n_mfcc].mean(axis=0)


def _design(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def fit_ransac(X, targets, cfg: GaConfig = GaConfig()) -> tuple[RansacModel, np.ndarray]:
    """RANSAC hyperplane fit; returns the model and the consensus mask.

    Each iteration least-squares fits d+1 random rows.  A sample whose design
    matrix has lower rank than the full training design is degenerate and only
    consumes its iteration.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(targets, dtype=float)
    A = _design(X)
    m = A.shape[1]
    if A.shape[0] < m:
        raise BaselineError(f"RANSAC needs at least {m} training tracks")
    full_rank = np.linalg.matrix_rank(A)
    rng = rng_for(cfg.seed, "ransac")
    best_mask, best_count = None, -1
    for _ in range(cfg.iterations):
        pick = rng.choice(A.shape[0], size=m, replace=False)
        As = A[pick]
        if np.linalg.matrix_rank(As) < full_rank:
            continue
        coef, *_ = np.linalg.lstsq(As, t[pick], rcond=None)
        if not np.all(np.isfinite(coef)):
            continue
        mask = np.abs(A @ coef - t) < cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_mask, best_count = mask, count
    if best_mask is None:
        raise BaselineError("every RANSAC sample was degenerate")
    if best_count >= m:
        coef, *_ = np.linalg.lstsq(A[best_mask], t[best_mask], rcond=None)
    else:
        coef, *_ = np.linalg.lstsq(A, t, rcond=None)
    return RansacModel(coef, cfg, best_count), best_mask


def train_ga(track_features, labels, cfg: GaConfig = GaConfig()) -> RansacModel:
    """``track_features`` are per-track frame matrices; only the MFCC block is used."""
    y = _both_classes(labels)
    X = np.vstack([track_mean_mfcc(f) for f in track_features])
    return fit_ransac(X, y, cfg)[0]


def predict_ga(model: RansacModel, track_features, isrcs) -> list[TrackPrediction]:
    X = np.vstack([track_mean_mfcc(f) for f in track_features])
    return [TrackPrediction.from_margin(i, s) for i, s in zip(isrcs, model.decision_function(X))]


# -- VQMM: k-means codebook + per-class first-order Markov chains -------------

@dataclass(frozen=True)
class VqmmConfig:
    k: int = 128
    kmeans_iters: int = 50
    seed: int = 0


def _sq_dists(X, C):
    return (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]


def assign_codewords(X, codebook) -> np.ndarray:
    """Nearest centroid by Euclidean distance; argmin picks the lowest index on ties."""
    X = np.asarray(X, dtype=float)
    d = _sq_dists(X, codebook)
    return np.argmin(d, axis=1)


def kmeans(X, k: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding followed by a fixed number of Lloyd iterations.

    A centroid left without members is moved to the point farthest from its
    current centroid.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < k:
        raise BaselineError(f"k-means needs at least k={k} points, got {n}")
    centres = np.empty((k, X.shape[1]))
    centres[0] = X[rng.integers(n)]
    closest = ((X - centres[0]) ** 2).sum(1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centres[c] = X[idx]
        closest = np.minimum(closest, ((X - centres[c]) ** 2).sum(1))
    for _ in range(iters):
        d = _sq_dists(X, centres)
        assign = np.argmin(d, axis=1)
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centres)
        np.add.at(sums, assign, X)
        nonempty = counts > 0
        centres[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            own = d[np.arange(n), assign]
            taken = set()
            for c in np.flatnonzero(~nonempty):
                order = np.argsort(-own, kind="stable")
                idx = next(i for i in order if i not in taken)
                taken.add(idx)
                centres[c] = X[idx]
                own[idx] = 0.0
    return centres


@dataclass
class MarkovChain:
    initial: np.ndarray      # (k,)
    transition: np.ndarray   # (k, k), rows sum to 1

    @classmethod
    def fit(cls, sequences, k: int) -> "MarkovChain":
        init = np.ones(k)
        trans = np.ones((k, k))
        for seq in sequences:
            seq = np.asarray(seq, dtype=np.int64)
            init[seq[0]] += 1
            np.add.at(trans, (seq[:-1], seq[1:]), 1)
        return cls(init / init.sum(), trans / trans.sum(axis=1, keepdims=True))

    def log_likelihood(self, seq) -> float:
        seq = np.asarray(seq, dtype=np.int64)
        return float(np.log(self.initial[seq[0]]) + np.log(self.transition[seq[:-1], seq[1:]]).sum())


@dataclass
class VqmmModel:
    codebook: np.ndarray
    chains: dict[Label, MarkovChain]
    config: VqmmConfig

    def margin(self, frames) -> float:
        """Log-likelihood ratio, Instrumental minus Song."""
        seq = assign_codewords(np.asarray(frames, dtype=float)[:, :self.codebook.shape[1]], self.codebook)
        return (self.chains[Label.INSTRUMENTAL].log_likelihood(seq)
                - self.chains[Label.SONG].log_likelihood(seq))

    def to_dict(self):
        return {
            "schema": VQMM_SCHEMA,
            "config": asdict(self.config),
            "codebook": self.codebook.tolist(),
            "chains": {lab.value: {"initial": ch.initial.tolist(), "transition": ch.transition.tolist()}
                       for lab, ch in self.chains.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        _check_schema(doc, VQMM_SCHEMA)
        chains = {Label(name): MarkovChain(np.asarray(c["initial"]), np.asarray(c["transition"]))
                  for name, c in doc["chains"].items()}
        return cls(np.asarray(doc["codebook"], dtype=float), chains, VqmmConfig(**doc["config"]))


def train_vqmm(track_features, labels, cfg: VqmmConfig = VqmmConfig(), n_mfcc: int = 13) -> VqmmModel:
    labels = [Label(lab) for lab in labels]
    _both_classes(labels)
    frames = [np.asarray(f, dtype=float)[:, :n_mfcc] for f in track_features]
    if any(f.shape[0] < 2 for f in frames):
        raise BaselineError("every track needs at least 2 frames")
    codebook = kmeans(np.vstack(frames), cfg.k, cfg.kmeans_iters, rng_for(cfg.seed, "vqmm-kmeans"))
    seqs = [assign_codewords(f, codebook) for f in frames]
    chains = {lab: MarkovChain.fit([s for s, l in zip(seqs, labels) if l is lab], cfg.k)
              for lab in (Label.SONG, Label.INSTRUMENTAL)}
    return VqmmModel(codebook, chains, cfg)


def predict_vqmm(model: VqmmModel, track_features, isrcs) -> list[TrackPrediction]:
    return [TrackPrediction.from_margin(i, model.margin(f)) for i, f in zip(isrcs, track_features)]


def save_json(doc: dict, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_json(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)
