"""Stage 2: discrete AdaBoost over shallow Gini trees on track descriptors."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Label
from .seeding import rng_for
from .tree import DecisionTree, fit_tree

SCHEMA = "track_model/1"
ALPHA_CAP = 10.0


class BoostError(ValueError):
    pass


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 200
    tree_depth: int = 2
    class_weights: tuple[float, float] = (1.0, 1.0)  # (Song, Instrumental)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
        if len(self.class_weights) != 2 or min(self.class_weights) <= 0:
            raise BoostError("class weights must be two positive numbers")


@dataclass(frozen=True)
class TrackPrediction:
    isrc: str
    predicted_label: Label
    margin: float

    @property
    def scores(self) -> tuple[float, float]:
        """(Song, Instrumental) scores."""
        return -self.margin, self.margin

    @classmethod
    def from_margin(cls, isrc: str, margin: float) -> "TrackPrediction":
        # margin 0 goes to Song
        label = Label.INSTRUMENTAL if margin > 0 else Label.SONG
        return cls(isrc, label, float(margin))


@dataclass
class AdaBoostModel:
    trees: list[DecisionTree]
    alphas: list[float]
    n_features: int
    config: BoostConfig
    # sample-weight trajectory, kept only for inspection during training
    history: list[np.ndarray] = field(default_factory=list, repr=False, compare=False)
    extra: dict = field(default_factory=dict)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise BoostError(f"expected {self.n_features} features, got {X.shape[1]}")
        margin = np.zeros(X.shape[0])
        for tree, alpha in zip(self.trees, self.alphas):
            margin += alpha * _vote(tree, X)
        return margin

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "n_features": self.n_features,
            "config": asdict(self.config),
            "extra": self.extra,
            "rounds": [{"alpha": a, "tree": t.to_dict()} for t, a in zip(self.trees, self.alphas)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdaBoostModel":
        if doc.get("schema") != SCHEMA:
            raise BoostError(f"expected schema {SCHEMA}, found {doc.get('schema')!r}")
        cfg = dict(doc["config"])
        cfg["class_weights"] = tuple(cfg["class_weights"])
        return cls(
            trees=[DecisionTree.from_dict(r["tree"]) for r in doc["rounds"]],
            alphas=[float(r["alpha"]) for r in doc["rounds"]],
            n_features=int(doc["n_features"]),
            config=BoostConfig(**cfg),
            extra=doc.get("extra", {}),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "AdaBoostModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _vote(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    # leaf fraction of Instrumental weight; exact ties vote Song
    return np.where(tree.predict_fraction(X) > 0.5, 1.0, -1.0)


def train_adaboost(vectors, labels, cfg: BoostConfig = BoostConfig()) -> AdaBoostModel:
    """Discrete two-class AdaBoost.

    Initial sample weights are proportional to the class weight of each
    sample's label.  Each round fits a depth-limited tree to the weighted
    samples, takes its weighted error e, sets alpha = 0.5 ln((1 - e) / e),
    scales misclassified weights by exp(alpha) and the rest by exp(-alpha),
    then renormalises.  Training stops when e >= 0.5 (round discarded) or
    e == 0 (round kept with alpha capped).
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise BoostError("empty training set")
    y = np.array([1.0 if Label(lab) is Label.INSTRUMENTAL else 0.0 for lab in labels])
    if y.size != X.shape[0]:
        raise BoostError("vectors and labels differ in length")
    if y.min() == y.max():
        raise BoostError("single-class training set")
    sign = 2 * y - 1
    w_song, w_inst = cfg.class_weights
    w = np.where(y == 1, w_inst, w_song)
    w = w / w.sum()
    rng = rng_for(cfg.seed, "adaboost")

    trees, alphas, history = [], [], [w.copy()]
    for _ in range(cfg.n_rounds):
        tree = fit_tree(X, y, w, max_depth=cfg.tree_depth, min_leaf=1, rng=rng, gap_label=0)
        vote = _vote(tree, X)
        wrong = vote != sign
        err = float(w[wrong].sum())
        if err <= 0.0:
            trees.append(tree)
            alphas.append(ALPHA_CAP)
            break
        if err >= 0.5:
            if not trees:
                # nothing beats chance; keep a zero-weight round so the model is usable
                trees.append(tree)
                alphas.append(0.0)
            break
        alpha = min(0.5 * math.log((1.0 - err) / err), ALPHA_CAP)
        w = w * np.exp(np.where(wrong, alpha, -alpha))
        w /= w.sum()
        trees.append(tree)
        alphas.append(alpha)
        history.append(w.copy())

    return AdaBoostModel(trees=trees, alphas=alphas, n_features=X.shape[1], config=cfg, history=history)


def predict_track(model: AdaBoostModel, vector, isrc: str = "") -> TrackPrediction:
    return TrackPrediction.from_margin(isrc, float(model.decision_function(vector)[0]))


def predict_tracks(model: AdaBoostModel, vectors, isrcs) -> list[TrackPrediction]:
    margins = model.decision_function(vectors)
    return [TrackPrediction.from_margin(i, m) for i, m in zip(isrcs, margins)]
