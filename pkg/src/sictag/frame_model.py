"""Stage 1: random forest over frame features -> per-frame voice probability."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Label, VocalActivityAnnotation
from .dsp import N_FEATURES
from .seeding import derive_seed
from .tree import DecisionTree, fit_tree

SCHEMA = "frame_model/1"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    seed: int = 0
    # None -> ceil(sqrt(n_features))
    max_features: int | None = None


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    n_features: int
    config: RfConfig
    feature_hash: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "n_features": self.n_features,
            "config": asdict(self.config),
            "feature_hash": self.feature_hash,
            "extra": self.extra,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomForestModel":
        if doc.get("schema") != SCHEMA:
            raise ModelError(f"expected schema {SCHEMA}, found {doc.get('schema')!r}")
        return cls(
            trees=[DecisionTree.from_dict(t) for t in doc["trees"]],
            n_features=int(doc["n_features"]),
            config=RfConfig(**doc["config"]),
            feature_hash=doc.get("feature_hash"),
            extra=doc.get("extra", {}),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RandomForestModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def align_labels(ann: VocalActivityAnnotation | None, frame_times_s: np.ndarray,
                 track_label: Label) -> np.ndarray:
    """A frame is voiced iff its centre lies in some half-open [start, end)."""
    times = np.asarray(frame_times_s, dtype=float)
    voiced = np.zeros(times.size, dtype=bool)
    if track_label is Label.INSTRUMENTAL or ann is None:
        return voiced
    for start, end in ann.intervals:
        voiced |= (times >= start) & (times < end)
    return voiced


def _canonical_order(X, y):
    # sort rows by content so the model does not depend on input row order
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys[::-1])


def _grow_one(args):
    X, y, cfg, max_features, tree_index = args
    rng = np.random.default_rng(derive_seed(cfg.seed, f"rf-tree:{tree_index}"))
    boot = rng.integers(0, X.shape[0], size=X.shape[0])
    return fit_tree(X[boot], y[boot], max_depth=cfg.max_depth, min_leaf=cfg.min_leaf,
                    max_features=max_features, rng=rng)


def train_frame_classifier(features: np.ndarray, labels: np.ndarray, cfg: RfConfig = RfConfig(),
                           jobs: int = 1) -> RandomForestModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels).astype(float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("empty training set")
    if X.shape[0] != y.shape[0]:
        raise ModelError("features and labels differ in length")
    if y.min() == y.max():
        raise ModelError("single-class training set")
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    max_features = cfg.max_features or math.ceil(math.sqrt(X.shape[1]))
    tasks = [(X, y, cfg, max_features, i) for i in range(cfg.n_trees)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(_grow_one, tasks))
    else:
        trees = [_grow_one(t) for t in tasks]
    return RandomForestModel(trees=trees, n_features=X.shape[1], config=cfg)


def predict_frame_probabilities(model: RandomForestModel, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ModelError(f"expected {model.n_features} feature columns, got {X.shape[-1]}")
    acc = np.zeros(X.shape[0])
    for tree in model.trees:
        acc += tree.predict_fraction(X)
    return np.clip(acc / len(model.trees), 0.0, 1.0)


__all__ = [
    "N_FEATURES",
    "ModelError",
    "RandomForestModel",
    "RfConfig",
    "align_labels",
    "predict_frame_probabilities",
    "train_frame_classifier",
]
