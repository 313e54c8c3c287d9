"""Weighted binary CART classifier stored as flat node arrays.

Shared by the random forest (bootstrap samples, unit weights, random feature
subsets) and AdaBoost (boosting weights, all features, shallow depth).
Labels are 0/1; each node keeps the weighted fraction of label 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class DecisionTree:
    feature: np.ndarray     # int, LEAF for leaves
    threshold: np.ndarray   # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray       # weighted fraction of class 1 at the node
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            internal = f != LEAF
            active = active[internal]
            if not active.size:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_fraction(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int64),
            threshold=np.asarray(doc["threshold"], dtype=float),
            left=np.asarray(doc["left"], dtype=np.int64),
            right=np.asarray(doc["right"], dtype=np.int64),
            value=np.asarray(doc["value"], dtype=float),
            depth=int(doc["depth"]),
        )

    @classmethod
    def constant(cls, fraction: float) -> "DecisionTree":
        return cls(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]),
                   np.array([float(fraction)]), 0)


def _best_split(X, y, w, idx, features, min_leaf, gap_label=None):
    """Best (gain, feature, threshold) over candidate features, or None."""
    Xn = X[np.ix_(idx, features)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ws = w[idx][order]
    wpos = ws * y[idx][order]
    cw = np.cumsum(ws, axis=0)
    cp = np.cumsum(wpos, axis=0)
    total_w, total_p = cw[-1], cp[-1]
    n = idx.size

    # split after sorted position i (left = rows 0..i)
    pos = np.arange(n - 1)
    valid = (xs[1:] > xs[:-1]) & ((pos + 1) >= min_leaf)[:, None] & ((n - pos - 1) >= min_leaf)[:, None]
    if not valid.any():
        return None
    lw, lp = cw[:-1], cp[:-1]
    rw, rp = total_w - lw, total_p - lp
    with np.errstate(divide="ignore", invalid="ignore"):
        # weighted Gini of children = sum over sides of 2 p (1-p) W
        left_g = np.where(lw > 0, 2 * lp * (lw - lp) / lw, 0.0)
        right_g = np.where(rw > 0, 2 * rp * (rw - rp) / rw, 0.0)
    child = left_g + right_g
    child = np.where(valid, child, np.inf)
    best = child.min()
    if not np.isfinite(best):
        return None
    # equal-impurity candidates: take the widest gap relative to the feature's range here
    tied = child <= best + 1e-12 * max(1.0, abs(best))
    span = xs[-1] - xs[0]
    gap = (xs[1:] - xs[:-1]) / np.where(span > 0, span, 1.0)
    flat = int(np.argmax(np.where(tied, gap, -1.0)))
    i, j = divmod(flat, child.shape[1])
    parent = 2 * total_p[j] * (total_w[j] - total_p[j]) / total_w[j] if total_w[j] > 0 else 0.0
    lo, hi = xs[i, j], xs[i + 1, j]
    if gap_label is None:
        threshold = 0.5 * (lo + hi)
        if not threshold < hi:
            threshold = lo
    else:
        left_frac = lp[i, j] / lw[i, j] if lw[i, j] > 0 else 0.0
        right_frac = rp[i, j] / rw[i, j] if rw[i, j] > 0 else 0.0
        # hand the empty interval (lo, hi) to whichever side leans toward gap_label
        left_leans = (left_frac > right_frac) == (gap_label == 1)
        threshold = np.nextafter(hi, -np.inf) if left_leans else lo
    return parent - child[i, j], int(features[j]), float(threshold)


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    *,
    max_depth: int = 12,
    min_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    gap_label: int | None = None,
) -> DecisionTree:
    """Grow a Gini tree depth-first.

    ``max_features`` candidate features are drawn without replacement at each
    node (all of them when None).  A node becomes a leaf when it is pure, at
    ``max_depth``, or when no split leaves ``min_leaf`` rows on both sides.

    Thresholds sit midway between the two closest values on either side of a
    split.  With ``gap_label`` set, the empty interval between them is given
    to the child whose class-1 fraction leans toward that label instead.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if rng is None:
        rng = np.random.default_rng(0)
    k = d if max_features is None else min(max_features, d)

    feature, threshold, left, right, value = [], [], [], [], []
    max_seen = 0

    def new_node(idx):
        wsum = w[idx].sum()
        frac = float(np.dot(w[idx], y[idx]) / wsum) if wsum > 0 else float(y[idx].mean())
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(frac)
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        max_seen = max(max_seen, depth)
        frac = value[node]
        if depth >= max_depth or idx.size < 2 * min_leaf or frac <= 0.0 or frac >= 1.0:
            continue
        feats = np.arange(d) if k == d else np.sort(rng.choice(d, size=k, replace=False))
        found = _best_split(X, y, w, idx, feats, min_leaf, gap_label)
        if found is None or found[0] <= 1e-15:
            continue
        _, f, thr = found
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        lnode, rnode = new_node(li), new_node(ri)
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))

    return DecisionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
        max_seen,
    )
