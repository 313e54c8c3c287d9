import numpy as np
import pytest

from sictag.corpus import Label, VocalActivityAnnotation
from sictag.frame_model import (
    ModelError,
    RandomForestModel,
    RfConfig,
    align_labels,
    predict_frame_probabilities,
    train_frame_classifier,
)
from sictag.tree import DecisionTree, fit_tree

SMALL = RfConfig(n_trees=10, max_depth=6, min_leaf=2, seed=3)


def clusters(seed=0, n=100, d=39):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 0.3, size=(2 * n, d))
    X[:n, 0] += 1.0
    X[n:, 0] -= 1.0
    y = np.r_[np.ones(n, bool), np.zeros(n, bool)]
    return X, y


# -- tree -------------------------------------------------------------------

def test_tree_gini_stump_on_weighted_data():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    tree = fit_tree(X, y, max_depth=1)
    assert tree.feature[0] == 0 and 1.0 <= tree.threshold[0] < 2.0
    np.testing.assert_array_equal(tree.predict_fraction(X), y)


def test_tree_respects_depth_and_min_leaf():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 5))
    y = (rng.uniform(size=300) < 0.5).astype(float)
    tree = fit_tree(X, y, max_depth=4, min_leaf=7, rng=rng)
    assert tree.depth <= 4
    leaves = tree.apply(X)
    counts = np.bincount(leaves, minlength=tree.n_nodes)
    assert np.all(counts[np.unique(leaves)] >= 7)
    assert np.all((tree.value >= 0) & (tree.value <= 1))


def test_tree_weights_change_leaf_fraction():
    X = np.zeros((4, 1))
    y = np.array([0, 0, 0, 1])
    tree = fit_tree(X, y, np.array([1.0, 1.0, 1.0, 3.0]))
    assert tree.n_nodes == 1
    assert tree.value[0] == pytest.approx(0.5)


def test_tree_round_trip():
    X, y = clusters(1, 30, 4)
    tree = fit_tree(X, y, max_depth=3)
    again = DecisionTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(again.predict_fraction(X), tree.predict_fraction(X))


# -- labels -----------------------------------------------------------------

def test_align_labels_examples():
    ann = VocalActivityAnnotation(((1.0, 2.0),))
    np.testing.assert_array_equal(align_labels(ann, [0.5, 1.5, 2.5], Label.SONG), [False, True, False])
    np.testing.assert_array_equal(align_labels(ann, [1.0, 2.0], Label.SONG), [True, False])
    assert not align_labels(None, np.arange(17) * 0.1, Label.INSTRUMENTAL).any()
    assert not align_labels(ann, [1.5], Label.INSTRUMENTAL).any()


# -- forest ------------------------------------------------------------------

def test_separable_clusters_train_perfectly():
    X, y = clusters()
    model = train_frame_classifier(X, y, SMALL)
    p = predict_frame_probabilities(model, X)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(p[y] > 0.5) and np.all(p[~y] < 0.5)
    assert np.mean((p > 0.5) == y) == 1.0
    assert len(model.trees) == 10
    assert all(t.depth <= 6 for t in model.trees)


def test_determinism_and_row_order_independence():
    X, y = clusters(2)
    a = train_frame_classifier(X, y, SMALL)
    b = train_frame_classifier(X.copy(), y.copy(), SMALL)
    assert a.to_dict() == b.to_dict()
    perm = np.random.default_rng(9).permutation(len(y))
    c = train_frame_classifier(X[perm], y[perm], SMALL)
    probe = np.random.default_rng(4).normal(size=(50, 39))
    np.testing.assert_array_equal(predict_frame_probabilities(a, probe),
                                  predict_frame_probabilities(c, probe))


def test_single_class_and_empty_inputs():
    X, _ = clusters()
    with pytest.raises(ModelError, match="single-class"):
        train_frame_classifier(X, np.ones(len(X), bool), SMALL)
    with pytest.raises(ModelError):
        train_frame_classifier(np.zeros((0, 39)), np.zeros(0), SMALL)


def test_degenerate_single_leaf_model():
    model = RandomForestModel([DecisionTree.constant(0.73)], 39, RfConfig(n_trees=1))
    p = predict_frame_probabilities(model, np.zeros((5, 39)))
    np.testing.assert_allclose(p, 0.73)
    assert predict_frame_probabilities(model, np.zeros((1, 39))).shape == (1,)
    with pytest.raises(ModelError):
        predict_frame_probabilities(model, np.zeros((5, 13)))


def test_duplicating_voiced_examples_does_not_lower_their_probability():
    worse = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(160, 39))
        y = rng.uniform(size=160) < 0.4
        X[y, :3] += 0.5
        cfg = RfConfig(n_trees=15, max_depth=6, min_leaf=2, seed=seed)
        base = predict_frame_probabilities(train_frame_classifier(X, y, cfg), X[y]).mean()
        X2, y2 = np.vstack([X, X[y]]), np.r_[y, y[y]]
        dup = predict_frame_probabilities(train_frame_classifier(X2, y2, cfg), X[y]).mean()
        worse += dup < base
    assert worse == 0


def test_model_document_round_trip_and_schema(tmp_path):
    X, y = clusters(5, 40)
    model = train_frame_classifier(X, y, SMALL)
    path = tmp_path / "frame.json"
    model.save(path)
    again = RandomForestModel.load(path)
    np.testing.assert_array_equal(predict_frame_probabilities(again, X),
                                  predict_frame_probabilities(model, X))
    doc = model.to_dict()
    doc["schema"] = "frame_model/0"
    with pytest.raises(ModelError, match="schema"):
        RandomForestModel.from_dict(doc)
