import math

import numpy as np
import pytest

from sictag.corpus import Label
from sictag.track_model import (
    AdaBoostModel,
    BoostConfig,
    BoostError,
    TrackPrediction,
    predict_track,
    train_adaboost,
)
from sictag.tree import DecisionTree

S, I = Label.SONG, Label.INSTRUMENTAL


def test_golden_first_round():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    labels = [S, S, I, I]
    model = train_adaboost(X, labels, BoostConfig(n_rounds=1))
    assert len(model.alphas) == 1
    assert abs(model.alphas[0] - 0.5 * math.log(3.0)) <= 1e-12
    w = model.history[1]
    np.testing.assert_allclose(w, [1 / 6, 1 / 6, 1 / 2, 1 / 6], rtol=0, atol=1e-12)


def test_weights_stay_normalised():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 79))
    labels = [I if v else S for v in (X[:, 0] + 0.8 * rng.normal(size=80) > 0)]
    model = train_adaboost(X, labels, BoostConfig(n_rounds=40, seed=1))
    assert len(model.history) >= 2
    for w in model.history:
        assert abs(w.sum() - 1.0) <= 1e-9
    assert all(np.isfinite(a) for a in model.alphas)


def test_each_kept_round_beats_chance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 5))
    y = [I if v else S for v in rng.uniform(size=60) < 0.3]
    model = train_adaboost(X, y, BoostConfig(n_rounds=30))
    sign = np.array([Label(v).sign for v in y])
    for tree, alpha, w in zip(model.trees, model.alphas, model.history):
        vote = np.where(tree.predict_fraction(X) > 0.5, 1, -1)
        if alpha > 0:
            assert w[vote != sign].sum() < 0.5


def test_separable_set_is_learned():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 79))
    y = [I if v > 0 else S for v in X[:, 5]]
    model = train_adaboost(X, y, BoostConfig(n_rounds=20))
    pred = [p.predicted_label for p in (predict_track(model, x) for x in X)]
    assert pred == y


def test_class_weight_initialisation():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    model = train_adaboost(X, [S, S, I, I], BoostConfig(n_rounds=1, class_weights=(1, 5)))
    w0 = model.history[0]
    assert w0[2] == pytest.approx(5 * w0[0], abs=1e-12)
    assert w0.sum() == pytest.approx(1.0, abs=1e-12)


def test_scaling_class_weights_keeps_labels():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 6))
    y = [I if v else S for v in X[:, 0] + rng.normal(size=50) > 0.3]
    probe = rng.normal(size=(30, 6))
    a = train_adaboost(X, y, BoostConfig(n_rounds=15, class_weights=(1, 3)))
    b = train_adaboost(X, y, BoostConfig(n_rounds=15, class_weights=(7, 21)))
    assert np.array_equal(a.decision_function(probe) > 0, b.decision_function(probe) > 0)


def test_determinism_and_document_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 79))
    y = [I if v > 0 else S for v in X[:, 1] + X[:, 2]]
    a = train_adaboost(X, y, BoostConfig(n_rounds=10, seed=9))
    b = train_adaboost(X, y, BoostConfig(n_rounds=10, seed=9))
    assert a.to_dict() == b.to_dict()
    a.save(tmp_path / "t.json")
    c = AdaBoostModel.load(tmp_path / "t.json")
    np.testing.assert_array_equal(c.decision_function(X), a.decision_function(X))
    doc = a.to_dict()
    doc["schema"] = "track_model/2"
    with pytest.raises(BoostError):
        AdaBoostModel.from_dict(doc)


def test_errors():
    with pytest.raises(BoostError, match="single-class"):
        train_adaboost(np.zeros((3, 2)), [S, S, S])
    with pytest.raises(BoostError):
        train_adaboost(np.zeros((0, 2)), [])
    model = AdaBoostModel([DecisionTree.constant(1.0)], [1.0], 79, BoostConfig())
    with pytest.raises(BoostError):
        model.decision_function(np.zeros((1, 10)))


def test_prediction_examples():
    always_inst = DecisionTree.constant(1.0)
    always_song = DecisionTree.constant(0.0)
    one = AdaBoostModel([always_inst], [1.0], 3, BoostConfig())
    p = predict_track(one, np.zeros(3), "X")
    assert p.margin == 1.0 and p.predicted_label is I and p.scores == (-1.0, 1.0)

    two = AdaBoostModel([always_song, always_inst], [0.6, 0.5], 3, BoostConfig())
    p = predict_track(two, np.zeros(3))
    assert p.margin == pytest.approx(-0.1) and p.predicted_label is S

    assert TrackPrediction.from_margin("X", 0.0).predicted_label is S


def test_zero_error_round_is_capped():
    X = np.array([[0.0], [1.0]])
    model = train_adaboost(X, [S, I], BoostConfig(n_rounds=50))
    assert model.alphas == [10.0]
