import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eyecontact.classifier import (
    EyeContactModel,
    SvmHyperParams,
    decision_value,
    hinge_objective,
    model_from_dict,
    model_to_dict,
    predict,
    predict_batch,
    train_svm,
)
from eyecontact.errors import ConfigError, DatasetFormatError, DegenerateTrainingError, DimensionMismatchError


def test_hyperparam_validation():
    with pytest.raises(ConfigError):
        SvmHyperParams(lam=0.0)
    with pytest.raises(ConfigError):
        SvmHyperParams(epochs=0)
    with pytest.raises(ConfigError):
        SvmHyperParams(class_weight="auto")


def test_one_dimensional_separable():
    X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    y = np.array([False, False, True, True])
    m = train_svm(X, y)
    assert np.array_equal(predict_batch(m, X), y)
    assert (m.n_positive, m.n_negative) == (2, 2)


def test_training_is_bitwise_deterministic(rng):
    X = rng.normal(0, 1, (100, 6))
    y = X[:, 0] > 0
    a = train_svm(X, y, SvmHyperParams(seed=7))
    b = train_svm(X, y, SvmHyperParams(seed=7))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias
    c = train_svm(X, y, SvmHyperParams(seed=8))
    assert not np.array_equal(a.weights, c.weights)


def test_gaussian_blobs_held_out(rng):
    D = 8
    def draw(n):
        y = rng.random(n) < 0.5
        X = np.where(y[:, None], 2.0, -2.0) + rng.normal(0, 0.5, (n, D))
        return X, y
    X, y = draw(200)
    Xt, yt = draw(1000)
    m = train_svm(X, y)
    assert np.mean(predict_batch(m, Xt) == yt) >= 0.95


def test_single_class_rejected():
    with pytest.raises(DegenerateTrainingError):
        train_svm(np.ones((5, 2)), np.ones(5, bool))


def test_shape_checks():
    with pytest.raises(DimensionMismatchError):
        train_svm(np.ones(5), np.ones(5, bool))
    with pytest.raises(DimensionMismatchError):
        train_svm(np.ones((5, 2)), np.ones(4, bool))


def test_decision_value_examples():
    zero = EyeContactModel(np.zeros(4), 0.0, 4)
    assert decision_value(zero, np.arange(4.0)) == 0.0
    e1 = EyeContactModel(np.eye(4)[0], -1.0, 4)
    assert decision_value(e1, np.array([3.0, 0, 0, 0])) == 2.0
    with pytest.raises(DimensionMismatchError):
        decision_value(e1, np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        predict_batch(e1, np.zeros((2, 3)))


def test_predict_threshold():
    m = EyeContactModel(np.array([1.0]), 0.0, 1)
    assert predict(m, np.array([2.0])) is True
    assert predict(m, np.array([-0.5])) is False
    assert predict(m, np.array([0.0])) is True  # ties count as contact
    assert predict_batch(m, np.array([[0.0], [-1e-300]])).tolist() == [True, False]


def test_model_rejects_bad_parameters():
    with pytest.raises(DimensionMismatchError):
        EyeContactModel(np.zeros(3), 0.0, 4)
    with pytest.raises(ValueError):
        EyeContactModel(np.array([np.nan]), 0.0, 1)


@given(st.floats(1e-3, 1e3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_prediction_scale_invariant(c, f):
    m = EyeContactModel(np.array([0.5, -1.0, 2.0]), 0.3, 3)
    scaled = EyeContactModel(m.weights * c, m.bias * c, 3)
    x = np.array(f)
    if abs(decision_value(m, x)) < 1e-9:
        return
    assert predict(m, x) == predict(scaled, x)


def test_objective_decreases(rng):
    X = rng.normal(0, 1, (400, 10))
    y = X @ rng.normal(0, 1, 10) + 0.3 * rng.normal(size=400) > 0
    m = train_svm(X, y, SvmHyperParams(lam=1e-2, epochs=15))
    trace = m.objective_trace
    assert len(trace) == 16
    assert trace[-1] <= trace[0]
    yy = np.where(y, 1.0, -1.0)
    assert trace[-1] == pytest.approx(hinge_objective(m.weights, m.bias, X, yy, 1e-2))


def test_margin_separable_reaches_full_accuracy(rng):
    X = rng.normal(0, 1, (300, 5))
    w = np.array([1.0, -2.0, 0.5, 0.0, 1.0])
    s = X @ w
    keep = np.abs(s) > np.linalg.norm(w)  # margin >= 1 after normalising w
    X, y = X[keep], s[keep] > 0
    m = train_svm(X, y)
    assert np.array_equal(predict_batch(m, X), y)


def test_balanced_weights_help_minority(rng):
    n_pos, n_neg = 30, 600
    X = np.vstack([rng.normal(0.8, 1, (n_pos, 2)), rng.normal(-0.8, 1, (n_neg, 2))])
    y = np.r_[np.ones(n_pos, bool), np.zeros(n_neg, bool)]
    plain = train_svm(X, y, SvmHyperParams(lam=1e-2))
    bal = train_svm(X, y, SvmHyperParams(lam=1e-2, class_weight="balanced"))
    recall = lambda m: predict_batch(m, X[:n_pos]).mean()
    assert recall(bal) > recall(plain)


def test_model_dict_round_trip(rng):
    X = rng.normal(0, 1, (50, 3))
    m = train_svm(X, X[:, 0] > 0, SvmHyperParams(seed=11), label_source="clustered")
    d = model_to_dict(m)
    assert list(d)[:7] == ["version", "feature_dim", "weights", "bias", "label_source", "hyperparams", "seed"]
    back = model_from_dict(d)
    assert np.array_equal(back.weights, m.weights) and back.bias == m.bias
    assert back.hyperparams == m.hyperparams and back.label_source == "clustered"
    with pytest.raises(DatasetFormatError):
        model_from_dict({**d, "version": 99})
    with pytest.raises(DatasetFormatError):
        model_from_dict({k: v for k, v in d.items() if k != "weights"})
