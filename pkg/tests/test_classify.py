import numpy as np
import pytest

from tcfinger.classify import (
    SvmModel,
    accuracy,
    cross_validate,
    load_svm,
    predict,
    predict_many,
    save_svm,
    stratified_folds,
    train,
)
from tcfinger.errors import BadInput, ConfigError, DegenerateLabels, StratifyError


def _blobs(n=20, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal([-3.0, 0.0, 5.0], 0.3, (n, 3))
    b = rng.normal([3.0, 1.0, 5.0], 0.3, (n, 3))
    return np.vstack([a, b]), ["open"] * n + ["close"] * n


def _xor(copies=5):
    centers = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    X = np.repeat(centers, copies, axis=0)
    y = ["same"] * (2 * copies) + ["diff"] * (2 * copies)
    return X, y


@pytest.mark.parametrize("kernel", ["linear", "polynomial", "rbf"])
def test_separable_blobs_are_learned(kernel):
    X, y = _blobs()
    model = train(X, y, kernel=kernel, epochs=50)
    assert model.classes == ["close", "open"]
    assert accuracy(model, X, y) == 1.0


def test_xor_needs_a_nonlinear_kernel():
    X, y = _xor()
    linear = train(X, y, kernel="linear", epochs=50)
    rbf = train(X, y, kernel="rbf", epochs=50)
    assert accuracy(linear, X, y) <= 0.75
    assert accuracy(rbf, X, y) == 1.0


def test_ties_go_to_first_class():
    model = SvmModel(
        kernel="linear", classes=["a", "b"], mean=np.zeros(2), std=np.ones(2), keep=np.array([True, True]),
        support=np.eye(2), coef=np.zeros((2, 2)), gamma=0.0, coef0=0.0, degree=3,
    )
    assert predict(model, [5.0, -5.0]) == "a"


def test_predictions_do_not_depend_on_feature_scale():
    X, y = _blobs(seed=1)
    scale = np.array([1000.0, 0.01, 7.0])
    shift = np.array([-50.0, 3.0, 0.0])
    test = _blobs(n=5, seed=2)[0]
    plain = train(X, y, kernel="rbf", epochs=30, seed=4)
    scaled = train(X * scale + shift, y, kernel="rbf", epochs=30, seed=4)
    assert predict_many(plain, test) == predict_many(scaled, test * scale + shift)


def test_linear_decision_function_is_affine():
    X, y = _blobs()
    model = train(X, y, kernel="linear", epochs=20)
    a, b = X[0], X[-1]
    mid = model.decision_function((a + b) / 2.0)
    ends = (model.decision_function(a) + model.decision_function(b)) / 2.0
    assert np.allclose(mid, ends)


def test_training_is_deterministic_for_a_seed():
    X, y = _blobs()
    first = train(X, y, kernel="rbf", epochs=20, seed=11)
    second = train(X, y, kernel="rbf", epochs=20, seed=11)
    assert np.array_equal(first.coef, second.coef)


def test_identical_samples_predict_a_single_class():
    X = np.ones((12, 4))
    y = ["a", "b", "c"] * 4
    model = train(X, y, kernel="linear", epochs=10)
    assert len(set(predict_many(model, X))) == 1
    assert accuracy(model, X, y) == pytest.approx(1.0 / 3.0)


def test_shuffled_labels_stay_near_chance():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(100, 4))
    y = ["a", "b"] * 50
    result = cross_validate(X, y, folds=5, kernels=["linear"], epochs=20, seed=8)
    assert 0.3 <= result["linear"] <= 0.7


def test_cross_validate_separable_blobs():
    X, y = _blobs()
    result = cross_validate(X, y, folds=5, kernels=["linear", "rbf"], epochs=20)
    assert result == {"linear": 1.0, "rbf": 1.0}


def test_parallel_cross_validation_matches_serial():
    X, y = _blobs(n=10)
    serial = cross_validate(X, y, folds=2, kernels=["linear"], epochs=10)
    parallel = cross_validate(X, y, folds=2, kernels=["linear"], epochs=10, workers=2)
    assert serial == parallel


def test_stratified_folds_keep_class_balance():
    y = ["a"] * 10 + ["b"] * 5
    splits = stratified_folds(y, 5, seed=3)
    assert sorted(np.concatenate(splits).tolist()) == list(range(15))
    for test_idx in splits:
        assert sum(1 for i in test_idx if y[i] == "a") == 2
        assert sum(1 for i in test_idx if y[i] == "b") == 1


def test_class_smaller_than_folds():
    with pytest.raises(StratifyError):
        stratified_folds(["a"] * 10 + ["b"] * 3, 5)


@pytest.mark.parametrize("labels", [["a"] * 6, ["a"] * 5 + ["b"]])
def test_degenerate_labels(labels):
    with pytest.raises(DegenerateLabels):
        train(np.arange(12.0).reshape(6, 2), labels)


def test_non_finite_features():
    X, y = _blobs()
    X[3, 1] = np.nan
    with pytest.raises(BadInput):
        train(X, y)


def test_unknown_kernel():
    X, y = _blobs()
    with pytest.raises(ConfigError):
        train(X, y, kernel="laplace")


def test_saved_model_predicts_the_same(tmp_path):
    X, y = _blobs()
    model = train(X, y, kernel="polynomial", epochs=20)
    path = str(tmp_path / "svm.json")
    save_svm(path, model)
    assert predict_many(load_svm(path), X) == predict_many(model, X)
