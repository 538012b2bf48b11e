import numpy as np
import pytest

from intercom.forest import SchemaError, load_forest, train_forest


def _separable(n, seed, noise=0.0):
    """Generator oracle: label 1 iff x0 + x1 > 1 (plus optional label noise)."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for _ in range(n):
        x0, x1, x2 = rng.uniform(0, 1, size=3)
        label = int(x0 + x1 > 1.0)
        if noise and rng.random() < noise:
            label = 1 - label
        X.append({"x0": x0, "x1": x1, "noise": x2})
        y.append(label)
    return X, y


def test_separable_holdout_accuracy():
    X, y = _separable(500, seed=0)
    forest = train_forest(X[:350], y[:350], trees=40, seed=1)
    pred = forest.predict(X[350:])
    accuracy = np.mean([p == t for p, t in zip(pred, y[350:])])
    assert accuracy >= 0.95


def test_label_independent_accuracy_near_prior():
    rng = np.random.default_rng(5)
    X, _ = _separable(900, seed=5)
    y = [int(rng.random() < 0.6) for _ in X]  # labels independent of features
    forest = train_forest(X[:600], y[:600], trees=40, seed=2)
    pred = forest.predict(X[600:])
    accuracy = np.mean([p == t for p, t in zip(pred, y[600:])])
    prior = max(np.mean(y[600:]), 1 - np.mean(y[600:]))
    assert abs(accuracy - prior) <= 0.06


def test_single_class_rejected():
    X, _ = _separable(10, seed=0)
    with pytest.raises(ValueError):
        train_forest(X, [1] * len(X), trees=5, seed=0)


def test_too_small_rejected():
    with pytest.raises(ValueError):
        train_forest([{"x": 1.0}], [0], trees=5, seed=0)


def test_nan_rejected():
    with pytest.raises(ValueError):
        train_forest([{"x": float("nan")}, {"x": 1.0}], [0, 1], trees=5, seed=0)


def test_schema_mismatch_rejected():
    X, y = _separable(50, seed=1)
    forest = train_forest(X, y, trees=5, seed=0)
    with pytest.raises(SchemaError):
        forest.predict_proba({"wrong": 1.0, "keys": 2.0, "here": 3.0})
    with pytest.raises(SchemaError):
        train_forest([{"a": 1.0}, {"b": 2.0}], [0, 1], trees=5, seed=0)


def test_probabilities_valid():
    X, y = _separable(200, seed=2, noise=0.2)
    forest = train_forest(X, y, trees=20, seed=3)
    proba = forest.predict_proba(X[:50])
    assert proba.shape == (50, 2)
    assert np.all(proba >= 0) and np.all(proba <= 1)
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_unanimous_probability_on_clean_point():
    X, y = _separable(300, seed=3)
    forest = train_forest(X, y, trees=25, seed=4)
    proba = forest.predict_proba({"x0": 0.99, "x1": 0.99, "noise": 0.5})
    assert proba[0][forest.classes.index(1)] == pytest.approx(1.0)


def test_seed_reproducibility():
    X, y = _separable(150, seed=4)
    a = train_forest(X, y, trees=15, seed=9)
    b = train_forest(X, y, trees=15, seed=9)
    grid = [{"x0": i / 10, "x1": j / 10, "noise": 0.3} for i in range(10) for j in range(10)]
    assert np.array_equal(a.predict_proba(grid), b.predict_proba(grid))
    c = train_forest(X, y, trees=15, seed=10)
    assert not np.array_equal(a.predict_proba(grid), c.predict_proba(grid))


def test_oob_accuracy_reported():
    X, y = _separable(300, seed=6)
    forest = train_forest(X, y, trees=30, seed=0)
    assert forest.oob_accuracy is not None
    assert forest.oob_accuracy >= 0.9


def test_save_load_roundtrip(tmp_path):
    X, y = _separable(100, seed=7)
    forest = train_forest(X, y, trees=10, seed=0)
    path = tmp_path / "model.bin"
    forest.save(path)
    loaded = load_forest(path)
    assert loaded.schema == forest.schema
    assert np.array_equal(loaded.predict_proba(X[:20]), forest.predict_proba(X[:20]))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    import pickle

    with open(path, "wb") as fh:
        pickle.dump({"something": "else"}, fh)
    with pytest.raises(ValueError):
        load_forest(path)
