import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traveldist.baselines import (SVM_CONFIG, DimensionError, ForestConfig, LinearConfig, gini, grow_tree,
                                  load_baseline, svm_objective, train_forest, train_logreg_ovr, train_svm_ovr)


def _blobs(rng, n=400, d=5, sep=3.0):
    y = rng.integers(0, 4, n)
    centers = rng.normal(size=(4, d)) * sep
    return centers[y] + rng.normal(size=(n, d)), y


def test_logistic_one_dimensional_boundary(rng):
    x = rng.uniform(-1, 1, 400)
    x = x + np.sign(x) * 0.05
    y = np.where(x > 0, 1, 0)
    m = train_logreg_ovr(x[:, None], y, LinearConfig(max_iter=2000))
    # the boundary of the class-1 scorer is at -b/w
    boundary = -m.b[1] / m.W[1, 0]
    assert abs(boundary) < 0.1
    assert np.all(m.predict(x[:, None])[0] == y)


def test_logistic_duplicated_training_set(rng):
    X, y = _blobs(rng, 120)
    a = train_logreg_ovr(X, y, LinearConfig(max_iter=50))
    b = train_logreg_ovr(np.vstack([X, X]), np.r_[y, y], LinearConfig(max_iter=50))
    assert np.allclose(a.W, b.W, atol=1e-10) and np.allclose(a.b, b.b, atol=1e-10)


def test_logistic_single_class_predicts_it(rng):
    X = rng.normal(size=(50, 3))
    m = train_logreg_ovr(X, np.full(50, 2))
    assert np.all(m.predict(X)[0] == 2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_logistic_loss_never_increases(seed):
    r = np.random.default_rng(seed)
    X, y = _blobs(r, 150, 4, sep=1.0)
    m = train_logreg_ovr(X, y, LinearConfig(max_iter=100, tol=0.0))
    for trace in m.history:
        assert np.all(np.diff(trace) <= 1e-12)


def test_logistic_matches_library_optimum(rng):
    sk = pytest.importorskip("sklearn.linear_model")
    X, y = _blobs(rng, 300, 3, sep=0.6)
    m = train_logreg_ovr(X, y, LinearConfig(max_iter=20_000, tol=1e-13))
    ref = sk.LogisticRegression(penalty=None, tol=1e-10, max_iter=10_000).fit(X, (y == 0).astype(int))
    assert np.allclose(m.W[0], ref.coef_[0], atol=1e-3)
    assert m.b[0] == pytest.approx(ref.intercept_[0], abs=1e-3)


def test_svm_matches_library_objective(rng):
    svm = pytest.importorskip("sklearn.svm")
    X, y = _blobs(rng, 300, 4, sep=0.8)
    m = train_svm_ovr(X, y, C=0.2, config=LinearConfig(max_iter=5000, tol=1e-6))
    assert m.converged
    for c in range(4):
        t = np.where(y == c, 1.0, -1.0)
        ref = svm.LinearSVC(C=0.2, loss="hinge", dual=True, tol=1e-8, max_iter=200_000).fit(X, t)
        ours = svm_objective(m.W[c], m.b[c], X, t, 0.2)
        theirs = svm_objective(ref.coef_[0], ref.intercept_[0], X, t, 0.2)
        assert ours <= theirs * (1 + 1e-5)


def test_svm_margin_data_has_zero_hinge():
    X = np.array([[-2.0], [-3.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = train_svm_ovr(X, y, C=10.0, config=LinearConfig(max_iter=5000, tol=1e-8))
    t = np.where(y == 1, 1.0, -1.0)
    assert np.all(t * (X[:, 0] * m.W[1, 0] + m.b[1]) >= 1 - 1e-6)


def test_svm_zero_c_gives_zero_weights(rng):
    X, y = _blobs(rng, 60)
    m = train_svm_ovr(X, y, C=0.0)
    assert np.all(m.W == 0) and np.all(m.b == 0)


def test_svm_budget_exhaustion_is_flagged(rng):
    X, y = _blobs(rng, 300, 4, sep=0.3)
    m = train_svm_ovr(X, y, C=10.0, config=LinearConfig(max_iter=2, tol=1e-12))
    assert m.converged is False


def test_gini_values():
    assert gini(np.array([5, 0, 0, 0])) == 0.0
    assert gini(np.array([1, 1, 1, 1])) == pytest.approx(0.75)
    assert gini(np.array([3, 1])) == pytest.approx(1 - (0.75 ** 2 + 0.25 ** 2))


def test_threshold_concept(rng):
    X = rng.uniform(0, 1, size=(2000, 3))
    y = (X[:, 1] > 0.37).astype(int) * 3
    f = train_forest(X[:1000], y[:1000], ForestConfig(n_trees=10, feature_subset=2, seed=1))
    assert np.mean(f.predict(X[1000:])[0] == y[1000:]) >= 0.95


def test_single_tree_memorizes(rng):
    X = rng.normal(size=(300, 4))
    y = rng.integers(0, 4, 300)
    t = grow_tree(X, y, np.random.default_rng(0), feature_subset=2)
    assert np.all(t.predict_proba(X).argmax(axis=1) == y)
    f = train_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, seed=2))
    assert np.all(f.predict(X)[0] == y)


def test_root_split_matches_library_tree(rng):
    tree = pytest.importorskip("sklearn.tree")
    X = rng.normal(size=(500, 3))
    y = (X[:, 2] > 0.3).astype(int) + (X[:, 0] > 1.0).astype(int)
    ours = grow_tree(X, y, np.random.default_rng(0), feature_subset=3)
    ref = tree.DecisionTreeClassifier(random_state=0).fit(X, y).tree_
    assert ours.feature[0] == ref.feature[0]
    # the library casts features to float32, so its midpoint is only float32-accurate
    assert ours.threshold[0] == pytest.approx(ref.threshold[0], abs=1e-6)


def test_forest_deterministic_and_normalized(rng, tmp_path):
    X, y = _blobs(rng, 300)
    cfg = ForestConfig(n_trees=8, seed=11)
    a, b = train_forest(X, y, cfg), train_forest(X, y, cfg)
    pa = a.predict_proba(X)
    assert np.array_equal(pa, b.predict_proba(X))
    assert np.allclose(pa.sum(axis=1), 1.0, atol=1e-12)
    a.save(tmp_path / "rf")
    assert np.array_equal(load_baseline(tmp_path / "rf").predict_proba(X), pa)


def test_linear_models_round_trip(rng, tmp_path):
    X, y = _blobs(rng, 100)
    for model in (train_logreg_ovr(X, y), train_svm_ovr(X, y)):
        model.save(tmp_path / model.kind)
        loaded = load_baseline(tmp_path / model.kind)
        assert np.array_equal(loaded.predict(X)[1], model.predict(X)[1])


def test_empty_and_mismatched_inputs(rng):
    X, y = _blobs(rng, 80)
    for model in (train_logreg_ovr(X, y), train_svm_ovr(X, y), train_forest(X, y, ForestConfig(n_trees=2))):
        labels, scores = model.predict(np.zeros((0, 5)))
        assert len(labels) == 0
        assert model.predict(X[:3])[1].shape == (3, 4)
        with pytest.raises(DimensionError):
            model.predict(np.zeros((2, 7)))


def test_all_learners_beat_majority(small_synth_arrays):
    Xtr, ytr, Xte, yte = small_synth_arrays
    majority = np.mean(yte == np.bincount(ytr).argmax())
    for model in (train_logreg_ovr(Xtr, ytr), train_svm_ovr(Xtr, ytr),
                  train_forest(Xtr, ytr, ForestConfig(n_trees=20, seed=0))):
        assert np.mean(model.predict(Xte)[0] == yte) > majority
