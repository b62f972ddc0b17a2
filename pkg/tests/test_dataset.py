import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traveldist.dataset import (FEATURE_NAMES, N_FEATURES, AssemblyError, BalanceError, Normalizer, Projection,
                                SplitPlan, assemble, fit_normalizer, jacobi_eigh, pca_fit, pearson_matrix,
                                read_vectors, split_and_balance, to_arrays, write_vectors)
from traveldist.features import featurize
from traveldist.geo import PorAssignment

from conftest import tiny_corpus


def _rows():
    c = tiny_corpus()
    por = {"A": PorAssignment("A", "D0", "type_A"), "B": PorAssignment("B", "D1", "type_A")}
    return featurize(c, por).rows


def test_vector_length_and_region_indicator():
    vecs = assemble(_rows())
    assert all(len(v.values) == N_FEATURES == 25 for v in vecs)
    east = dict(zip(FEATURE_NAMES, vecs[0].values))
    assert [east[f"region_{r}"] for r in ("north", "central", "south", "east", "island")] == [1, 0, 0, 0, 0]


def test_east_region_one_hot():
    from dataclasses import replace
    r = _rows()[0]
    r = replace(r, provider=replace(r.provider, region_onehot=(0, 0, 0, 1, 0)))
    vals = dict(zip(FEATURE_NAMES, assemble([r])[0].values))
    assert (vals["region_north"], vals["region_central"], vals["region_south"], vals["region_east"],
            vals["region_island"]) == (0, 0, 0, 1, 0)


def test_identical_visits_identical_vectors():
    r = _rows()[0]
    a, b = assemble([r, r])
    assert a.values == b.values


def test_non_finite_feature_is_an_assembly_error():
    from dataclasses import replace
    r = _rows()[0]
    bad = replace(r, incident=replace(r.incident, dir=float("nan")))
    with pytest.raises(AssemblyError, match="dir"):
        assemble([bad])


def test_vectors_csv_round_trip(tmp_path):
    vecs = assemble(_rows())
    write_vectors(tmp_path / "f.csv", vecs)
    assert read_vectors(tmp_path / "f.csv") == vecs


def test_normalizer_endpoints_constant_and_clip():
    X = np.array([[0.0, 5.0, 1.0], [10.0, 5.0, -1.0], [5.0, 5.0, 1.0]])
    n = fit_normalizer(X, numeric=np.array([True, True, False]))
    Z = n.apply(X)
    assert Z[:, 0].tolist() == [-1.0, 1.0, 0.0]
    assert Z[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert Z[:, 2].tolist() == [1.0, -1.0, 1.0]
    assert n.apply(np.array([[20.0, 7.0, 1.0]]))[0, 0] == 1.0
    assert Normalizer.from_json(n.to_json()).apply(X).tolist() == Z.tolist()


def test_constant_indicator_maps_to_baseline():
    # an indicator stuck at -1 on the training split would otherwise sit at distance 1 from the zero baseline
    X = np.array([[0.0, -1.0], [4.0, -1.0]])
    n = fit_normalizer(X, numeric=np.array([True, False]))
    assert n.apply(X)[:, 1].tolist() == [0.0, 0.0]
    assert n.apply(np.array([[2.0, 1.0]]))[0].tolist() == [0.0, 0.0]
    assert n.inverse(n.apply(X))[:, 1].tolist() == [-1.0, -1.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**31))
def test_normalized_range_and_inverse(n, d, seed):
    X = np.random.default_rng(seed).normal(size=(n, d)) * 50
    norm = fit_normalizer(X)
    Z = norm.apply(X)
    assert np.all((Z >= -1) & (Z <= 1))
    varying = X.max(axis=0) > X.min(axis=0)
    assert np.allclose(norm.inverse(Z)[:, varying], X[:, varying], atol=1e-9)


def test_balance_example():
    y = np.repeat([0, 1, 2, 3], [100, 50, 25, 60])
    plan = split_and_balance(y, seed=0, train_fraction=1.0)
    assert np.bincount(y[plan.balanced]).tolist() == [25, 25, 25, 25]
    assert len(plan.balanced) == 100


def test_already_balanced_is_unchanged():
    y = np.repeat([0, 1, 2, 3], 10)
    plan = split_and_balance(y, seed=3, train_fraction=1.0)
    assert plan.balanced.tolist() == list(range(40))


def test_same_seed_same_plan(tmp_path):
    y = np.random.default_rng(0).integers(0, 4, 500)
    a, b = split_and_balance(y, 11), split_and_balance(y, 11)
    assert a.to_json() == b.to_json()
    a.save(tmp_path / "s.json")
    assert SplitPlan.load(tmp_path / "s.json").to_json() == a.to_json()


def test_absent_class_is_a_balance_error():
    with pytest.raises(BalanceError):
        split_and_balance(np.array([0, 1, 2] * 10), 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 60), min_size=4, max_size=4), st.integers(0, 10_000), st.integers(2, 6))
def test_balance_invariants(counts, seed, k):
    y = np.random.default_rng(seed).permutation(np.repeat([0, 1, 2, 3], counts))
    plan = split_and_balance(y, seed, train_fraction=1.0, n_folds=k)
    m = min(counts)
    assert np.bincount(y[plan.balanced], minlength=4).tolist() == [m] * 4
    assert len(plan.balanced) == 4 * m
    folds = np.concatenate(plan.folds)
    assert sorted(folds.tolist()) == plan.balanced.tolist()
    sizes = [len(f) for f in plan.folds]
    assert max(sizes) - min(sizes) <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_split_partitions_rows(seed):
    y = np.random.default_rng(seed).integers(0, 4, 300)
    plan = split_and_balance(y, seed)
    assert len(np.intersect1d(plan.train, plan.test)) == 0
    assert len(plan.train) + len(plan.test) == 300
    assert set(plan.balanced.tolist()) <= set(plan.train.tolist())


def test_pearson_against_numpy(rng):
    X = rng.normal(size=(200, 5))
    X[:, 3] = X[:, 0] + 0.01 * rng.normal(size=200)
    X[:, 4] = 2.0
    res = pearson_matrix(X, list("abcde"))
    oracle = np.corrcoef(X[:, :4], rowvar=False)
    assert np.allclose(res.matrix[:4, :4], oracle, atol=1e-12)
    assert res.constant == ("e",)
    assert res.matrix[4].tolist() == [0.0] * 5
    assert [(a, b) for a, b, _ in res.flagged] == [("a", "d")]
    assert abs(res.flagged[0][2]) > 0.99


def test_jacobi_matches_library_eigh(rng):
    A = rng.normal(size=(8, 8))
    A = A @ A.T
    w, V = jacobi_eigh(A)
    assert np.allclose(w, np.linalg.eigvalsh(A)[::-1], rtol=1e-10)
    assert np.allclose(A @ V, V * w, atol=1e-9)
    assert np.allclose(V.T @ V, np.eye(8), atol=1e-12)


def test_pca_rank_one_line():
    t = np.linspace(-1, 1, 50)
    X = np.column_stack([t, 2 * t, -t])
    assert pca_fit(X).k == 1


def test_pca_isotropic_2d(rng):
    p = pca_fit(rng.normal(size=(5000, 2)))
    assert p.k == 2
    assert p.explained_ratio[0] == pytest.approx(0.5, abs=0.03)


def _minimal_k(X, target=0.95):
    w = np.linalg.eigvalsh(np.cov(X, rowvar=False))[::-1].clip(min=0)
    cum = np.cumsum(w) / w.sum()
    return int(np.argmax(cum >= target)) + 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 10))
def test_pca_k_is_minimal(seed, d):
    r = np.random.default_rng(seed)
    X = r.normal(size=(80, d)) @ r.normal(size=(d, d))
    p = pca_fit(X)
    cum = np.cumsum(p.explained_ratio)
    assert cum[p.k - 1] >= 0.95 - 1e-12
    assert p.k == 1 or cum[p.k - 2] < 0.95
    assert p.k == _minimal_k(X)


def test_pca_round_trip_and_reconstruction(rng):
    X = rng.normal(size=(100, 4))
    p = pca_fit(X, k=4)
    assert np.allclose(p.reconstruct(p.apply(X)), X, atol=1e-10)
    q = Projection.from_json(p.to_json())
    assert np.array_equal(q.apply(X), p.apply(X))


def test_to_arrays_shapes():
    X, y = to_arrays(assemble(_rows()))
    assert X.shape == (4, 25) and y.dtype.kind == "i"
