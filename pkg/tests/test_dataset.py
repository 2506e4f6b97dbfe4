import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gitm.dataset import (
    TrainingSet,
    TrustLevel,
    TrustVector,
    ZeroVarianceError,
    build_training_set,
    kmeans_cluster,
    label_levels,
    pca_fit,
    pca_transform,
    prepare_dataset,
    read_dataset_csv,
    write_dataset_csv,
)
from gitm.synthetic import level_vectors
from oracles import brute_force_kmeans, covariance_eigen


def test_trust_vector_validation():
    assert len(TrustVector(3, [0.1, 0.5, 1.0])) == 3
    with pytest.raises(ValueError):
        TrustVector(3, [0.1, 1.2])
    with pytest.raises(ValueError):
        TrustVector(3, [[0.1], [0.2]])


# PCA -------------------------------------------------------------------------

def test_pca_line_example():
    model = pca_fit([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert model.n_components == 1
    assert np.abs(model.components[0]) == pytest.approx([1.0, 0.0])
    assert model.explained_variance_ratio[0] == pytest.approx(1.0)


def test_pca_zero_variance():
    with pytest.raises(ZeroVarianceError):
        pca_fit(np.full((5, 3), 0.4))


def test_transform_examples():
    X = np.random.default_rng(0).normal(size=(40, 4))
    model = pca_fit(X, variance_target=1.0, max_components=4)
    assert pca_transform(model, model.mean) == pytest.approx(np.zeros(4), abs=1e-12)
    e1 = pca_transform(model, model.mean + model.components[0])
    assert e1 == pytest.approx(np.eye(4)[0], abs=1e-12)
    v = np.random.default_rng(1).normal(size=4)
    assert pca_transform(model, v) == pytest.approx(model.components @ (v - model.mean))
    with pytest.raises(ValueError):
        pca_transform(model, np.ones(3))


def check_against_eigen_oracle(X) -> None:
    model = pca_fit(X, variance_target=1.0, max_components=X.shape[1])
    vals, vecs = covariance_eigen(X)
    ratios = vals / vals.sum()
    d = model.n_components
    assert model.explained_variance_ratio == pytest.approx(ratios[:d], abs=1e-8)
    for comp, ref in zip(model.components, vecs[:d]):
        # eigenvectors are defined up to sign
        err = min(np.abs(comp - ref).max(), np.abs(comp + ref).max())
        assert err <= 1e-8


@pytest.mark.parametrize("seed", range(50))
def test_pca_matches_eigen_oracle(seed):
    rng = np.random.default_rng(seed)
    # distinct variances per axis keep the eigenvectors well defined
    X = rng.normal(size=(30, 4)) * np.array([3.0, 2.0, 1.0, 0.5]) @ np.linalg.qr(rng.normal(size=(4, 4)))[0]
    check_against_eigen_oracle(X)


def test_pca_component_count_follows_variance_target():
    X = np.random.default_rng(3).normal(size=(200, 6)) * np.array([10, 1, 0.1, 0.1, 0.1, 0.1])
    assert pca_fit(X, 0.90).n_components == 1
    assert pca_fit(X, 0.999, max_components=3).n_components == 2
    assert pca_fit(X, 1.0, max_components=3).n_components == 3


@settings(max_examples=40)
@given(arrays(float, (12, 3), elements=st.floats(0, 1)))
def test_pca_components_orthonormal(X):
    if np.unique(X, axis=0).shape[0] < 2 or np.ptp(X, axis=0).max() < 1e-6:
        return
    model = pca_fit(X, 1.0, 3)
    gram = model.components @ model.components.T
    assert gram == pytest.approx(np.eye(model.n_components), abs=1e-9)


# k-means ---------------------------------------------------------------------

def test_well_separated_1d():
    pts = np.array([0.10, 0.11, 0.50, 0.51, 0.90, 0.91])
    res = kmeans_cluster(pts, 3, seed=0)
    assert sorted(res.means.ravel()) == pytest.approx([0.105, 0.505, 0.905])


def test_too_few_distinct_points():
    with pytest.raises(ValueError):
        kmeans_cluster([[0.0], [0.0], [1.0]], 3)


@pytest.mark.parametrize("seed", range(50))
def test_kmeans_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    X = rng.uniform(0, 1, size=(n, 2))
    res = kmeans_cluster(X, 3, seed=seed)
    assert res.inertia == pytest.approx(brute_force_kmeans(X, 3), abs=1e-9)


@settings(max_examples=40)
@given(arrays(float, (10, 2), elements=st.floats(0, 1)), st.integers(0, 100))
def test_every_point_at_nearest_mean(X, seed):
    if np.unique(X, axis=0).shape[0] < 3:
        return
    res = kmeans_cluster(X, 3, seed=seed)
    d = ((X[:, None, :] - res.means[None, :, :]) ** 2).sum(axis=2)
    assert np.all(d[np.arange(len(X)), res.assignments] <= d.min(axis=1) + 1e-12)
    assert all(b <= a + 1e-12 for a, b in zip(res.inertia_history, res.inertia_history[1:]))


def test_symmetric_points_take_nearest_mean():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    res = kmeans_cluster(X, 3, seed=1)
    assert sorted(res.means[:, 0]) == pytest.approx([0.0, 5.0, 10.0])


# labelling -------------------------------------------------------------------

def test_label_ordering():
    X = np.array([[0.9, 0.9], [0.6, 0.6], [0.2, 0.2]])
    levels, per_cluster = label_levels([0, 1, 2], X)
    assert levels.tolist() == [TrustLevel.HIGHER, TrustLevel.MEDIUM, TrustLevel.LOWER]


def test_label_tie_prefers_larger_cluster():
    X = np.array([[0.6]] * 8 + [[0.1]])
    assignments = [1] * 5 + [0] * 3 + [2]
    _, per_cluster = label_levels(assignments, X)
    assert per_cluster[1] == TrustLevel.HIGHER and per_cluster[0] == TrustLevel.MEDIUM


def test_label_needs_three_clusters():
    with pytest.raises(ValueError):
        label_levels([0, 1, 1], np.ones((3, 2)))


def test_prepare_dataset_recovers_generators():
    rng = np.random.default_rng(5)
    X = np.vstack([level_vectors(lvl, 60, rng=rng) for lvl in (TrustLevel.HIGHER, TrustLevel.MEDIUM, TrustLevel.LOWER)])
    truth = np.repeat([TrustLevel.HIGHER, TrustLevel.MEDIUM, TrustLevel.LOWER], 60)
    data = prepare_dataset(X, seed=0)
    assert np.mean(data.levels == truth) >= 0.95
    assert data.relabel(X[:5]).tolist() == data.levels[:5].tolist()


def test_training_set_filtering():
    levels = np.array([TrustLevel.HIGHER] * 40 + [TrustLevel.MEDIUM] * 35 + [TrustLevel.LOWER] * 25)
    X = np.random.default_rng(0).uniform(size=(100, 10))
    from gitm.dataset import LabeledDataset

    data = LabeledDataset(X, levels, np.arange(100), np.zeros(100, dtype=int))
    ts = build_training_set(data)
    assert len(ts) == 75
    no_lower = LabeledDataset(X[:75], levels[:75], np.arange(75), np.zeros(75, dtype=int))
    assert len(build_training_set(no_lower)) == 75
    no_higher = LabeledDataset(X[40:], levels[40:], np.arange(60), np.zeros(60, dtype=int))
    with pytest.raises(ValueError, match="cannot train"):
        build_training_set(no_higher)


def test_training_set_rejects_lower():
    with pytest.raises(ValueError):
        TrainingSet(np.ones((1, 3)), [TrustLevel.LOWER])


def test_cap_evicts_oldest():
    base = TrainingSet(np.arange(1950, dtype=float)[:, None], np.full(1950, TrustLevel.HIGHER))
    grown = base.extend(np.arange(1950, 2110, dtype=float)[:, None], np.full(160, TrustLevel.MEDIUM)).tail(2000)
    assert len(grown) == 2000
    assert grown.vectors[0, 0] == 110.0 and grown.vectors[-1, 0] == 2109.0


def test_csv_round_trip(tmp_path):
    X = np.random.default_rng(0).uniform(size=(6, 4))
    levels = [TrustLevel.HIGHER, TrustLevel.MEDIUM, TrustLevel.LOWER] * 2
    path = tmp_path / "d.csv"
    write_dataset_csv(path, X, levels, device_ids=range(6), rounds=range(10, 16))
    X2, lv, ids, rnds = read_dataset_csv(path)
    assert np.array_equal(X, X2)
    assert lv.tolist() == [int(l) for l in levels]
    assert ids.tolist() == list(range(6)) and rnds.tolist() == list(range(10, 16))
    write_dataset_csv(path, X)
    assert read_dataset_csv(path)[1] is None
