import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gitm import autoencoder as ae
from gitm.dataset import TrainingSet, TrustLevel
from gitm.decision import (
    Basis,
    TemporaryTrust,
    ThresholdRecommendation,
    Verdict,
    aggregate_thresholds,
    decide,
    decide_batch,
    generic_decide,
    recommend_threshold,
    synergetic_resolve,
)
from oracles import two_means_1d

T, U = Verdict.TRUSTED, Verdict.UNTRUSTED


# model-based decisions -------------------------------------------------------

def test_reconstruction_boundary_is_strict(synthetic_model):
    model, ts = synthetic_model
    v = ts.higher_vectors()[0]
    err = ae.reconstruction_errors(model, v[None, :])[0]
    saved = model.tau_rec
    try:
        model.tau_rec = err - 1e-6
        assert decide(model, v).verdict is U
        assert decide(model, v).basis is Basis.RECONSTRUCTION
        model.tau_rec = err
        assert decide(model, v).verdict is not U
    finally:
        model.tau_rec = saved


def test_decision_table_follows_class_head(synthetic_model):
    model, ts = synthetic_model
    X = ts.vectors
    errs = ae.reconstruction_errors(model, X)
    scores = ae.class_scores(model, X)
    for verdict, err, score in zip(decide_batch(model, X, round=3), errs, scores):
        assert verdict.round == 3
        if err > model.tau_rec:
            assert verdict.verdict is U
        elif score >= 0.5:
            assert verdict.verdict is T and verdict.trusted
        else:
            assert verdict.verdict is Verdict.UNCERTAIN and not verdict.trusted


def test_decide_needs_calibrated_model():
    model = ae.build_model(seed=0)
    with pytest.raises(ae.UntrainedModelError):
        decide(model, np.ones(10))


# synergetic resolution -------------------------------------------------------

def test_two_trusted_recommenders_grant_temporary_trust():
    res = synergetic_resolve({1: T, 2: T}, round=10)
    assert res.verdict is T and res.basis is Basis.SYNERGETIC and res.expires == 15


def test_one_recommender_is_not_enough():
    assert synergetic_resolve({1: T}).verdict is U


def test_untrusted_recommender_filtered():
    res = synergetic_resolve({1: T, 2: T, 3: T}, recommender_trust={1: T, 2: T, 3: U})
    assert res.verdict is T
    res = synergetic_resolve({1: T, 2: T, 3: T}, recommender_trust={1: T, 2: U, 3: U})
    assert res.verdict is U


def test_temporary_trust_expiry():
    grants = TemporaryTrust(rounds=5)
    grants.grant(7, round=10)
    assert grants.active(7, 14)
    assert not grants.active(7, 15)
    assert not grants.active(7, 12)
    grants.grant(8, 0)
    grants.revoke(8)
    assert not grants.active(8, 1)


# threshold recommendation ----------------------------------------------------

def test_trim_example():
    values = [0.95, 0.93, 0.90, 0.88, 0.85, 0.82, 0.80, 0.78]
    assert recommend_threshold(values) == 0.82


def test_trim_small_pools():
    assert recommend_threshold([0.9]) == 0.9
    # floor(1.25) = 1 removed, min of the top four
    assert recommend_threshold([0.5, 0.9, 0.7, 0.8, 0.6]) == 0.6


def test_recommend_from_training_set_uses_higher_rows():
    ts = TrainingSet(
        np.array([[0.9, 0.95], [0.6, 0.62]]), np.array([TrustLevel.HIGHER, TrustLevel.MEDIUM])
    )
    # two Higher values, floor(0.5) = 0 removed; Medium rows ignored
    assert recommend_threshold(ts) == 0.9
    with pytest.raises(ValueError):
        recommend_threshold([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_trim_keeps_the_top_three_quarters(values):
    thr = recommend_threshold(values)
    removed = len(values) // 4
    assert thr == sorted(values)[removed]


def test_aggregation_examples():
    assert aggregate_thresholds([0.80, 0.82, 0.81, 0.30]) == pytest.approx(0.81)
    assert aggregate_thresholds([0.80, 0.81]) == pytest.approx(0.805)
    assert aggregate_thresholds([0.7]) == 0.7
    recs = [ThresholdRecommendation(i, v) for i, v in enumerate([0.80, 0.82, 0.81, 0.30])]
    assert aggregate_thresholds(recs) == pytest.approx(0.81)


def test_aggregation_example_split_matches_oracle():
    values = [0.80, 0.82, 0.81, 0.30]
    mask = two_means_1d(values)
    groups = {tuple(sorted(np.array(values)[mask])), tuple(sorted(np.array(values)[~mask]))}
    assert groups == {(0.30,), (0.80, 0.81, 0.82)}


def test_aggregation_tie_discards_lower_cluster():
    assert aggregate_thresholds([0.2, 0.3, 0.8, 0.9]) == pytest.approx(0.85)


def test_aggregation_needs_input():
    with pytest.raises(ValueError):
        aggregate_thresholds([])
    with pytest.raises(ValueError):
        ThresholdRecommendation(0, 1.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_aggregate_within_range(values):
    out = aggregate_thresholds(values)
    assert min(values) - 1e-12 <= out <= max(values) + 1e-12


@given(st.lists(st.floats(0, 1), min_size=2, max_size=9))
def test_aggregate_against_oracle(values):
    v = np.array(values)
    out = aggregate_thresholds(values)
    if np.ptp(v) == 0:
        assert out == pytest.approx(v.mean())
        return
    mask = two_means_1d(v)
    a, b = v[mask], v[~mask]
    lo, hi = (a, b) if a.mean() < b.mean() else (b, a)
    if hi.mean() - lo.mean() <= 0.15:
        expected = v.mean()
    elif lo.size < hi.size:
        expected = hi.mean()
    elif hi.size < lo.size:
        expected = lo.mean()
    else:
        expected = hi.mean()
    # equal-cost splits can differ from the oracle only when both are optimal
    cost = lambda m: ((v[m] - v[m].mean()) ** 2).sum() + ((v[~m] - v[~m].mean()) ** 2).sum()
    if out != pytest.approx(expected, abs=1e-9):
        alt = [m for m in _contiguous_masks(v) if abs(cost(m) - cost(mask)) < 1e-12]
        assert len(alt) > 1


def _contiguous_masks(v):
    order = np.argsort(v)
    for cut in range(1, v.size):
        m = np.zeros(v.size, dtype=bool)
        m[order[:cut]] = True
        yield m


# generic devices -------------------------------------------------------------

def test_generic_examples():
    assert generic_decide(0.85, 0.81) is T
    assert generic_decide(0.81, 0.81) is T
    assert generic_decide(0.5, 0.81) is U
    with pytest.raises(ValueError):
        generic_decide(1.2, 0.5)


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_generic_monotone(threshold, values):
    verdicts = [generic_decide(v, threshold) for v in sorted(values)]
    switches = sum(a is not b for a, b in zip(verdicts, verdicts[1:]))
    assert switches <= 1
    assert verdicts[0] is U or all(v is T for v in verdicts)
