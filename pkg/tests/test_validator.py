import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetval.metricspace import InvalidInput, MetricSample, distance, sample, similarity
from fleetval.synthetic import planted_cluster, random_samples
from fleetval.validator import (
    ConfigurationError,
    Criteria,
    filter_defects,
    get_centroid,
    iqr_criteria,
    learn_all,
    learn_criteria,
    margin_ratio,
    repeatability,
)
from oracles import centroid_bruteforce, mean_pairwise


def named(values, node, metric="m"):
    return MetricSample(tuple(values), metric, node)


def test_centroid_singleton_and_majority():
    a = named([1, 2, 3], "a")
    assert get_centroid([a]) is a
    b1, b2 = named([5, 5], "b1"), named([5, 5], "b2")
    assert get_centroid([named([1, 1], "a"), b2, b1]).node_id == "b1"


def test_centroid_rejects_empty():
    with pytest.raises(InvalidInput):
        get_centroid([])


@pytest.mark.parametrize("seed", range(5))
def test_centroid_matches_bruteforce(seed):
    samples = random_samples(np.random.default_rng(seed), 10)
    expected = samples[centroid_bruteforce(samples, similarity)]
    assert get_centroid(samples) is expected


def test_identical_samples_have_no_defects():
    samples = [named([3, 4, 5], f"n{i}") for i in range(6)]
    res = learn_criteria(samples)
    assert res.defects == [] and res.iterations == 0
    assert res.criteria.reference_sample.values == (3.0, 4.0, 5.0)


def test_planted_outlier_detected():
    ds = planted_cluster(seed=3)
    res = learn_criteria(ds.samples, 0.95)
    ref = res.criteria.reference_sample
    assert {s.node_id for s in res.defects} == ds.planted
    assert ref.node_id not in ds.planted
    for s in ds.samples:
        sim = similarity(ref, s)
        assert (sim > 0.95) == (s.node_id not in ds.planted)


def test_margin_ratio_on_planted_cluster():
    ds = planted_cluster(seed=3)
    res = learn_criteria(ds.samples)
    bad = {s.node_id for s in res.defects}
    healthy = [s for s in ds.samples if s.node_id not in bad]
    ratio = margin_ratio(res.defects, healthy, res.criteria)
    ref = res.criteria.reference_sample
    manual = min(distance(s, ref) for s in res.defects) / max(distance(s, ref) for s in healthy)
    assert ratio == pytest.approx(manual) and ratio > 1


def test_margin_ratio_arithmetic_and_sentinel():
    ref = named([1, 1], "ref")
    assert margin_ratio([named([0.5, 0.5], "d")], [named([1, 1], "h")], ref) == math.inf
    # distance({1,1},{2,2}) = 0.5; healthy distance from a thin sliver below the reference
    healthy = named([0.95 * 2] + [2] * 9, "h")
    crit = named([2, 2], "ref")
    expected = 0.5 / distance(healthy, crit)
    assert margin_ratio([named([1, 1], "d")], [healthy], crit) == pytest.approx(expected)
    with pytest.raises(InvalidInput):
        margin_ratio([], [healthy], crit)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 15), st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_post_condition_and_termination(seed, n, alpha):
    samples = random_samples(np.random.default_rng(seed), n, size_range=(1, 8))
    res = learn_criteria(samples, alpha)
    ref = res.criteria.reference_sample
    bad = {s.node_id for s in res.defects}
    for s in samples:
        if s.node_id not in bad:
            assert similarity(ref, s) > alpha
    assert res.iterations <= len(samples)
    assert ref.node_id not in bad


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_learning_is_order_independent(seed, rnd):
    samples = random_samples(np.random.default_rng(seed), 9)
    shuffled = list(samples)
    rnd.shuffle(shuffled)
    a, b = learn_criteria(samples), learn_criteria(shuffled)
    assert a.criteria == b.criteria
    assert [s.node_id for s in a.defects] == [s.node_id for s in b.defects]


def test_filter_defects_examples():
    crit = Criteria("m", named([2, 2], "ref"), 0.95)
    verdicts = filter_defects([named([2, 2], "same"), named([9, 9], "fast"), named([1, 1], "slow")], [crit])
    by = {v.node_id: v for v in verdicts}
    assert by["same"].scores["m"] == 1.0 and not by["same"].defect
    assert not by["fast"].defect
    assert by["slow"].defect and by["slow"].scores["m"] == pytest.approx(0.5)
    assert by["slow"].violating_metrics == ["m"]


def test_filter_defects_any_metric_flags_node():
    crit = {"a": Criteria("a", named([2, 2], "r", "a")), "b": Criteria("b", named([2, 2], "r", "b"))}
    v = filter_defects([named([2, 2], "n", "a"), named([1, 1], "n", "b")], crit)
    assert len(v) == 1 and v[0].defect and v[0].violating_metrics == ["b"]


def test_filter_defects_missing_criteria_names_metric():
    with pytest.raises(ConfigurationError, match="'latency'"):
        filter_defects([named([1], "n", "latency")], {})


def test_repeatability_closed_forms():
    a, b = named([1, 1], "a"), named([2, 2], "b")
    assert repeatability([a, a, a]) == 1.0
    s = similarity(a, b)
    assert repeatability([a, named([1, 1], "a2"), b]) == pytest.approx((1 + 2 * s) / 3)
    with pytest.raises(InvalidInput):
        repeatability([a])


def test_repeatability_matches_all_pairs_oracle():
    samples = random_samples(np.random.default_rng(11), 20)
    assert repeatability(samples) == pytest.approx(mean_pairwise(samples, similarity), abs=1e-12)


def test_iqr_baseline_flags_low_means():
    ds = planted_cluster(seed=1, n_marginal=2)
    res = iqr_criteria(ds.samples)
    flagged = {s.node_id for s in res.defects}
    assert ds.planted <= flagged
    assert res.reference_sample.node_id not in flagged


def test_learn_all_groups_by_metric():
    samples = [named([1, 1], "n1", "a"), named([1, 1], "n2", "a"), named([5], "n1", "b")]
    out = learn_all(samples)
    assert sorted(out) == ["a", "b"]
    assert out["b"].criteria.reference_sample.values == (5.0,)


def test_mixed_metrics_rejected():
    with pytest.raises(InvalidInput):
        learn_criteria([named([1], "a", "x"), named([1], "b", "y")])


def test_alpha_bounds():
    with pytest.raises(InvalidInput):
        learn_criteria([sample([1])], alpha=1.0)
    with pytest.raises(InvalidInput):
        Criteria("m", sample([1], "m"), alpha=0.0)
