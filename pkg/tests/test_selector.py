import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetval.hazard import ExponentialModel, NodeStatus
from fleetval.selector import (
    BenchmarkInfo,
    CoverageTable,
    incident_prob,
    joint_incident_probability,
    p0_from_job_duration,
    select_benchmarks,
    select_from_probability,
)
from oracles import exhaustive_selection

H = 3600


def bench(bid, hours, defects):
    return BenchmarkInfo(bid, hours * H, frozenset(defects))


def worked_table():
    return CoverageTable([bench("B1", 1, {"M1", "M2"}), bench("B2", 1, {"M2", "M3", "M4"}),
                          bench("B3", 1, {f"M{i}" for i in range(5, 11)})])


def test_worked_coverage_example():
    t = worked_table()
    assert t.coverage(["B1"]) == 0.2
    assert t.coverage(["B2"]) == 0.3
    assert t.coverage(["B1", "B2"]) == 0.4
    assert t.coverage(t.ids) == 1.0


def test_empty_history_coverage():
    t = CoverageTable([bench("a", 1, set()), bench("b", 1, set())])
    assert t.coverage([]) == 0.0 and t.coverage(["a"]) == 0.0
    assert t.coverage(["a", "b"]) == 1.0


def test_unknown_benchmark_rejected():
    with pytest.raises(ValueError, match="zzz"):
        worked_table().coverage(["zzz"])


def test_independence_formula():
    rate = -math.log(0.9) / 24.0
    nodes = [NodeStatus("a"), NodeStatus("b")]
    model = ExponentialModel(rate)
    assert joint_incident_probability(nodes, model, 24.0) == pytest.approx(0.19)
    t = worked_table()
    assert incident_prob(nodes, [], model, 24.0, t) == pytest.approx(0.19)
    assert incident_prob(nodes, t.ids, model, 24.0, t) == 0.0


def test_skip_when_below_threshold():
    out = select_from_probability(0.05, worked_table(), 0.1)
    assert out.chosen == [] and out.skipped and out.to_record()["status"] == "skipped"


def test_single_full_cover_benchmark():
    t = CoverageTable([bench("all", 2, {"x", "y"}), bench("half", 1, {"x"})])
    out = select_from_probability(0.5, t, 0.1)
    assert out.chosen == ["all"] and out.residual_probability == 0.0


def test_greedy_rate_and_tie_break():
    t = CoverageTable([bench("b", 1, {"1"}), bench("a", 1, {"2"}), bench("c", 4, {"3", "4"})])
    out = select_from_probability(1.0, t, 0.6)
    # a and b tie on decrement per hour; the lower id wins.
    assert out.chosen == ["a", "b"]
    assert out.residual_probability == pytest.approx(0.5)


def test_p0_helper():
    assert p0_from_job_duration(24.0, 24.0) == pytest.approx(1 - math.exp(-1))
    with pytest.raises(ValueError):
        p0_from_job_duration(0, 1)


def random_instance(rng):
    n = int(rng.integers(1, 11))
    universe = [f"d{i}" for i in range(int(rng.integers(0, 25)))]
    covers, hours = {}, {}
    for i in range(n):
        k = int(rng.integers(0, len(universe) + 1))
        covers[f"b{i}"] = set(rng.choice(universe, size=k, replace=False)) if k else set()
        hours[f"b{i}"] = float(rng.uniform(0.1, 5.0))
    return covers, hours


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 1.0), st.floats(0.01, 0.99))
def test_greedy_against_exhaustive(seed, p, p0):
    covers, hours = random_instance(np.random.default_rng(seed))
    table = CoverageTable(bench(b, hours[b], covers[b]) for b in covers)
    out = select_from_probability(p, table, p0)
    assert out.residual_probability <= p0 or sorted(out.chosen) == table.ids
    assert len(set(out.chosen)) == len(out.chosen) <= len(table)
    best = exhaustive_selection(p, p0, covers, hours)
    assert best is not None  # the full set always reaches zero residual
    assert out.total_time_hours >= best[1] - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_order_invariance(seed, rnd):
    covers, hours = random_instance(np.random.default_rng(seed))
    infos = [bench(b, hours[b], covers[b]) for b in covers]
    shuffled = list(infos)
    rnd.shuffle(shuffled)
    a = select_from_probability(0.9, CoverageTable(infos), 0.2)
    b = select_from_probability(0.9, CoverageTable(shuffled), 0.2)
    assert a == b


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_coverage_monotone(seed):
    covers, hours = random_instance(np.random.default_rng(seed))
    table = CoverageTable(bench(b, hours[b], covers[b]) for b in covers)
    ids = table.ids
    for i in range(len(ids)):
        assert table.coverage(ids[:i]) <= table.coverage(ids[: i + 1])


def test_select_benchmarks_high_risk():
    nodes = [NodeStatus(f"n{i}") for i in range(16)]
    out = select_benchmarks(nodes, worked_table(), ExponentialModel(0.05), p0=0.1, horizon_hours=24)
    assert out.initial_probability > 0.99
    assert out.chosen and out.residual_probability <= 0.1


def test_duplicate_benchmark_ids_rejected():
    with pytest.raises(ValueError):
        CoverageTable([bench("a", 1, {"x"}), bench("a", 2, {"y"})])


def test_benchmark_time_must_be_positive():
    with pytest.raises(ValueError):
        bench("a", 0, {"x"})
