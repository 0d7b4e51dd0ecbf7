import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetval.metricspace import InvalidInput
from fleetval.netscan import (
    FatTreeTopology,
    ScanRound,
    ScanSchedule,
    hop_distance,
    lca_tier,
    plan_full_scan,
    plan_quick_scan,
    verify_schedule,
)
from oracles import lca_tier_bruteforce


def check_full(schedule, ids):
    n = len(ids)
    assert len(schedule.rounds) == n - 1
    seen = set()
    for rnd in schedule.rounds:
        flat = [x for p in rnd.pairs for x in p]
        assert sorted(flat) == sorted(ids)
        seen.update(frozenset(p) for p in rnd.pairs)
    assert seen == {frozenset(p) for p in itertools.combinations(ids, 2)}


def test_full_scan_small_cases():
    s = plan_full_scan([1, 2])
    assert [r.pairs for r in s.rounds] == [[(1, 2)]]
    check_full(plan_full_scan([1, 2, 3, 4]), [1, 2, 3, 4])
    s16 = plan_full_scan(range(16))
    check_full(s16, list(range(16)))
    assert all(len(r.pairs) == 8 for r in s16.rounds)


def test_full_scan_odd_count_uses_bye():
    s = plan_full_scan("abcde")
    assert len(s.rounds) == 5
    assert all(len(r.pairs) == 2 for r in s.rounds)
    assert verify_schedule(s, "full").ok


def test_full_scan_rejects_bad_input():
    with pytest.raises(InvalidInput):
        plan_full_scan(["only"])
    with pytest.raises(InvalidInput):
        plan_full_scan(["a", "a"])


def test_verifier_names_duplicated_pair():
    s = plan_full_scan(range(4))
    s.rounds[2].pairs[0] = s.rounds[0].pairs[0]
    report = verify_schedule(s, "full", nodes=range(4))
    assert not report.ok
    assert any("rounds 0 and 2" in v for v in report.violations)


def test_quick_scan_two_tier_example():
    topo = FatTreeTopology.regular([2], 2)
    s = plan_quick_scan(topo)
    assert len(s.rounds) == 2
    assert len(s.rounds[0].pairs) == 2 and len(s.rounds[1].pairs) == 2
    for h, rnd in enumerate(s.rounds, start=1):
        assert sorted(x for p in rnd.pairs for x in p) == sorted(topo.node_tor)
        assert all(lca_tier_bruteforce(topo, *p) == h for p in rnd.pairs)
    assert verify_schedule(s, topology=topo).ok


def test_quick_scan_single_tor():
    topo = FatTreeTopology.build(1, [{"id": "tor", "tier": 1}], [{"id": "a", "tor": "tor"}, {"id": "b", "tor": "tor"}])
    s = plan_quick_scan(topo)
    assert [r.pairs for r in s.rounds] == [[("a", "b")]]


def test_quick_scan_three_tier():
    topo = FatTreeTopology.regular([2, 4], 4)
    s = plan_quick_scan(topo)
    assert len(s.rounds) == 3 and verify_schedule(s, topology=topo).ok
    assert all(len(r.pairs) == 16 for r in s.rounds)


def test_quick_scan_odd_subtrees_get_duplicates():
    topo = FatTreeTopology.regular([3], 3)
    s = plan_quick_scan(topo)
    report = verify_schedule(s, topology=topo)
    assert report.ok
    assert s.rounds[0].duplicates  # three nodes per ToR leave one over
    for rnd in s.rounds:
        primary = [x for p in rnd.pairs for x in p]
        assert len(primary) == len(set(primary))


def test_mislabelled_hop_detected():
    topo = FatTreeTopology.regular([2, 2], 2)
    s = plan_quick_scan(topo)
    bad = ScanSchedule("quick", [ScanRound(s.rounds[1].pairs, 2), ScanRound(s.rounds[0].pairs, 4),
                                 s.rounds[2]])
    report = verify_schedule(bad, topology=topo)
    assert any("hops apart, expected" in v for v in report.violations)


def test_topology_validation():
    with pytest.raises(InvalidInput, match="not a ToR"):
        FatTreeTopology.build(2, [{"id": "r", "tier": 2}, {"id": "t", "tier": 1, "parent": "r"}],
                              [{"id": "n", "tor": "r"}])
    with pytest.raises(InvalidInput, match="exactly one"):
        FatTreeTopology.build(2, [{"id": "r", "tier": 2}, {"id": "q", "tier": 2}], [])
    with pytest.raises(InvalidInput, match="unknown parent"):
        FatTreeTopology.build(2, [{"id": "r", "tier": 2}, {"id": "t", "tier": 1, "parent": "x"}], [])


def test_lca_matches_bruteforce():
    topo = FatTreeTopology.regular([2, 3], 2)
    for a, b in itertools.combinations(sorted(topo.node_tor), 2):
        assert lca_tier(topo, a, b) == lca_tier_bruteforce(topo, a, b)
        assert hop_distance(topo, a, b) == 2 * lca_tier(topo, a, b)


@st.composite
def irregular_tree(draw):
    """Random single-root tree with uneven fan-out and ToR sizes (possibly empty)."""
    tiers = draw(st.integers(1, 4))
    switches = [{"id": f"s{tiers}-0", "tier": tiers}]
    level = [switches[0]["id"]]
    for t in range(tiers - 1, 0, -1):
        nxt = []
        for p in level:
            for _ in range(draw(st.integers(1, 3))):
                sid = f"s{t}-{len(nxt)}"
                switches.append({"id": sid, "tier": t, "parent": p})
                nxt.append(sid)
        level = nxt
    nodes = []
    for tor in level:
        for _ in range(draw(st.integers(0, 5))):
            nodes.append({"id": f"n{len(nodes):03d}", "tor": tor})
    return FatTreeTopology.build(tiers, switches, nodes)


@settings(max_examples=150, deadline=None)
@given(irregular_tree())
def test_quick_scan_properties(topo):
    s = plan_quick_scan(topo)
    assert len(s.rounds) == topo.tiers
    assert verify_schedule(s, topology=topo).ok
    for h, rnd in enumerate(s.rounds, start=1):
        for p in rnd.pairs + rnd.duplicates:
            assert lca_tier_bruteforce(topo, *p) == h


def test_planners_deterministic():
    topo = FatTreeTopology.regular([3, 2], 3)
    assert plan_quick_scan(topo) == plan_quick_scan(topo)
    assert plan_full_scan(range(10)) == plan_full_scan(range(10))
