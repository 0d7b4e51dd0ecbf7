"""Collision-free network validation schedules.

``plan_full_scan`` covers every unordered NIC pair in N-1 rounds of disjoint
pairs (round-robin circle method). ``plan_quick_scan`` needs only k rounds on
a k-tier tree: round h pairs nodes whose lowest common switch sits at tier h,
so every pair in that round is exactly 2h hops apart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .metricspace import InvalidInput

BYE = None


@dataclass
class ScanRound:
    pairs: list[tuple]
    hop: int | None = None
    # Extra pairs that reuse an already-paired node so odd leftovers still get measured.
    duplicates: list[tuple] = field(default_factory=list)


@dataclass
class ScanSchedule:
    mode: str
    rounds: list[ScanRound]

    @property
    def nodes(self) -> set:
        return {n for r in self.rounds for p in r.pairs + r.duplicates for n in p}


def plan_full_scan(nic_ids: Sequence[Hashable]) -> ScanSchedule:
    """Circle method: pin the first NIC, rotate the rest one seat per round."""
    ids = list(nic_ids)
    if len(ids) < 2:
        raise InvalidInput("full scan needs at least two NICs")
    if len(set(ids)) != len(ids):
        raise InvalidInput("duplicate NIC ids")
    if len(ids) % 2:
        ids.append(BYE)
    n = len(ids)
    fixed, ring = ids[0], ids[1:]
    rounds = []
    for _ in range(n - 1):
        seats = [fixed] + ring
        pairs = [(seats[i], seats[n - 1 - i]) for i in range(n // 2)]
        rounds.append(ScanRound([p for p in pairs if BYE not in p]))
        ring = ring[-1:] + ring[:-1]
    return ScanSchedule("full", rounds)


@dataclass
class FatTreeTopology:
    """Switch hierarchy with one parent per switch; ToRs are tier 1, the root is tier ``tiers``."""

    tiers: int
    switch_tier: dict[str, int]
    switch_parent: dict[str, str | None]
    node_tor: dict[str, str]

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.tiers < 1:
            raise InvalidInput("topology needs at least one tier")
        roots = [s for s, t in self.switch_tier.items() if t == self.tiers]
        if len(roots) != 1:
            raise InvalidInput(f"expected exactly one tier-{self.tiers} switch, found {len(roots)}")
        for s, t in self.switch_tier.items():
            if not 1 <= t <= self.tiers:
                raise InvalidInput(f"switch {s!r} has tier {t} outside 1..{self.tiers}")
            parent = self.switch_parent.get(s)
            if t == self.tiers:
                if parent is not None:
                    raise InvalidInput(f"root switch {s!r} must not have a parent")
                continue
            if parent not in self.switch_tier:
                raise InvalidInput(f"switch {s!r} has unknown parent {parent!r}")
            if self.switch_tier[parent] != t + 1:
                raise InvalidInput(
                    f"switch {s!r} (tier {t}) links to {parent!r} at tier {self.switch_tier[parent]}")
        for node, tor in self.node_tor.items():
            if self.switch_tier.get(tor) != 1:
                raise InvalidInput(f"node {node!r} attaches to {tor!r}, which is not a ToR")

    @classmethod
    def build(cls, tiers: int, switches: Iterable[Mapping], nodes: Iterable[Mapping]) -> "FatTreeTopology":
        tier, parent, tor = {}, {}, {}
        for s in switches:
            if s["id"] in tier:
                raise InvalidInput(f"duplicate switch {s['id']!r}")
            tier[s["id"]] = int(s["tier"])
            parent[s["id"]] = s.get("parent")
        for n in nodes:
            if n["id"] in tor:
                raise InvalidInput(f"node {n['id']!r} attached twice")
            tor[n["id"]] = n["tor"]
        return cls(int(tiers), tier, parent, tor)

    @classmethod
    def regular(cls, fanouts: Sequence[int], nodes_per_tor: int) -> "FatTreeTopology":
        """Balanced tree; ``fanouts[i]`` is the child count of each tier-(k-i) switch."""
        k = len(fanouts) + 1
        tier = {"t%d-0" % k: k}
        parent = {"t%d-0" % k: None}
        level = ["t%d-0" % k]
        for depth, fan in enumerate(fanouts):
            t = k - depth - 1
            nxt = []
            for p in level:
                for _ in range(fan):
                    sid = "t%d-%d" % (t, len(nxt))
                    tier[sid], parent[sid] = t, p
                    nxt.append(sid)
            level = nxt
        node_tor = {}
        for tor in level:
            for _ in range(nodes_per_tor):
                node_tor["n%04d" % len(node_tor)] = tor
        return cls(k, tier, parent, node_tor)

    def ancestor(self, node: str, tier: int) -> str:
        s = self.node_tor[node]
        while self.switch_tier[s] < tier:
            s = self.switch_parent[s]
        return s

    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {s: [] for s in self.switch_tier}
        for s, p in self.switch_parent.items():
            if p is not None:
                out[p].append(s)
        return {s: sorted(c) for s, c in out.items()}

    def nodes_under(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {s: [] for s in self.switch_tier}
        for node in sorted(self.node_tor):
            s = self.node_tor[node]
            while s is not None:
                out[s].append(node)
                s = self.switch_parent[s]
        return out


def _pair_across(groups: list[list[str]]) -> tuple[list[tuple], list[str]]:
    """Maximum pairing of nodes drawn from different groups.

    Groups are laid out largest first and position i is paired with position
    i + ceil(m/2); any two such positions are farther apart than a group is
    long, so the pair always spans two groups. When one group holds more than
    half the nodes, its surplus stays unpaired.
    """
    groups = sorted((g for g in groups if g), key=lambda g: -len(g))
    m = sum(len(g) for g in groups)
    if len(groups) < 2:
        return [], [n for g in groups for n in g]
    big = len(groups[0])
    if big > m // 2:
        rest = [n for g in groups[1:] for n in g]
        pairs = list(zip(groups[0], rest))
        return pairs, groups[0][len(rest):]
    flat = [n for g in groups for n in g]
    half = (m + 1) // 2
    pairs = [(flat[i], flat[i + half]) for i in range(m // 2)]
    left = [flat[m // 2]] if m % 2 else []
    return pairs, left


def plan_quick_scan(topology: FatTreeTopology) -> ScanSchedule:
    topology.validate()
    children = topology.children()
    under = topology.nodes_under()
    tor_nodes = {s: [] for s, t in topology.switch_tier.items() if t == 1}
    for node in sorted(topology.node_tor):
        tor_nodes[topology.node_tor[node]].append(node)

    rounds = []
    for hop_tier in range(1, topology.tiers + 1):
        pairs, dups = [], []
        for sw in sorted(s for s, t in topology.switch_tier.items() if t == hop_tier):
            if hop_tier == 1:
                groups = [[n] for n in tor_nodes[sw]]
            else:
                groups = [under[c] for c in children[sw]]
            got, left = _pair_across(groups)
            pairs.extend(got)
            for n in left:
                mate = _duplicate_mate(n, groups, got)
                if mate is not None:
                    dups.append((n, mate))
        rounds.append(ScanRound(pairs, hop=2 * hop_tier, duplicates=dups))
    return ScanSchedule("quick", rounds)


def _duplicate_mate(node, groups, pairs):
    own = next(g for g in groups if node in g)
    used = [n for p in pairs for n in p]
    for n in used:
        if n not in own:
            return n
    return None


def lca_tier(topology: FatTreeTopology, a: str, b: str) -> int:
    """Tier of the lowest switch above both nodes, found by walking ancestor chains."""
    chain_a = []
    s = topology.node_tor[a]
    while s is not None:
        chain_a.append(s)
        s = topology.switch_parent[s]
    s = topology.node_tor[b]
    seen = set(chain_a)
    while s not in seen:
        s = topology.switch_parent[s]
    return topology.switch_tier[s]


def hop_distance(topology: FatTreeTopology, a: str, b: str) -> int:
    return 2 * lca_tier(topology, a, b)


@dataclass
class VerificationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_schedule(schedule: ScanSchedule, mode: str | None = None,
                    topology: FatTreeTopology | None = None,
                    nodes: Iterable | None = None) -> VerificationReport:
    mode = mode or schedule.mode
    problems: list[str] = []
    for i, rnd in enumerate(schedule.rounds):
        seen = {}
        for pair in rnd.pairs:
            if len(pair) != 2 or pair[0] == pair[1]:
                problems.append(f"round {i}: malformed pair {pair!r}")
                continue
            for n in pair:
                if n in seen:
                    problems.append(f"round {i}: node {n!r} appears in {seen[n]!r} and {pair!r}")
                else:
                    seen[n] = pair

    if mode == "full":
        all_nodes = sorted(set(nodes) if nodes is not None else schedule.nodes, key=str)
        first_seen: dict[frozenset, int] = {}
        for i, rnd in enumerate(schedule.rounds):
            for pair in rnd.pairs:
                key = frozenset(pair)
                if key in first_seen:
                    problems.append(
                        f"pair {tuple(sorted(pair, key=str))!r} scheduled in rounds {first_seen[key]} and {i}")
                else:
                    first_seen[key] = i
        for a, b in itertools.combinations(all_nodes, 2):
            if frozenset((a, b)) not in first_seen:
                problems.append(f"pair {(a, b)!r} never scheduled")
        n = len(all_nodes) + len(all_nodes) % 2
        if len(schedule.rounds) != n - 1:
            problems.append(f"expected {n - 1} rounds, got {len(schedule.rounds)}")
        for i, rnd in enumerate(schedule.rounds):
            if len(rnd.pairs) != len(all_nodes) // 2:
                problems.append(f"round {i}: {len(rnd.pairs)} pairs, expected {len(all_nodes) // 2}")

    elif mode == "quick":
        if topology is None:
            raise InvalidInput("quick-scan verification needs the topology")
        if len(schedule.rounds) != topology.tiers:
            problems.append(f"expected {topology.tiers} rounds, got {len(schedule.rounds)}")
        for i, rnd in enumerate(schedule.rounds):
            want = 2 * (i + 1)
            for pair in rnd.pairs + rnd.duplicates:
                if any(n not in topology.node_tor for n in pair):
                    problems.append(f"round {i}: pair {pair!r} names an unknown node")
                    continue
                got = hop_distance(topology, *pair)
                if got != want:
                    problems.append(f"round {i}: pair {pair!r} is {got} hops apart, expected {want}")
            covered = {n for p in rnd.pairs + rnd.duplicates for n in p}
            for n in _pairable(topology, i + 1):
                if n not in covered:
                    problems.append(f"round {i}: node {n!r} could be paired at {want} hops but is missing")
    else:
        raise InvalidInput(f"unknown scan mode {mode!r}")
    return VerificationReport(problems)


def _pairable(topology: FatTreeTopology, tier: int) -> list[str]:
    """Nodes with at least one partner whose lowest common switch is at ``tier``."""
    groups: dict[tuple[str, str], list[str]] = {}
    for node in topology.node_tor:
        top = topology.ancestor(node, tier)
        below = node if tier == 1 else topology.ancestor(node, tier - 1)
        groups.setdefault((top, below), []).append(node)
    per_top: dict[str, int] = {}
    for top, _ in groups:
        per_top[top] = per_top.get(top, 0) + 1
    return sorted(n for (top, _), ns in groups.items() if per_top[top] >= 2 for n in ns)
