"""Benchmark subset selection against an incident-probability target."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .hazard import HazardModel, NodeStatus


@dataclass(frozen=True)
class BenchmarkInfo:
    benchmark_id: str
    running_time_s: float
    defect_node_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.running_time_s > 0:
            raise ValueError(f"benchmark {self.benchmark_id!r} needs a positive running time")
        object.__setattr__(self, "defect_node_ids", frozenset(self.defect_node_ids))

    @property
    def running_time_hours(self) -> float:
        return self.running_time_s / 3600.0


class CoverageTable:
    """Historical defect sets per benchmark; coverage is the share of the union they reach."""

    def __init__(self, benchmarks: Iterable[BenchmarkInfo]):
        self.benchmarks = sorted(benchmarks, key=lambda b: b.benchmark_id)
        ids = [b.benchmark_id for b in self.benchmarks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate benchmark ids in coverage table")
        self.by_id = {b.benchmark_id: b for b in self.benchmarks}
        self.universe = frozenset().union(*(b.defect_node_ids for b in self.benchmarks))

    def __len__(self):
        return len(self.benchmarks)

    @property
    def ids(self) -> list[str]:
        return [b.benchmark_id for b in self.benchmarks]

    def coverage(self, subset: Iterable[str]) -> float:
        subset = set(subset)
        unknown = subset - self.by_id.keys()
        if unknown:
            raise ValueError(f"benchmarks not in coverage table: {sorted(unknown)}")
        if not self.universe:
            return 1.0 if subset == set(self.by_id) and subset else 0.0
        found = frozenset().union(*(self.by_id[b].defect_node_ids for b in subset))
        return len(found) / len(self.universe)

    def total_hours(self, subset: Iterable[str]) -> float:
        return sum(self.by_id[b].running_time_hours for b in subset)


def joint_incident_probability(nodes: Sequence[NodeStatus], model: HazardModel,
                               horizon_hours: float) -> float:
    """P(at least one node has an incident within the horizon), nodes independent."""
    survive = 1.0
    for n in nodes:
        survive *= 1.0 - float(model.predict_cdf(n, horizon_hours))
    return 1.0 - survive


def incident_prob(nodes: Sequence[NodeStatus], subset: Iterable[str], model: HazardModel,
                  horizon_hours: float, table: CoverageTable) -> float:
    p = joint_incident_probability(nodes, model, horizon_hours)
    return p * (1.0 - table.coverage(subset))


@dataclass
class SelectionOutcome:
    chosen: list[str]
    coverage: float
    initial_probability: float
    residual_probability: float
    total_time_hours: float
    p0: float
    feasible: bool = True
    skipped: bool = field(init=False)

    def __post_init__(self):
        self.skipped = not self.chosen

    def to_record(self) -> dict:
        return {
            "status": "skipped" if self.skipped else ("selected" if self.feasible else "infeasible"),
            "chosen": list(self.chosen),
            "coverage": self.coverage,
            "initial_probability": self.initial_probability,
            "residual_probability": self.residual_probability,
            "total_time_hours": self.total_time_hours,
            "p0": self.p0,
        }


def select_from_probability(p: float, table: CoverageTable, p0: float) -> SelectionOutcome:
    """Greedy loop for a precomputed joint probability ``p``.

    Each step adds the benchmark with the largest probability decrement per
    hour of running time; ties go to the lower benchmark id.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    chosen: list[str] = []
    residual = p
    remaining = list(table.ids)
    while residual > p0 and remaining:
        best_id, best_gain = None, -math.inf
        for bid in remaining:
            gain = residual - p * (1.0 - table.coverage(chosen + [bid]))
            rate = gain / table.by_id[bid].running_time_hours
            if rate > best_gain:
                best_id, best_gain = bid, rate
        chosen.append(best_id)
        remaining.remove(best_id)
        residual = p * (1.0 - table.coverage(chosen))
    return SelectionOutcome(
        chosen=chosen,
        coverage=table.coverage(chosen),
        initial_probability=p,
        residual_probability=residual,
        total_time_hours=table.total_hours(chosen),
        p0=p0,
        feasible=residual <= p0,
    )


def select_benchmarks(nodes: Sequence[NodeStatus], table: CoverageTable | Iterable[BenchmarkInfo],
                      model: HazardModel, p0: float, horizon_hours: float) -> SelectionOutcome:
    if not isinstance(table, CoverageTable):
        table = CoverageTable(table)
    p = joint_incident_probability(nodes, model, horizon_hours)
    return select_from_probability(p, table, p0)


def p0_from_job_duration(mean_job_hours: float, horizon_hours: float) -> float:
    """Incident probability within the horizon for a node whose expected time to
    incident equals the mean job duration (exponential lifetime)."""
    if mean_job_hours <= 0 or horizon_hours <= 0:
        raise ValueError("job duration and horizon must be positive")
    return float(-np.expm1(-horizon_hours / mean_job_hours))
