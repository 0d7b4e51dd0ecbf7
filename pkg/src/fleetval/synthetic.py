"""Seeded synthetic datasets for tests, demos and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hazard import IncidentEvent, IncidentTrace, NodeStatus
from .metricspace import MetricSample
from .paramsearch import StepSeries
from .selector import BenchmarkInfo, CoverageTable
from .simulator import AllocationRequest

HOUR = 3600


@dataclass
class PlantedDataset:
    samples: list[MetricSample]
    planted: set[str]
    marginal: set[str]


def planted_cluster(seed: int, n_cluster: int = 19, n_outliers: int = 1, n_marginal: int = 0,
                    level: float = 100.0, values_per_sample: int = 50, node_spread: float = 0.005,
                    run_noise: float = 0.01, marginal_shift: float = 0.03,
                    metric_id: str = "throughput") -> PlantedDataset:
    """Healthy nodes near ``level``, outliers near ``level / 10``.

    Marginal nodes run ``marginal_shift`` slower than the cluster: still healthy
    at the default threshold but outside a tight interquartile fence.
    """
    rng = np.random.default_rng(seed)
    samples, planted, marginal = [], set(), set()

    def node_sample(node_id, center):
        offset = center * (1.0 + node_spread * rng.standard_normal())
        vals = offset * (1.0 + run_noise * rng.standard_normal(values_per_sample))
        return MetricSample(tuple(np.maximum(vals, 0.0)), metric_id, node_id)

    for i in range(n_cluster):
        samples.append(node_sample(f"node-{i:03d}", level))
    for j in range(n_marginal):
        nid = f"node-{n_cluster + j:03d}"
        samples.append(node_sample(nid, level * (1.0 - marginal_shift)))
        marginal.add(nid)
    for j in range(n_outliers):
        nid = f"node-{n_cluster + n_marginal + j:03d}"
        samples.append(node_sample(nid, level / 10.0))
        planted.add(nid)
    order = rng.permutation(len(samples))
    return PlantedDataset([samples[i] for i in order], planted, marginal)


def random_samples(rng: np.random.Generator, n: int, size_range=(1, 30), scale: float = 100.0,
                   metric_id: str = "m") -> list[MetricSample]:
    out = []
    for i in range(n):
        k = int(rng.integers(size_range[0], size_range[1] + 1))
        center = scale * rng.uniform(0.2, 1.0)
        vals = np.abs(center * (1 + 0.2 * rng.standard_normal(k)))
        out.append(MetricSample(tuple(vals), metric_id, f"node-{i:03d}"))
    return out


def warmup_periodic_series(seed: int, n_series: int = 8, warmup: int = 100, length: int = 600,
                           period: int = 10, level: float = 100.0, amplitude: float = 0.02,
                           noise: float = 0.003, start_fraction: float = 0.0) -> list[StepSeries]:
    """Linear ramp over the first ``warmup`` steps, then stationary periodic cycles."""
    rng = np.random.default_rng(seed)
    out = []
    steps = np.arange(length)
    for i in range(n_series):
        shape = level * (1 + amplitude * np.sin(2 * np.pi * steps / period))
        ramp = np.where(steps < warmup, start_fraction + (1 - start_fraction) * steps / max(warmup, 1), 1.0)
        vals = shape * ramp * (1 + noise * rng.standard_normal(length))
        out.append(StepSeries(tuple(np.maximum(vals, 0.0)), f"node-{i:03d}"))
    return out


def constant_hazard_trace(seed: int, n_nodes: int = 50, rate_per_hour: float = 0.01,
                          span_hours: float = 2400.0, repair_hours: float = 1.0,
                          categories=("gpu", "network", "memory"),
                          weights=(0.5, 0.3, 0.2)) -> IncidentTrace:
    """Renewal process per node with exponential gaps between incidents."""
    rng = np.random.default_rng(seed)
    events = []
    for i in range(n_nodes):
        t = rng.exponential(1.0 / rate_per_hour)
        while t < span_hours:
            cat = categories[int(rng.choice(len(categories), p=weights))]
            start = int(round(t * HOUR))
            end = start + int(round(repair_hours * HOUR))
            events.append(IncidentEvent(f"node-{i:03d}", start, end, cat, cat))
            t += repair_hours + rng.exponential(1.0 / rate_per_hour)
    events.sort(key=lambda e: (e.start_ts, e.node_id))
    return IncidentTrace(events, sorted(categories), start_ts=0)


def two_group_samples(seed: int, n: int = 400, fast_rate: float = 0.05,
                      slow_rate: float = 0.01) -> list[tuple[NodeStatus, float]]:
    """Binary covariate (one prior GPU incident or none) splitting fast and slow failers."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        risky = i % 2 == 0
        status = NodeStatus(f"node-{i:04d}", uptime_hours=100.0,
                            incident_count={"gpu": int(risky)},
                            mtbi_hours={"gpu": 100.0})
        tbni = rng.exponential(1.0 / (fast_rate if risky else slow_rate))
        out.append((status, float(tbni)))
    return out


def allocation_trace(seed: int, n_jobs: int = 400, max_nodes: int = 8,
                     mean_duration_hours: float = 24.0, mean_gap_hours: float = 2.0) -> list[AllocationRequest]:
    rng = np.random.default_rng(seed)
    t = 0.0
    out = []
    for _ in range(n_jobs):
        t += rng.exponential(mean_gap_hours)
        out.append(AllocationRequest(
            count=int(rng.integers(1, max_nodes + 1)),
            submit_ts=int(round(t * HOUR)),
            duration_hours=float(max(0.5, rng.exponential(mean_duration_hours))),
        ))
    return out


def coverage_table(n_defects: int = 100) -> CoverageTable:
    """A cheap broad benchmark, mid-cost specialists and a slow long tail; together they
    cover every historical defect."""
    ids = [f"d{i:03d}" for i in range(n_defects)]
    spec = [
        ("gemm", 0.25, ids[:85]),
        ("nccl-allreduce", 0.5, ids[60:95]),
        ("ib-loopback", 1.0, ids[90:98]),
        ("e2e-gpt2", 3.0, ids[:100]),
        ("fio", 1.25, ids[97:]),
    ]
    return CoverageTable(BenchmarkInfo(b, h * HOUR, frozenset(d)) for b, h, d in spec)
