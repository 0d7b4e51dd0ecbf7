"""Criteria learning, online defect filtering and benchmark-quality scores."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metricspace import (
    Direction,
    InvalidInput,
    MetricSample,
    distance,
    one_sided_similarity,
    similarity,
    similarity_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.95


class ConfigurationError(KeyError):
    """A result references a metric that has no learned criteria."""

    def __str__(self):
        return str(self.args[0]) if self.args else "configuration error"


@dataclass(frozen=True)
class Criteria:
    metric_id: str
    reference_sample: MetricSample
    alpha: float = DEFAULT_ALPHA
    direction: Direction = Direction.HIGHER_IS_BETTER

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInput(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "direction", Direction.parse(self.direction))


@dataclass
class LearnResult:
    criteria: Criteria
    defects: list[MetricSample]
    iterations: int


@dataclass
class ValidationVerdict:
    node_id: str
    scores: dict[str, float] = field(default_factory=dict)
    violating_metrics: list[str] = field(default_factory=list)

    @property
    def defect(self) -> bool:
        return bool(self.violating_metrics)


def _shared_metric(samples: Sequence[MetricSample]) -> str:
    ids = {s.metric_id for s in samples}
    if len(ids) != 1:
        raise InvalidInput(f"samples span several metrics: {sorted(ids)}")
    return ids.pop()


def _centroid_index(sim: np.ndarray, members: Sequence[int], node_ids: Sequence[str]) -> int:
    sub = sim[np.ix_(members, members)]
    totals = sub.sum(axis=1)
    best = totals.max()
    # Floating sums of the same similarities can differ in the last ulp.
    tied = [m for m, t in zip(members, totals) if t >= best - 1e-12]
    return min(tied, key=lambda m: (node_ids[m], m))


def get_centroid(samples: Sequence[MetricSample]) -> MetricSample:
    """Member with the largest summed similarity to all members (lowest node_id on ties)."""
    samples = list(samples)
    if not samples:
        raise InvalidInput("cannot take the centroid of an empty set")
    _shared_metric(samples)
    sim = similarity_matrix(samples)
    idx = _centroid_index(sim, range(len(samples)), [s.node_id for s in samples])
    return samples[idx]


def learn_criteria(samples: Iterable[MetricSample], alpha: float = DEFAULT_ALPHA) -> LearnResult:
    """Iteratively exclude defective samples and keep the centroid of the rest.

    Defects only accumulate, so the loop runs at most ``len(samples)`` times and
    always ends with every retained sample strictly more similar than ``alpha``
    to the returned reference.
    """
    samples = sorted(samples, key=lambda s: (s.node_id, s.values))
    if not samples:
        raise InvalidInput("need at least one sample to learn criteria")
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    metric_id = _shared_metric(samples)
    node_ids = [s.node_id for s in samples]
    sim = similarity_matrix(samples)

    retained = list(range(len(samples)))
    defects: list[int] = []
    center = _centroid_index(sim, retained, node_ids)
    iterations = 0
    while True:
        bad = [i for i in retained if sim[center, i] <= alpha]
        if not bad:
            break
        iterations += 1
        defects.extend(bad)
        retained = [i for i in retained if i not in set(bad)]
        center = _centroid_index(sim, retained, node_ids)

    ref = samples[center]
    crit = Criteria(metric_id, ref, alpha, ref.direction)
    return LearnResult(crit, [samples[i] for i in sorted(defects)], iterations)


def learn_all(samples: Iterable[MetricSample], alpha: float = DEFAULT_ALPHA) -> dict[str, LearnResult]:
    by_metric: dict[str, list[MetricSample]] = {}
    for s in samples:
        by_metric.setdefault(s.metric_id, []).append(s)
    return {m: learn_criteria(group, alpha) for m, group in sorted(by_metric.items())}


def filter_defects(results: Iterable[MetricSample],
                   criteria: Mapping[str, Criteria] | Iterable[Criteria]) -> list[ValidationVerdict]:
    if not isinstance(criteria, Mapping):
        criteria = {c.metric_id: c for c in criteria}
    verdicts: dict[str, ValidationVerdict] = {}
    for r in results:
        crit = criteria.get(r.metric_id)
        if crit is None:
            raise ConfigurationError(f"no criteria learned for metric {r.metric_id!r}")
        v = verdicts.setdefault(r.node_id, ValidationVerdict(r.node_id))
        observed = r if r.direction is crit.direction else MetricSample(
            r.values, r.metric_id, r.node_id, crit.direction)
        score = one_sided_similarity(observed, crit.reference_sample)
        v.scores[r.metric_id] = score
        if score <= crit.alpha and r.metric_id not in v.violating_metrics:
            v.violating_metrics.append(r.metric_id)
    for v in verdicts.values():
        v.violating_metrics.sort()
    return [verdicts[k] for k in sorted(verdicts)]


def repeatability(samples: Sequence[MetricSample]) -> float:
    """Mean similarity over all unordered pairs."""
    samples = list(samples)
    if len(samples) < 2:
        raise InvalidInput("repeatability needs at least two samples")
    _shared_metric(samples)
    sims = [similarity(a, b) for a, b in itertools.combinations(samples, 2)]
    return float(np.mean(sims))


def margin_ratio(defects: Sequence[MetricSample], healthy: Sequence[MetricSample],
                 criteria: Criteria | MetricSample) -> float:
    """Closest defect distance over farthest healthy distance; ``inf`` if healthy all match."""
    if not defects or not healthy:
        raise InvalidInput("margin ratio needs both defective and healthy samples")
    ref = criteria.reference_sample if isinstance(criteria, Criteria) else criteria
    num = min(distance(s, ref) for s in defects)
    den = max(distance(s, ref) for s in healthy)
    if den == 0.0:
        return math.inf
    return num / den


@dataclass
class IqrResult:
    reference_sample: MetricSample
    healthy: list[MetricSample]
    defects: list[MetricSample]


def iqr_criteria(samples: Sequence[MetricSample]) -> IqrResult:
    """Baseline criteria from per-sample mean throughput and the 1.5*IQR lower fence.

    The reference is the sample whose mean is the median among samples above
    the fence (lower middle for even counts).
    """
    samples = sorted(samples, key=lambda s: s.node_id)
    if not samples:
        raise InvalidInput("empty sample set")
    means = np.array([np.mean(s.values) for s in samples])
    q1, q3 = np.percentile(means, [25, 75])
    fence = q1 - 1.5 * (q3 - q1)
    healthy = [s for s, m in zip(samples, means) if m > fence]
    defects = [s for s, m in zip(samples, means) if m <= fence]
    order = sorted(healthy, key=lambda s: (np.mean(s.values), s.node_id))
    ref = order[(len(order) - 1) // 2]
    return IqrResult(ref, healthy, defects)
