"""Empirical-CDF representation of benchmark samples and CDF-area distances.

Every distance here is evaluated exactly: both CDFs are step functions, so the
integral over ``[0, x_max]`` collapses to a finite sum over the segments
between merged support points. ``x_max`` is the largest value across both
samples and also serves as the normaliser, which keeps results in ``[0, 1]``
and makes them invariant to a common rescaling of the values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidInput(ValueError):
    """Raised when samples violate their invariants or are not comparable."""


class Direction(str, enum.Enum):
    HIGHER_IS_BETTER = "higher"
    LOWER_IS_BETTER = "lower"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, cls):
            return value
        aliases = {
            "higher": cls.HIGHER_IS_BETTER,
            "higherisbetter": cls.HIGHER_IS_BETTER,
            "lower": cls.LOWER_IS_BETTER,
            "lowerisbetter": cls.LOWER_IS_BETTER,
        }
        try:
            return aliases[str(value).strip().lower().replace("_", "")]
        except KeyError:
            raise InvalidInput(f"unknown metric direction {value!r}") from None


@dataclass(frozen=True)
class MetricSample:
    """Measured values of one metric from one benchmark run on one node.

    ``values`` keeps the run order (parameter search needs it); all CDF math
    treats it as an unordered multiset.
    """

    values: tuple[float, ...]
    metric_id: str = "metric"
    node_id: str = "node"
    direction: Direction = Direction.HIGHER_IS_BETTER
    _sorted: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InvalidInput(f"empty sample for node {self.node_id!r}, metric {self.metric_id!r}")
        for v in vals:
            if not math.isfinite(v) or v < 0:
                raise InvalidInput(
                    f"sample for node {self.node_id!r}, metric {self.metric_id!r} "
                    f"has invalid value {v!r} (must be finite and >= 0)"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        arr = np.sort(np.asarray(vals, dtype=float))
        arr.setflags(write=False)
        object.__setattr__(self, "_sorted", arr)

    @property
    def sorted_values(self) -> np.ndarray:
        return self._sorted

    def __len__(self) -> int:
        return len(self.values)

    def scaled(self, factor: float) -> "MetricSample":
        return MetricSample(
            tuple(v * factor for v in self.values), self.metric_id, self.node_id, self.direction
        )


def sample(values: Sequence[float], metric_id: str = "metric", node_id: str = "node",
           direction: Direction | str = Direction.HIGHER_IS_BETTER) -> MetricSample:
    """Shorthand constructor used throughout tests and scripts."""
    return MetricSample(tuple(values), metric_id, node_id, Direction.parse(direction))


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF: ``heights[k]`` holds on ``[support[k], support[k+1])``."""

    support: np.ndarray
    heights: np.ndarray

    def __call__(self, x):
        idx = np.searchsorted(self.support, x, side="right")
        padded = np.concatenate(([0.0], self.heights))
        return padded[idx]

    def __eq__(self, other):
        if not isinstance(other, EmpiricalCdf):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.heights, other.heights
        )

    __hash__ = None


def empirical_cdf(s: MetricSample) -> EmpiricalCdf:
    if len(s.values) == 0:
        raise InvalidInput("empty sample")
    xs = s.sorted_values
    support, counts = np.unique(xs, return_counts=True)
    heights = np.cumsum(counts) / xs.size
    heights[-1] = 1.0
    return EmpiricalCdf(support, heights)


def _check_pair(s1: MetricSample, s2: MetricSample) -> None:
    if s1.metric_id != s2.metric_id:
        raise InvalidInput(
            f"cannot compare metric {s1.metric_id!r} with metric {s2.metric_id!r}"
        )


def _segments(s1: MetricSample, s2: MetricSample):
    """Segment widths and the two CDF levels on each segment of ``[0, x_max]``."""
    a, b = s1.sorted_values, s2.sorted_values
    x_max = max(a[-1], b[-1])
    knots = np.union1d(np.union1d(a, b), [0.0])
    widths = np.diff(knots)
    left = knots[:-1]
    f1 = np.searchsorted(a, left, side="right") / a.size
    f2 = np.searchsorted(b, left, side="right") / b.size
    return x_max, widths, f1, f2


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 below both supports contributes nothing.
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def distance(s1: MetricSample, s2: MetricSample) -> float:
    """Normalised area between the two CDFs, relative to the larger CDF."""
    _check_pair(s1, s2)
    x_max, widths, f1, f2 = _segments(s1, s2)
    if x_max == 0.0:
        return 0.0
    integrand = _ratio(np.abs(f1 - f2), np.maximum(f1, f2))
    return float(min(1.0, np.dot(widths, integrand) / x_max))


def similarity(s1: MetricSample, s2: MetricSample) -> float:
    return 1.0 - distance(s1, s2)


def one_sided_distance(observed: MetricSample, criteria_sample: MetricSample) -> float:
    """Like :func:`distance` but only counts deviation toward worse performance.

    For higher-is-better metrics the observed CDF rising above the reference
    CDF means mass shifted to lower values, which is the bad side. For
    lower-is-better metrics the roles are mirrored.
    """
    _check_pair(observed, criteria_sample)
    x_max, widths, f_obs, f_ref = _segments(observed, criteria_sample)
    if x_max == 0.0:
        return 0.0
    if observed.direction is Direction.HIGHER_IS_BETTER:
        num = np.maximum(0.0, f_obs - f_ref)
    else:
        num = np.maximum(0.0, f_ref - f_obs)
    integrand = _ratio(num, np.maximum(f_obs, f_ref))
    return float(min(1.0, np.dot(widths, integrand) / x_max))


def one_sided_similarity(observed: MetricSample, criteria_sample: MetricSample) -> float:
    return 1.0 - one_sided_distance(observed, criteria_sample)


def similarity_matrix(samples: Sequence[MetricSample]) -> np.ndarray:
    n = len(samples)
    out = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = similarity(samples[i], samples[j])
    return out
