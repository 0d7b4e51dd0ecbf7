"""Incident-time models: node statuses, trace extraction, fitting and prediction.

Four variants share one interface. Three are exponential baselines; the
fourth is a linear-relative-risk Cox proportional-hazards model fitted by
gradient ascent on the Breslow partial likelihood, with a Breslow baseline
cumulative hazard.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

TBNI_CAP_HOURS = 2400.0


class FitError(ValueError):
    """Trace cannot support a fit (too few completed intervals)."""


class Variant(str, enum.Enum):
    EXPONENTIAL = "exponential"
    EXPONENTIAL_PER_INCIDENT_COUNT = "exponential-per-incident-count"
    EXPONENTIAL_PER_HOUR = "exponential-per-hour"
    COX_LINEAR = "cox-linear"

    @classmethod
    def parse(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key or v.name.lower().replace("_", "-") == key:
                return v
        raise ValueError(f"unknown model variant {value!r}; choose from {[v.value for v in cls]}")


@dataclass(frozen=True)
class NodeStatus:
    node_id: str
    uptime_hours: float = 0.0
    hours_since_last_incident: float = 0.0
    incident_count: Mapping[str, int] = field(default_factory=dict)
    mtbi_hours: Mapping[str, float] = field(default_factory=dict)
    observed_ts: int = 0

    def __post_init__(self):
        if self.uptime_hours < 0 or self.hours_since_last_incident < 0:
            raise ValueError(f"negative duration in status of node {self.node_id!r}")
        if any(v < 0 for v in self.mtbi_hours.values()):
            raise ValueError(f"negative MTBI in status of node {self.node_id!r}")

    @property
    def total_incidents(self) -> int:
        return int(sum(self.incident_count.values()))

    def covariates(self, categories: Sequence[str]) -> np.ndarray:
        counts = [float(self.incident_count.get(c, 0)) for c in categories]
        mtbi = [float(self.mtbi_hours.get(c, self.uptime_hours)) for c in categories]
        return np.array([self.uptime_hours, self.hours_since_last_incident, *counts, *mtbi])


def covariate_names(categories: Sequence[str]) -> list[str]:
    return (["uptime_hours", "hours_since_last_incident"]
            + [f"count:{c}" for c in categories] + [f"mtbi:{c}" for c in categories])


@dataclass(frozen=True)
class IncidentEvent:
    node_id: str
    start_ts: int
    end_ts: int
    category: str
    component: str = ""


@dataclass
class IncidentTrace:
    events: list[IncidentEvent]
    categories: list[str] = field(default_factory=list)
    start_ts: int | None = None

    def __post_init__(self):
        if not self.categories:
            self.categories = sorted({e.category for e in self.events})
        if self.start_ts is None and self.events:
            self.start_ts = min(e.start_ts for e in self.events)

    def category_frequencies(self) -> dict[str, float]:
        counts = Counter(e.category for e in self.events)
        total = sum(counts.values())
        return {c: counts.get(c, 0) / total for c in self.categories} if total else {}

    def samples(self) -> list[tuple[NodeStatus, float]]:
        """(status, hours-to-next-incident) at the end of every incident that has a successor."""
        by_node: dict[str, list[IncidentEvent]] = {}
        for e in self.events:
            by_node.setdefault(e.node_id, []).append(e)
        out = []
        for node in sorted(by_node):
            evs = sorted(by_node[node], key=lambda e: (e.start_ts, e.end_ts))
            counts: Counter = Counter()
            down = 0.0
            for cur, nxt in zip(evs, evs[1:] + [None]):
                counts[cur.category] += 1
                down += max(0, cur.end_ts - cur.start_ts) / 3600.0
                if nxt is None:
                    break
                tbni = (nxt.start_ts - cur.end_ts) / 3600.0
                if tbni <= 0:
                    continue
                up = max(0.0, (cur.end_ts - self.start_ts) / 3600.0 - down)
                status = NodeStatus(
                    node_id=node,
                    uptime_hours=up,
                    hours_since_last_incident=0.0,
                    incident_count=dict(counts),
                    mtbi_hours={c: up / counts[c] if counts[c] else up for c in self.categories},
                    observed_ts=cur.end_ts,
                )
                out.append((status, tbni))
        return out


class HazardModel:
    """Common prediction surface; subclasses supply ``predict_cdf``."""

    variant: Variant
    categories: list[str]

    def predict_cdf(self, status: NodeStatus, t):
        raise NotImplementedError

    def survival(self, status: NodeStatus, t):
        return 1.0 - self.predict_cdf(status, t)

    def predict_tbni(self, status: NodeStatus, cap: float = TBNI_CAP_HOURS) -> float:
        """Expected time to next incident truncated at ``cap`` (trapezoid, 1 h grid)."""
        grid = np.arange(0.0, math.floor(cap) + 1.0)
        if grid[-1] < cap:
            grid = np.append(grid, cap)
        surv = np.asarray(self.survival(status, grid), dtype=float)
        return float(min(cap, np.trapezoid(surv, grid)))

    def sample_tbni(self, status: NodeStatus, rng: np.random.Generator,
                    cap: float = TBNI_CAP_HOURS) -> float:
        """Inverse-CDF draw on a 1 h grid; ``inf`` when the draw lies beyond ``cap``."""
        u = rng.random()
        grid = np.arange(0.0, math.floor(cap) + 1.0)
        cdf = np.maximum.accumulate(np.asarray(self.predict_cdf(status, grid), dtype=float))
        if u >= cdf[-1]:
            return math.inf
        k = int(np.searchsorted(cdf, u, side="right"))
        lo, hi = cdf[k - 1], cdf[k]
        frac = 0.0 if hi == lo else (u - lo) / (hi - lo)
        return float(grid[k - 1] + frac)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _exp_cdf(rate: float, t):
    t = np.asarray(t, dtype=float)
    return -np.expm1(-rate * np.maximum(t, 0.0))


@dataclass
class ExponentialModel(HazardModel):
    rate: float
    categories: list[str] = field(default_factory=list)
    variant: Variant = Variant.EXPONENTIAL

    def predict_cdf(self, status, t):
        return _exp_cdf(self.rate, t)

    def predict_tbni(self, status, cap=TBNI_CAP_HOURS):
        if self.rate <= 0:
            return float(cap)
        return super().predict_tbni(status, cap)

    def sample_tbni(self, status, rng, cap=TBNI_CAP_HOURS):
        t = rng.exponential(1.0 / self.rate) if self.rate > 0 else math.inf
        return t if t < cap else math.inf

    def to_dict(self):
        return {"variant": self.variant.value, "categories": self.categories, "rate": self.rate}


@dataclass
class PerIncidentCountModel(HazardModel):
    rates: dict[int, float]
    default_rate: float
    categories: list[str] = field(default_factory=list)
    variant: Variant = Variant.EXPONENTIAL_PER_INCIDENT_COUNT

    def rate_for(self, status: NodeStatus) -> float:
        return self.rates.get(status.total_incidents, self.default_rate)

    def predict_cdf(self, status, t):
        return _exp_cdf(self.rate_for(status), t)

    def sample_tbni(self, status, rng, cap=TBNI_CAP_HOURS):
        rate = self.rate_for(status)
        t = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        return t if t < cap else math.inf

    def to_dict(self):
        return {"variant": self.variant.value, "categories": self.categories,
                "rates": {str(k): v for k, v in sorted(self.rates.items())},
                "default_rate": self.default_rate}


@dataclass
class PerHourModel(HazardModel):
    """Empirical survival on an hourly grid: ``survival[H]`` = share of samples living >= H hours.

    Predictions condition on the time already survived since the last incident.
    """

    survival_table: list[float]
    categories: list[str] = field(default_factory=list)
    variant: Variant = Variant.EXPONENTIAL_PER_HOUR

    def _surv(self, t):
        table = np.asarray(self.survival_table)
        return np.interp(np.asarray(t, dtype=float), np.arange(table.size), table)

    def predict_cdf(self, status, t):
        u = status.hours_since_last_incident
        base = float(self._surv(u))
        t = np.asarray(t, dtype=float)
        if base <= 0.0:
            return np.where(t > 0, 1.0, 0.0)
        return 1.0 - self._surv(u + np.maximum(t, 0.0)) / base

    def hourly_rates(self) -> np.ndarray:
        s = np.asarray(self.survival_table)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = 1.0 - s[1:] / s[:-1]
        return r[s[:-1] > 0]

    def to_dict(self):
        return {"variant": self.variant.value, "categories": self.categories,
                "survival_table": list(self.survival_table)}


@dataclass
class CoxLinearModel(HazardModel):
    coef: list[float]
    means: list[float]
    scales: list[float]
    baseline_times: list[float]
    baseline_cumhaz: list[float]
    categories: list[str] = field(default_factory=list)
    variant: Variant = Variant.COX_LINEAR

    def risk_score(self, status: NodeStatus) -> float:
        z = (status.covariates(self.categories) - np.asarray(self.means)) / np.asarray(self.scales)
        return float(np.dot(z, self.coef))

    def cumulative_hazard(self, t):
        times = np.asarray(self.baseline_times)
        cum = np.concatenate(([0.0], np.asarray(self.baseline_cumhaz)))
        return cum[np.searchsorted(times, np.asarray(t, dtype=float), side="right")]

    def predict_cdf(self, status, t):
        return -np.expm1(-self.cumulative_hazard(t) * math.exp(self.risk_score(status)))

    def to_dict(self):
        return {"variant": self.variant.value, "categories": self.categories,
                "coef": self.coef, "means": self.means, "scales": self.scales,
                "baseline_times": self.baseline_times, "baseline_cumhaz": self.baseline_cumhaz}


def model_from_dict(doc: Mapping) -> HazardModel:
    variant = Variant.parse(doc["variant"])
    cats = list(doc.get("categories", []))
    if variant is Variant.EXPONENTIAL:
        return ExponentialModel(float(doc["rate"]), cats)
    if variant is Variant.EXPONENTIAL_PER_INCIDENT_COUNT:
        rates = {int(k): float(v) for k, v in doc["rates"].items()}
        return PerIncidentCountModel(rates, float(doc["default_rate"]), cats)
    if variant is Variant.EXPONENTIAL_PER_HOUR:
        return PerHourModel([float(v) for v in doc["survival_table"]], cats)
    return CoxLinearModel([float(v) for v in doc["coef"]], [float(v) for v in doc["means"]],
                          [float(v) for v in doc["scales"]],
                          [float(v) for v in doc["baseline_times"]],
                          [float(v) for v in doc["baseline_cumhaz"]], cats)


# --- fitting ---------------------------------------------------------------

def _risk_set_sums(sorted_times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """For times sorted ascending, sum of ``values`` over {j : T_j >= T_i} (ties share the set)."""
    tail = np.cumsum(values[::-1], axis=0)[::-1]
    first = np.searchsorted(sorted_times, sorted_times, side="left")
    return tail[first]


def _partial_likelihood_grad(beta, X, times):
    eta = X @ beta
    eta_max = eta.max()
    w = np.exp(eta - eta_max)
    s0 = _risk_set_sums(times, w)
    s1 = _risk_set_sums(times, w[:, None] * X)
    loglik = float(np.sum(eta - eta_max - np.log(s0)))
    grad = np.sum(X - s1 / s0[:, None], axis=0)
    return loglik, grad


def fit_cox_linear(X: np.ndarray, times: np.ndarray, categories: Sequence[str] = (),
                   iterations: int = 300, learning_rate: float = 1.0,
                   l2: float = 1e-4) -> CoxLinearModel:
    """Gradient ascent on the mean Breslow log partial likelihood (all intervals are events)."""
    order = np.argsort(times, kind="stable")
    times = np.asarray(times, dtype=float)[order]
    X = np.asarray(X, dtype=float)[order]
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[scales == 0] = 1.0
    Z = (X - means) / scales
    n = Z.shape[0]
    beta = np.zeros(Z.shape[1])
    for _ in range(iterations):
        _, grad = _partial_likelihood_grad(beta, Z, times)
        beta += learning_rate * (grad / n - l2 * beta)

    w = np.exp(Z @ beta)
    uniq, first = np.unique(times, return_index=True)
    tail = np.cumsum(w[::-1])[::-1]
    deaths = np.diff(np.append(first, n))
    cumhaz = np.cumsum(deaths / tail[first])
    return CoxLinearModel(beta.tolist(), means.tolist(), scales.tolist(),
                          uniq.tolist(), cumhaz.tolist(), list(categories))


def fit_model(data: IncidentTrace | Sequence[tuple[NodeStatus, float]],
              variant: Variant | str = Variant.EXPONENTIAL,
              categories: Sequence[str] | None = None, cap: float = TBNI_CAP_HOURS,
              **cox_kwargs) -> HazardModel:
    variant = Variant.parse(variant)
    if isinstance(data, IncidentTrace):
        categories = list(categories or data.categories)
        samples = data.samples()
    else:
        samples = list(data)
        categories = list(categories or sorted({c for s, _ in samples for c in s.incident_count}))
    if len(samples) < 2:
        raise FitError(f"need at least 2 completed incident intervals, got {len(samples)}")
    tbni = np.array([t for _, t in samples], dtype=float)

    if variant is Variant.EXPONENTIAL:
        return ExponentialModel(1.0 / float(tbni.mean()), categories)

    if variant is Variant.EXPONENTIAL_PER_INCIDENT_COUNT:
        buckets: dict[int, list[float]] = {}
        for s, t in samples:
            buckets.setdefault(s.total_incidents, []).append(t)
        rates = {k: 1.0 / float(np.mean(v)) for k, v in sorted(buckets.items())}
        return PerIncidentCountModel(rates, 1.0 / float(tbni.mean()), categories)

    if variant is Variant.EXPONENTIAL_PER_HOUR:
        hours = np.arange(0, int(math.ceil(cap)) + 1)
        ordered = np.sort(tbni)
        alive = tbni.size - np.searchsorted(ordered, hours, side="left")
        return PerHourModel((alive / tbni.size).tolist(), categories)

    X = np.array([s.covariates(categories) for s, _ in samples])
    return fit_cox_linear(X, tbni, categories, **cox_kwargs)


def model_accuracy(model: HazardModel, samples: Iterable[tuple[NodeStatus, float]],
                   cap: float = TBNI_CAP_HOURS) -> float:
    """Mean of ``1 - |min(pred, cap) - min(truth, cap)| / cap`` over the samples."""
    scores = [1.0 - abs(min(model.predict_tbni(s, cap), cap) - min(t, cap)) / cap
              for s, t in samples]
    if not scores:
        raise ValueError("accuracy needs at least one test sample")
    return float(np.mean(scores))


def accuracy_from_predictions(predictions: Sequence[float], truths: Sequence[float],
                              cap: float = TBNI_CAP_HOURS) -> float:
    p = np.minimum(np.asarray(predictions, dtype=float), cap)
    t = np.minimum(np.asarray(truths, dtype=float), cap)
    return float(np.mean(1.0 - np.abs(p - t) / cap))


def train_test_split(samples: Sequence, train_fraction: float = 0.8, seed: int = 0):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(samples))
    cut = int(round(train_fraction * len(samples)))
    return [samples[i] for i in sorted(idx[:cut])], [samples[i] for i in sorted(idx[cut:])]
