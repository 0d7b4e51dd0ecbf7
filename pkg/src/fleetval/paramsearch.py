"""Offline search for warmup and measurement step counts of end-to-end benchmarks."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metricspace import InvalidInput, MetricSample, similarity
from .validator import DEFAULT_ALPHA, repeatability

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepSeries:
    values: tuple[float, ...]
    node_id: str = "node"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise InvalidInput(f"series for {self.node_id!r} needs at least 2 steps")
        if not all(np.isfinite(vals)) or min(vals) < 0:
            raise InvalidInput(f"series for {self.node_id!r} has negative or non-finite steps")
        object.__setattr__(self, "values", vals)

    def window(self, start: int, length: int, metric_id: str = "steps") -> MetricSample:
        return MetricSample(self.values[start:start + length], metric_id, self.node_id)


@dataclass(frozen=True)
class WindowChoice:
    warmup: int
    measure: int
    period: int
    score: float
    fallback: bool = False


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; NaN where the window does not fit.

    Even windows use the classical 2xm weighting so the result stays centered.
    """
    if window % 2:
        w = np.full(window, 1.0 / window)
    else:
        w = np.r_[0.5, np.ones(window - 1), 0.5] / window
    half = len(w) // 2
    out = np.full(x.size, np.nan)
    if x.size >= len(w):
        out[half:x.size - half] = np.convolve(x, w, mode="valid")
    return out


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    x = x - x.mean()
    denom = float(np.dot(x, x))
    acf = np.zeros(max_lag + 1)
    if denom == 0.0:
        return acf
    for lag in range(max_lag + 1):
        acf[lag] = np.dot(x[: x.size - lag], x[lag:]) / denom
    return acf


def _lag_score(x: np.ndarray, lag: int) -> float:
    """Autocorrelation at ``lag`` after removing a centered moving average of width ``lag``.

    A width-``lag`` average cancels any ``lag``-periodic component exactly, so
    what it removes is the local trend (a warmup ramp, drift) and the residual
    keeps the periodic part.
    """
    trend = moving_average(x, lag)
    r = (x - trend)[~np.isnan(trend)]
    if r.size <= lag:
        return 0.0
    r = r - r.mean()
    denom = float(np.dot(r, r))
    return float(np.dot(r[:-lag], r[lag:]) / denom) if denom > 0 else 0.0


def estimate_period(values: Sequence[float], min_period: int = 2, max_period: int | None = None,
                    peak_fraction: float = 0.5) -> int:
    """Smallest lag-score peak (lag >= ``min_period``) reaching ``peak_fraction`` of the tallest.

    Series without periodic structure fall back to ``min_period``.
    """
    x = np.asarray(values, dtype=float)
    max_period = min(max_period or x.size // 2, x.size // 2)
    if max_period < min_period:
        return min_period
    lags = range(min_period, max_period + 1)
    sc = np.array([_lag_score(x, lag) for lag in lags])
    last = sc.size - 1
    peaks = [i for i in range(sc.size)
             if sc[i] > 0 and (i == 0 or sc[i] >= sc[i - 1]) and (i == last or sc[i] >= sc[i + 1])]
    if not peaks:
        return min_period
    tallest = max(sc[i] for i in peaks)
    return lags[next(i for i in peaks if sc[i] >= peak_fraction * tallest)]


def _cycle_samples(series: StepSeries, period: int) -> list[MetricSample]:
    n = len(series.values) // period
    return [series.window(i * period, period) for i in range(n)]


def stable_window(series: StepSeries, alpha: float = DEFAULT_ALPHA, cycles: int = 3,
                  period: int | None = None) -> tuple[int, int, int] | None:
    """Earliest run of ``cycles`` consecutive, pairwise-similar cycles.

    Returns ``(warmup, measure, period)`` in steps, or ``None`` when no run
    clears ``alpha``.
    """
    if period is None:
        period = estimate_period(series.values, max_period=max(2, len(series.values) // (2 * cycles)))
    chunks = _cycle_samples(series, period)
    if len(chunks) < cycles:
        return None
    # sim[i] holds similarities of cycle i with the next cycles-1 cycles.
    cache: dict[tuple[int, int], float] = {}

    def sim(i, j):
        if (i, j) not in cache:
            cache[(i, j)] = similarity(chunks[i], chunks[j])
        return cache[(i, j)]

    for start in range(len(chunks) - cycles + 1):
        run = range(start, start + cycles)
        if all(sim(i, j) > alpha for i, j in itertools.combinations(run, 2)):
            return start * period, cycles * period, period
    return None


def search_parameters(series: Sequence[StepSeries], alpha: float = DEFAULT_ALPHA,
                      cycles: int = 3) -> WindowChoice:
    """Pick the (warmup, measure) pair that maximises cross-node repeatability.

    Each series proposes its own earliest stable window; every proposal is
    applied to all series and scored by mean pairwise similarity. Ties go to
    the shorter measurement, then the shorter warmup.
    """
    series = list(series)
    if not series:
        raise InvalidInput("no step series given")
    k_min = min(len(s.values) for s in series)
    proposals = {}
    for s in series:
        found = stable_window(s, alpha, cycles)
        if found is not None:
            w, n, p = found
            if w + n <= k_min:
                proposals.setdefault((w, n), p)
    if not proposals:
        log.warning("no stable window found; measuring full series")
        return WindowChoice(0, k_min, k_min, float("nan"), fallback=True)

    best = None
    for (w, n), p in sorted(proposals.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        windows = [s.window(w, n) for s in series]
        score = repeatability(windows) if len(windows) > 1 else 1.0
        if best is None or score > best.score:
            best = WindowChoice(w, n, p, score)
    return best
