"""Trace-driven discrete-event simulation of a cluster under validation policies.

The clock runs in integer seconds so per-node time accounting is exact:
up + down + validation always equals the simulated horizon.

Defect model. A node that is allocated without a pending incident draws the
time of its next one from the incident model (or takes it from an explicit
schedule). The pending incident belongs to the node: it survives job
boundaries and strikes in wall-clock time, whatever the node is doing, until
it either happens or validation catches it. Validation sees the defect when
the incident would strike within the detection window after validation ends
(by default: before the job would finish) and catches it with probability
equal to the chosen subset's historical coverage. Caught nodes take the fast
repair path and the job returns to the rear of the queue. Uncaught incidents
interrupt the job, which keeps its progress and re-queues.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
from collections import Counter, deque
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .hazard import HazardModel, NodeStatus
from .selector import CoverageTable, joint_incident_probability, select_from_probability

log = logging.getLogger(__name__)

HOUR = 3600


class Policy(str, enum.Enum):
    ABSENCE = "absence"
    FULL_SET = "full-set"
    SELECTOR = "selector"
    IDEAL = "ideal"

    @classmethod
    def parse(cls, value: "Policy | str") -> "Policy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"fullset": "full-set", "full": "full-set", "none": "absence"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class SimConfig:
    policy: Policy = Policy.SELECTOR
    nodes: int = 50
    horizon_hours: float = 720.0
    repair_hours_no_validation: float = 36.0
    repair_hours_with_validation: float = 1.0
    p0: float = 0.1
    # None: horizon for the selector is the job's remaining duration.
    t0_hours: float | None = None
    # None: validation sees any defect that would strike before the job ends.
    detection_window_hours: float | None = None
    seed: int = 0
    stressed: bool = True
    audit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy.parse(self.policy))
        if self.horizon_hours <= 0:
            raise ValueError("horizon must be positive")
        if self.repair_hours_no_validation <= 0 or self.repair_hours_with_validation <= 0:
            raise ValueError("repair durations must be positive")
        if self.nodes < 1:
            raise ValueError("cluster needs at least one node")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")


@dataclass(frozen=True)
class AllocationRequest:
    count: int
    submit_ts: int
    duration_hours: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("allocation must request at least one node")
        if not self.duration_hours > 0:
            raise ValueError("allocation duration must be positive")


@dataclass
class SimNode:
    node_id: str
    state: str = "idle"
    since: int = 0
    up_s: int = 0
    busy_s: int = 0
    validation_s: int = 0
    down_s: int = 0
    incidents: int = 0
    caught: int = 0
    last_incident_end: int = 0
    incident_count: Counter = field(default_factory=Counter)
    pending_at: int | None = None
    pending_token: int = 0
    alloc_id: int | None = None

    def enter(self, state: str, now: int) -> None:
        spent = now - self.since
        if self.state in ("idle", "busy"):
            self.up_s += spent
            if self.state == "busy":
                self.busy_s += spent
        elif self.state == "validating":
            self.validation_s += spent
        elif self.state == "repair":
            self.down_s += spent
        self.state, self.since = state, now

    def status(self, now: int, categories: Sequence[str]) -> NodeStatus:
        up = (self.up_s + (now - self.since if self.state in ("idle", "busy") else 0)) / HOUR
        return NodeStatus(
            node_id=self.node_id,
            uptime_hours=up,
            hours_since_last_incident=(now - self.last_incident_end) / HOUR,
            incident_count=dict(self.incident_count),
            mtbi_hours={c: up / self.incident_count[c] if self.incident_count[c] else up
                        for c in categories},
            observed_ts=now,
        )


@dataclass
class SimReport:
    policy: str
    seed: int
    utilization: float
    busy_utilization: float
    validation_hours_per_node: float
    mtbi_hours: float
    incidents_per_node: float
    caught_defects_per_node: float
    jobs_completed: int
    jobs_skipped: int = 0

    @property
    def mtbi_is_sentinel(self) -> bool:
        return math.isinf(self.mtbi_hours)

    def to_record(self) -> dict:
        rec = asdict(self)
        if self.mtbi_is_sentinel:
            rec["mtbi_hours"] = "inf"
        return rec


def compute_metrics(nodes: Sequence[SimNode], horizon_hours: float, policy: str = "",
                    seed: int = 0, jobs_completed: int = 0, jobs_skipped: int = 0) -> SimReport:
    """Fleet averages; MTBI pools up time over pooled incidents (``inf`` if none)."""
    if not nodes:
        raise ValueError("no nodes to report on")
    total = horizon_hours * HOUR
    up = sum(n.up_s for n in nodes)
    incidents = sum(n.incidents for n in nodes)
    k = len(nodes)
    return SimReport(
        policy=policy,
        seed=seed,
        utilization=float(np.mean([n.up_s / total for n in nodes])),
        busy_utilization=float(np.mean([n.busy_s / total for n in nodes])),
        validation_hours_per_node=sum(n.validation_s for n in nodes) / HOUR / k,
        mtbi_hours=(up / HOUR / incidents) if incidents else math.inf,
        incidents_per_node=incidents / k,
        caught_defects_per_node=sum(n.caught for n in nodes) / k,
        jobs_completed=jobs_completed,
        jobs_skipped=jobs_skipped,
    )


def stressed_replay(requests: Sequence[AllocationRequest], cluster_size: int) -> list[AllocationRequest]:
    """Pull submissions forward so no job arrives after the point it could have started.

    An idealised FIFO schedule (no incidents, no validation) tracks when each
    request could start; whenever its submission lies later, that gap is cut
    and every later submission moves up by the same amount. Sizes, durations
    and order are untouched.
    """
    reqs = list(requests)
    if any(b.submit_ts < a.submit_ts for a, b in zip(reqs, reqs[1:])):
        raise ValueError("allocation trace must be ordered by submission time")
    out: list[AllocationRequest] = []
    running: list[tuple[int, int]] = []
    free = cluster_size
    shift = 0
    floor = None
    for r in reqs:
        cand = r.submit_ts - shift
        if r.count > cluster_size:
            out.append(replace(r, submit_ts=cand))
            continue
        t = cand if floor is None else floor
        while running and running[0][0] <= t:
            free += heapq.heappop(running)[1]
        while free < r.count:
            end, c = heapq.heappop(running)
            free += c
            t = max(t, end)
        if cand > t:
            shift += cand - t
            sub = t
        else:
            sub = cand
        out.append(replace(r, submit_ts=sub))
        start = max(sub, t)
        heapq.heappush(running, (start + round(r.duration_hours * HOUR), r.count))
        free -= r.count
        floor = start
    return out


@dataclass
class _Job:
    job_id: int
    count: int
    remaining_s: int
    attempts: int = 0


@dataclass
class _Allocation:
    alloc_id: int
    job: _Job
    nodes: list[str]
    start: int
    run_start: int
    coverage: float
    benchmarks: list[str]


@dataclass
class SimResult:
    report: SimReport
    nodes: list[SimNode]
    audit: list[dict]


class Simulation:
    def __init__(self, config: SimConfig, incidents: HazardModel | Mapping[str, Sequence[float]] | None,
                 allocations: Sequence[AllocationRequest], coverage: CoverageTable | None = None,
                 category_frequencies: Mapping[str, float] | None = None):
        self.cfg = config
        self.model = incidents if isinstance(incidents, HazardModel) else None
        self.schedule = None
        if incidents is not None and self.model is None:
            self.schedule = {k: sorted(round(h * HOUR) for h in v) for k, v in incidents.items()}
        if config.policy is Policy.SELECTOR and self.model is None:
            raise ValueError("selector policy needs a fitted incident model")
        self.table = coverage or CoverageTable([])
        if category_frequencies:
            cats = sorted(category_frequencies)
            w = np.array([category_frequencies[c] for c in cats], dtype=float)
            self.categories, self.cat_weights = cats, w / w.sum()
        else:
            cats = list(self.model.categories) if self.model is not None else []
            self.categories = cats or ["incident"]
            self.cat_weights = np.full(len(self.categories), 1.0 / len(self.categories))

        self.rng = np.random.default_rng(config.seed)
        self.horizon = round(config.horizon_hours * HOUR)
        self.nodes = {f"node-{i:03d}": SimNode(f"node-{i:03d}") for i in range(config.nodes)}
        self.node_queue: deque[str] = deque(self.nodes)
        self.job_queue: deque[_Job] = deque()
        self.events: list = []
        self._seq = 0
        self._alloc_ids = 0
        self.allocs: dict[int, _Allocation] = {}
        self.jobs_completed = 0
        self.jobs_skipped = 0
        self.audit: list[dict] = []

        reqs = list(allocations)
        if not reqs:
            raise ValueError("allocation trace is empty")
        if config.stressed:
            reqs = stressed_replay(reqs, config.nodes)
        origin = reqs[0].submit_ts
        for i, r in enumerate(reqs):
            if r.count > config.nodes:
                log.warning("skipping request %d for %d nodes on a %d-node cluster", i, r.count, config.nodes)
                self.jobs_skipped += 1
                continue
            job = _Job(i, r.count, max(1, round(r.duration_hours * HOUR)))
            self._push(r.submit_ts - origin, "arrive", job)

    # -- event plumbing -------------------------------------------------

    def _push(self, t: int, kind: str, payload) -> None:
        heapq.heappush(self.events, (t, self._seq, kind, payload))
        self._seq += 1

    def _log(self, now: int, what: str, **info) -> None:
        if self.cfg.audit:
            self.audit.append({"t_hours": now / HOUR, "event": what, **info})

    @property
    def _validating(self) -> bool:
        return self.cfg.policy in (Policy.FULL_SET, Policy.SELECTOR)

    def _repair_s(self) -> int:
        hours = (self.cfg.repair_hours_with_validation if self._validating
                 else self.cfg.repair_hours_no_validation)
        return round(hours * HOUR)

    # -- core loop ------------------------------------------------------

    def run(self) -> SimResult:
        while self.events and self.events[0][0] < self.horizon:
            now, _, kind, payload = heapq.heappop(self.events)
            getattr(self, "_on_" + kind)(now, payload)
            self._dispatch(now)
        for n in self.nodes.values():
            n.enter(n.state, self.horizon)
        report = compute_metrics(list(self.nodes.values()), self.cfg.horizon_hours,
                                 self.cfg.policy.value, self.cfg.seed,
                                 self.jobs_completed, self.jobs_skipped)
        return SimResult(report, list(self.nodes.values()), self.audit)

    def _on_arrive(self, now: int, job: _Job) -> None:
        self.job_queue.append(job)
        self._log(now, "arrive", job=job.job_id, count=job.count)

    def _dispatch(self, now: int) -> None:
        while self.job_queue and len(self.node_queue) >= self.job_queue[0].count:
            job = self.job_queue.popleft()
            self._allocate(job, [self.node_queue.popleft() for _ in range(job.count)], now)

    # -- pending incidents ----------------------------------------------

    def _arm(self, node_id: str, now: int) -> None:
        """Give an allocated node a pending incident if it has none."""
        node = self.nodes[node_id]
        if node.pending_at is not None or self.cfg.policy is Policy.IDEAL:
            return
        if self.schedule is None and self.model is None:
            return
        if self.schedule is not None:
            pending = self.schedule.get(node_id, [])
            while pending and pending[0] < now:
                pending.pop(0)
            at = pending[0] if pending else None
        else:
            t = self.model.sample_tbni(node.status(now, self.categories), self.rng)
            at = None if math.isinf(t) else now + round(t * HOUR)
        if at is None:
            return
        node.pending_at = at
        node.pending_token += 1
        self._push(at, "incident", (node_id, node.pending_token))

    def _disarm(self, node_id: str) -> None:
        node = self.nodes[node_id]
        if self.schedule is not None and node.pending_at is not None:
            pending = self.schedule.get(node_id, [])
            if pending and pending[0] == node.pending_at:
                pending.pop(0)
        node.pending_at = None
        node.pending_token += 1

    # -- allocation lifecycle -------------------------------------------

    def _allocate(self, job: _Job, nodes: list[str], now: int) -> None:
        job.attempts += 1
        for n in nodes:
            self._arm(n, now)

        chosen: list[str] = []
        if self.cfg.policy is Policy.FULL_SET:
            chosen = list(self.table.ids)
        elif self.cfg.policy is Policy.SELECTOR:
            statuses = [self.nodes[n].status(now, self.categories) for n in nodes]
            horizon = self.cfg.t0_hours if self.cfg.t0_hours is not None else job.remaining_s / HOUR
            p = joint_incident_probability(statuses, self.model, horizon)
            chosen = select_from_probability(p, self.table, self.cfg.p0).chosen
        v = round(self.table.total_hours(chosen) * HOUR) if chosen else 0
        cov = self.table.coverage(chosen) if chosen else 0.0

        self._alloc_ids += 1
        a = _Allocation(self._alloc_ids, job, nodes, now, now + v, cov, chosen)
        self.allocs[a.alloc_id] = a
        self._log(now, "allocate", job=job.job_id, nodes=list(nodes), benchmarks=chosen,
                  validation_hours=v / HOUR)
        for n in nodes:
            self.nodes[n].alloc_id = a.alloc_id
        if v:
            for n in nodes:
                self.nodes[n].enter("validating", now)
            self._push(now + v, "validated", a.alloc_id)
        else:
            self._start_run(a, now)

    def _start_run(self, a: _Allocation, now: int) -> None:
        for n in a.nodes:
            self.nodes[n].enter("busy", now)
        a.run_start = now
        self._push(now + a.job.remaining_s, "finish", a.alloc_id)

    def _on_validated(self, now: int, alloc_id: int) -> None:
        a = self.allocs.get(alloc_id)
        if a is None:
            return
        if self.cfg.detection_window_hours is None:
            reach = now + a.job.remaining_s
        else:
            reach = now + round(self.cfg.detection_window_hours * HOUR)
        caught = []
        for n in a.nodes:
            at = self.nodes[n].pending_at
            if at is not None and at < reach and self.rng.random() < a.coverage:
                caught.append(n)
        if not caught:
            self._start_run(a, now)
            return
        del self.allocs[alloc_id]
        for n in caught:
            node = self.nodes[n]
            node.caught += 1
            node.alloc_id = None
            self._disarm(n)
            node.enter("repair", now)
            self._push(now + self._repair_s(), "repaired", n)
        self._release([n for n in a.nodes if n not in caught], now)
        self.job_queue.append(a.job)
        self._log(now, "caught", job=a.job.job_id, nodes=caught)

    def _on_finish(self, now: int, alloc_id: int) -> None:
        a = self.allocs.pop(alloc_id, None)
        if a is None:
            return
        self.jobs_completed += 1
        self._release(a.nodes, now)
        self._log(now, "finish", job=a.job.job_id)

    def _on_incident(self, now: int, payload) -> None:
        node_id, token = payload
        node = self.nodes[node_id]
        if token != node.pending_token:
            return
        category = self.categories[int(self.rng.choice(len(self.categories), p=self.cat_weights))]
        self._disarm(node_id)
        node.incidents += 1
        node.incident_count[category] += 1
        a = self.allocs.pop(node.alloc_id, None) if node.alloc_id is not None else None
        if node.state == "idle":
            self.node_queue.remove(node_id)
        node.alloc_id = None
        node.enter("repair", now)
        node.last_incident_end = now + self._repair_s()
        self._push(now + self._repair_s(), "repaired", node_id)
        if a is not None:
            if now > a.run_start:
                a.job.remaining_s = max(1, a.job.remaining_s - (now - a.run_start))
            self._release([m for m in a.nodes if m != node_id], now)
            self.job_queue.append(a.job)
        self._log(now, "incident", node=node_id, category=category,
                  job=None if a is None else a.job.job_id)

    def _on_repaired(self, now: int, node_id: str) -> None:
        self._release([node_id], now)
        self._log(now, "repaired", node=node_id)

    def _release(self, nodes: Sequence[str], now: int) -> None:
        for n in nodes:
            node = self.nodes[n]
            node.alloc_id = None
            node.enter("idle", now)
            self.node_queue.append(n)


def run_simulation(config: SimConfig, incidents: HazardModel | Mapping[str, Sequence[float]] | None,
                   allocations: Sequence[AllocationRequest], coverage: CoverageTable | None = None,
                   category_frequencies: Mapping[str, float] | None = None) -> SimResult:
    return Simulation(config, incidents, allocations, coverage, category_frequencies).run()
