"""Line-delimited JSON formats.

Every file starts with a header line ``{"schema": <name>, "version": <int>, ...}``
followed by one JSON object per line. Reading a file checks the schema name
and version exactly; any mismatch or malformed line raises :class:`DataError`
carrying the 1-based line number. Writes go to a temporary file in the target
directory and are renamed into place, so a failed command leaves no partial
output behind.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .hazard import HazardModel, IncidentEvent, IncidentTrace, NodeStatus, model_from_dict
from .metricspace import Direction, MetricSample
from .netscan import FatTreeTopology, ScanSchedule, VerificationReport
from .paramsearch import StepSeries
from .selector import BenchmarkInfo, CoverageTable
from .simulator import AllocationRequest
from .validator import Criteria, ValidationVerdict

VERSION = 1

SAMPLES = "fleetval.samples"
CRITERIA = "fleetval.criteria"
VERDICTS = "fleetval.verdicts"
INCIDENTS = "fleetval.incidents"
COVERAGE = "fleetval.coverage"
ALLOCATIONS = "fleetval.allocations"
STATUSES = "fleetval.statuses"
MODEL = "fleetval.model"
TOPOLOGY = "fleetval.topology"
SCHEDULE = "fleetval.schedule"
SELECTION = "fleetval.selection"
SIM_REPORT = "fleetval.sim-report"
STEPS = "fleetval.steps"


class DataError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        self.path, self.line = str(path), line
        where = f"{self.path}:{line}" if line else self.path
        super().__init__(f"{where}: {message}")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_records(schema: str, records: Iterable[Mapping], **header) -> str:
    lines = [_dumps({"schema": schema, "version": VERSION, **header})]
    lines += [_dumps(dict(r)) for r in records]
    return "\n".join(lines) + "\n"


def write_records(path, schema: str, records: Iterable[Mapping], **header) -> None:
    atomic_write_text(path, render_records(schema, records, **header))


def read_records(path, schema: str) -> tuple[dict, list[tuple[int, dict]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(path, None, f"cannot read: {exc.strerror or exc}") from exc
    header = None
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(path, lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise DataError(path, lineno, "each line must be a JSON object")
        if header is None:
            if obj.get("schema") != schema:
                raise DataError(path, lineno, f"expected schema {schema!r}, found {obj.get('schema')!r}")
            if obj.get("version") != VERSION:
                raise DataError(path, lineno,
                                f"schema {schema!r} version {obj.get('version')!r} is not supported "
                                f"(expected {VERSION})")
            header = obj
            continue
        out.append((lineno, obj))
    if header is None:
        raise DataError(path, None, "missing header line")
    return header, out


def _parse_each(path, schema: str, parse: Callable[[dict], Any]):
    header, rows = read_records(path, schema)
    items = []
    for lineno, obj in rows:
        try:
            items.append(parse(obj))
        except (KeyError, TypeError, ValueError) as exc:
            msg = f"missing field {exc.args[0]!r}" if isinstance(exc, KeyError) else str(exc)
            raise DataError(path, lineno, msg) from None
    return header, items


# -- samples / criteria / verdicts -------------------------------------------

def sample_to_record(s: MetricSample) -> dict:
    return {"node_id": s.node_id, "metric_id": s.metric_id, "direction": s.direction.value,
            "values": list(s.values)}


def _sample(obj: dict) -> MetricSample:
    values = obj["values"]
    if not isinstance(values, list):
        raise ValueError("'values' must be a list")
    return MetricSample(tuple(values), str(obj["metric_id"]), str(obj["node_id"]),
                        Direction.parse(obj["direction"]))


def read_samples(path) -> list[MetricSample]:
    return _parse_each(path, SAMPLES, _sample)[1]


def write_samples(path, samples: Iterable[MetricSample]) -> None:
    write_records(path, SAMPLES, (sample_to_record(s) for s in samples))


def criteria_to_record(c: Criteria) -> dict:
    return {"metric_id": c.metric_id, "direction": c.direction.value, "alpha": c.alpha,
            "reference_node": c.reference_sample.node_id,
            "reference": list(c.reference_sample.values)}


def _criteria(obj: dict) -> Criteria:
    ref = MetricSample(tuple(obj["reference"]), str(obj["metric_id"]),
                       str(obj.get("reference_node", "criteria")), Direction.parse(obj["direction"]))
    return Criteria(ref.metric_id, ref, float(obj["alpha"]), ref.direction)


def read_criteria(path) -> dict[str, Criteria]:
    _, items = _parse_each(path, CRITERIA, _criteria)
    return {c.metric_id: c for c in items}


def verdict_to_record(v: ValidationVerdict) -> dict:
    return {"node_id": v.node_id, "defect": v.defect, "violating_metrics": v.violating_metrics,
            "scores": dict(sorted(v.scores.items()))}


# -- incidents / statuses / coverage / allocations / models ------------------

def _incident(obj: dict) -> IncidentEvent:
    start, end = int(obj["start_ts"]), int(obj["end_ts"])
    if end < start:
        raise ValueError("end_ts precedes start_ts")
    return IncidentEvent(str(obj["node_id"]), start, end, str(obj["category"]),
                         str(obj.get("component", "")))


def read_incidents(path) -> IncidentTrace:
    header, events = _parse_each(path, INCIDENTS, _incident)
    return IncidentTrace(events, list(header.get("categories", [])), header.get("start_ts"))


def write_incidents(path, trace: IncidentTrace) -> None:
    recs = ({"node_id": e.node_id, "start_ts": e.start_ts, "end_ts": e.end_ts,
             "category": e.category, "component": e.component} for e in trace.events)
    write_records(path, INCIDENTS, recs, categories=trace.categories, start_ts=trace.start_ts)


def _status(obj: dict) -> NodeStatus:
    return NodeStatus(
        node_id=str(obj["node_id"]),
        uptime_hours=float(obj["uptime_hours"]),
        hours_since_last_incident=float(obj["hours_since_last_incident"]),
        incident_count={str(k): int(v) for k, v in obj.get("incident_count", {}).items()},
        mtbi_hours={str(k): float(v) for k, v in obj.get("mtbi_hours", {}).items()},
        observed_ts=int(obj.get("observed_ts", 0)),
    )


def status_to_record(s: NodeStatus) -> dict:
    return {"node_id": s.node_id, "uptime_hours": s.uptime_hours,
            "hours_since_last_incident": s.hours_since_last_incident,
            "incident_count": dict(s.incident_count), "mtbi_hours": dict(s.mtbi_hours),
            "observed_ts": s.observed_ts}


def read_statuses(path) -> list[NodeStatus]:
    return _parse_each(path, STATUSES, _status)[1]


def _benchmark(obj: dict) -> BenchmarkInfo:
    return BenchmarkInfo(str(obj["benchmark_id"]), float(obj["running_time_s"]),
                         frozenset(str(d) for d in obj["defect_node_ids"]))


def read_coverage(path) -> CoverageTable:
    return CoverageTable(_parse_each(path, COVERAGE, _benchmark)[1])


def write_coverage(path, table: CoverageTable) -> None:
    write_records(path, COVERAGE, ({"benchmark_id": b.benchmark_id, "running_time_s": b.running_time_s,
                                    "defect_node_ids": sorted(b.defect_node_ids)}
                                   for b in table.benchmarks))


def _allocation(obj: dict) -> AllocationRequest:
    return AllocationRequest(int(obj["count"]), int(obj["submit_ts"]), float(obj["duration_hours"]))


def read_allocations(path) -> list[AllocationRequest]:
    return _parse_each(path, ALLOCATIONS, _allocation)[1]


def write_allocations(path, reqs: Iterable[AllocationRequest]) -> None:
    write_records(path, ALLOCATIONS, ({"count": r.count, "submit_ts": r.submit_ts,
                                       "duration_hours": r.duration_hours} for r in reqs))


def render_model(model: HazardModel, **extra) -> str:
    return render_records(MODEL, [model.to_dict()], **extra)


def read_model(path) -> HazardModel:
    header, items = _parse_each(path, MODEL, model_from_dict)
    if len(items) != 1:
        raise DataError(path, None, f"expected exactly one model record, found {len(items)}")
    return items[0]


def _step_series(obj: dict) -> StepSeries:
    return StepSeries(tuple(obj["values"]), str(obj["node_id"]))


def read_step_series(path) -> list[StepSeries]:
    return _parse_each(path, STEPS, _step_series)[1]


# -- topology / schedules ----------------------------------------------------

def read_topology(path) -> FatTreeTopology:
    header, rows = read_records(path, TOPOLOGY)
    if "tiers" not in header:
        raise DataError(path, 1, "topology header needs 'tiers'")
    switches, nodes = [], []
    for lineno, obj in rows:
        kind = obj.get("kind")
        if kind == "switch":
            switches.append(obj)
        elif kind == "node":
            nodes.append(obj)
        else:
            raise DataError(path, lineno, f"unknown record kind {kind!r}")
        missing = {"switch": ("id", "tier"), "node": ("id", "tor")}[kind]
        for key in missing:
            if key not in obj:
                raise DataError(path, lineno, f"missing field {key!r}")
    return FatTreeTopology.build(int(header["tiers"]), switches, nodes)


def topology_records(topo: FatTreeTopology) -> list[dict]:
    recs = [{"kind": "switch", "id": s, "tier": t, "parent": topo.switch_parent.get(s)}
            for s, t in sorted(topo.switch_tier.items(), key=lambda kv: (-kv[1], kv[0]))]
    recs += [{"kind": "node", "id": n, "tor": tor} for n, tor in sorted(topo.node_tor.items())]
    return recs


def write_topology(path, topo: FatTreeTopology) -> None:
    write_records(path, TOPOLOGY, topology_records(topo), tiers=topo.tiers)


def schedule_records(schedule: ScanSchedule, report: VerificationReport) -> list[dict]:
    recs = []
    for i, r in enumerate(schedule.rounds):
        rec = {"kind": "round", "round": i + 1, "pairs": [list(p) for p in r.pairs]}
        if r.hop is not None:
            rec["hops"] = r.hop
        if r.duplicates:
            rec["duplicate_pairs"] = [list(p) for p in r.duplicates]
        recs.append(rec)
    recs.append({"kind": "verification", "ok": report.ok, "violations": report.violations})
    return recs


def float_or_inf(x: float):
    return "inf" if isinstance(x, float) and math.isinf(x) else x
