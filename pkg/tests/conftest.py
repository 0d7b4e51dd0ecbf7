import json

import pytest

from fleetval import records as rec
from fleetval import synthetic
from fleetval.hazard import NodeStatus
from fleetval.netscan import FatTreeTopology


@pytest.fixture
def workspace(tmp_path):
    """Small synthetic dataset on disk, one file per input format."""
    ds = synthetic.planted_cluster(seed=2)
    rec.write_samples(tmp_path / "samples.jsonl", ds.samples)
    rec.write_incidents(tmp_path / "incidents.jsonl", synthetic.constant_hazard_trace(0, n_nodes=20))
    rec.write_allocations(tmp_path / "allocs.jsonl", synthetic.allocation_trace(0, n_jobs=120))
    rec.write_coverage(tmp_path / "coverage.jsonl", synthetic.coverage_table())
    rec.write_topology(tmp_path / "topo.jsonl", FatTreeTopology.regular([2], 2))
    statuses = [NodeStatus(f"node-{i:03d}", 200.0, 20.0) for i in range(8)]
    rec.write_records(tmp_path / "status.jsonl", rec.STATUSES, [rec.status_to_record(s) for s in statuses])
    steps = synthetic.warmup_periodic_series(0, n_series=3)
    rec.write_records(tmp_path / "steps.jsonl", rec.STEPS,
                      [{"node_id": s.node_id, "values": list(s.values)} for s in steps])
    (tmp_path / "sim.json").write_text(json.dumps({
        "schema": "fleetval.sim-config", "version": 1, "nodes": 20, "horizon_hours": 240,
        "policies": ["absence", "full-set", "selector", "ideal"], "seeds": [0, 1], "p0": 0.3,
        "detection_window_hours": 24, "incident_trace": "incidents.jsonl",
        "allocation_trace": "allocs.jsonl", "coverage": "coverage.jsonl",
    }))
    return tmp_path


# -- acceptance summary: one PASS/FAIL line per criterion ----------------------

_criteria_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed:
        msg = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
        detail = f"{detail} | {msg}" if detail else msg
    _criteria_results[marker.args[0]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria_results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria_results):
        status, detail = _criteria_results[n]
        terminalreporter.write_line(f"CRITERION {n}: {status} - {detail}")
