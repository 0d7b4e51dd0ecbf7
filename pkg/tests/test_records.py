import pytest

from fleetval import records as rec
from fleetval.hazard import ExponentialModel
from fleetval.metricspace import Direction, MetricSample
from fleetval.validator import Criteria


def test_samples_round_trip(workspace):
    samples = rec.read_samples(workspace / "samples.jsonl")
    rec.write_samples(workspace / "again.jsonl", samples)
    assert (workspace / "again.jsonl").read_bytes() == (workspace / "samples.jsonl").read_bytes()


def test_criteria_round_trip(tmp_path):
    ref = MetricSample((1.5, 2.5), "lat", "n7", Direction.LOWER_IS_BETTER)
    crit = Criteria("lat", ref, 0.9, Direction.LOWER_IS_BETTER)
    rec.write_records(tmp_path / "c.jsonl", rec.CRITERIA, [rec.criteria_to_record(crit)])
    back = rec.read_criteria(tmp_path / "c.jsonl")["lat"]
    assert back == crit


def test_other_round_trips(workspace):
    trace = rec.read_incidents(workspace / "incidents.jsonl")
    assert trace.categories == ["gpu", "memory", "network"] and trace.events
    table = rec.read_coverage(workspace / "coverage.jsonl")
    assert table.total_hours(table.ids) == pytest.approx(6.0)
    assert len(rec.read_allocations(workspace / "allocs.jsonl")) == 120
    topo = rec.read_topology(workspace / "topo.jsonl")
    assert topo.tiers == 2 and len(topo.node_tor) == 4
    model = ExponentialModel(0.125, ["gpu"])
    (workspace / "m.jsonl").write_text(rec.render_model(model))
    assert rec.read_model(workspace / "m.jsonl") == model


def test_schema_and_version_checked(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"schema": "fleetval.samples", "version": 2}\n')
    with pytest.raises(rec.DataError, match="version 2 is not supported"):
        rec.read_samples(p)
    p.write_text('{"schema": "fleetval.coverage", "version": 1}\n')
    with pytest.raises(rec.DataError, match="expected schema 'fleetval.samples'"):
        rec.read_samples(p)
    p.write_text("")
    with pytest.raises(rec.DataError, match="missing header"):
        rec.read_samples(p)


def test_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "x.jsonl"
    good = '{"node_id": "a", "metric_id": "m", "direction": "higher", "values": [1]}'
    p.write_text('{"schema": "fleetval.samples", "version": 1}\n' + good + "\n{not json\n")
    with pytest.raises(rec.DataError) as exc:
        rec.read_samples(p)
    assert exc.value.line == 3 and f"{p}:3" in str(exc.value)
    p.write_text('{"schema": "fleetval.samples", "version": 1}\n' + good + '\n{"node_id": "b"}\n')
    with pytest.raises(rec.DataError, match=r":3: missing field"):
        rec.read_samples(p)
    p.write_text('{"schema": "fleetval.samples", "version": 1}\n'
                 '{"node_id": "a", "metric_id": "m", "direction": "higher", "values": [-1]}\n')
    with pytest.raises(rec.DataError, match=r":2: .*invalid value"):
        rec.read_samples(p)


def test_atomic_write_leaves_target_untouched_on_failure(tmp_path):
    target = tmp_path / "out.jsonl"
    target.write_text("old\n")

    def broken():
        yield {"ok": 1}
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        rec.write_records(target, rec.VERDICTS, broken())
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.jsonl"]


def test_non_finite_values_refused(tmp_path):
    with pytest.raises(ValueError):
        rec.write_records(tmp_path / "x.jsonl", rec.VERDICTS, [{"v": float("nan")}])


def test_float_or_inf():
    assert rec.float_or_inf(float("inf")) == "inf" and rec.float_or_inf(2.0) == 2.0
