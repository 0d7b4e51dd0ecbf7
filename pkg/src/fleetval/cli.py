"""Command-line entry point: ``fleetval <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 model or
infeasibility error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import records as rec
from .hazard import FitError, Variant, fit_model, model_accuracy, train_test_split
from .metricspace import InvalidInput
from .netscan import plan_full_scan, plan_quick_scan, verify_schedule
from .paramsearch import search_parameters
from .selector import select_benchmarks
from .simulator import Policy, SimConfig, run_simulation
from .validator import DEFAULT_ALPHA, ConfigurationError, filter_defects, learn_all

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4

log = logging.getLogger("fleetval")


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _path(args, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else Path(args.workspace) / p


def _emit(args, text_lines, records):
    if args.format == "records":
        for r in records:
            print(rec._dumps(r))
    else:
        for line in text_lines:
            print(line)


# -- criteria ------------------------------------------------------------------

def cmd_criteria_learn(args) -> int:
    samples = rec.read_samples(_path(args, args.samples))
    learned = learn_all(samples, args.alpha)
    rec.write_records(_path(args, args.out), rec.CRITERIA,
                      (rec.criteria_to_record(r.criteria) for r in learned.values()),
                      alpha=args.alpha)
    summary = [{"metric_id": m, "reference_node": r.criteria.reference_sample.node_id,
                "defects": sorted(s.node_id for s in r.defects), "iterations": r.iterations}
               for m, r in learned.items()]
    n_def = sum(len(s["defects"]) for s in summary)
    lines = [f"learned criteria for {len(summary)} metrics (alpha={args.alpha}); {n_def} defective samples"]
    lines += [f"  {s['metric_id']}: reference {s['reference_node']}, defects "
              f"{', '.join(s['defects']) or '-'}" for s in summary]
    _emit(args, lines, summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    criteria = rec.read_criteria(_path(args, args.criteria))
    results = rec.read_samples(_path(args, args.results))
    try:
        verdicts = filter_defects(results, criteria)
    except ConfigurationError as exc:
        raise CommandError(str(exc), EXIT_DATA) from None
    out = [rec.verdict_to_record(v) for v in verdicts]
    if args.out:
        rec.write_records(_path(args, args.out), rec.VERDICTS, out)
    n_def = sum(v.defect for v in verdicts)
    rate = n_def / len(verdicts) if verdicts else 0.0
    lines = [f"{v.node_id}: DEFECT ({', '.join(v.violating_metrics)})" for v in verdicts if v.defect]
    lines.append(f"{n_def} defective of {len(verdicts)} nodes (defect rate {rate:.4f})")
    _emit(args, lines, out + [{"summary": True, "defects": n_def, "nodes": len(verdicts),
                               "defect_rate": rate}])
    return EXIT_OK


def cmd_param_search(args) -> int:
    series = rec.read_step_series(_path(args, args.steps))
    choice = search_parameters(series, args.alpha, args.cycles)
    record = {"warmup": choice.warmup, "measure": choice.measure, "period": choice.period,
              "repeatability": None if choice.fallback else choice.score, "fallback": choice.fallback}
    _emit(args, [f"warmup={choice.warmup} measure={choice.measure} period={choice.period}"
                 + (" (fallback: no stable window)" if choice.fallback else
                    f" repeatability={choice.score:.4f}")], [record])
    return EXIT_OK


# -- selection -----------------------------------------------------------------

def cmd_fit_model(args) -> int:
    trace = rec.read_incidents(_path(args, args.trace))
    samples = trace.samples()
    if len(samples) < 10:
        raise CommandError(f"need at least 10 (status, TBNI) samples, trace yields {len(samples)}",
                           EXIT_MODEL)
    train, test = train_test_split(samples, 0.8, args.seed)
    try:
        model = fit_model(train, args.variant, categories=trace.categories)
    except FitError as exc:
        raise CommandError(str(exc), EXIT_MODEL) from None
    acc = model_accuracy(model, test)
    rec.atomic_write_text(_path(args, args.out),
                          rec.render_model(model, seed=args.seed, train=len(train), test=len(test)))
    _emit(args, [f"fitted {model.variant.value} on {len(train)} samples; "
                 f"held-out accuracy {acc:.2%} over {len(test)} samples"],
          [{"variant": model.variant.value, "train": len(train), "test": len(test), "accuracy": acc}])
    return EXIT_OK


def cmd_select(args) -> int:
    model_path = _path(args, args.model)
    if not model_path.exists():
        raise CommandError(f"no fitted model at {model_path}; run `fleetval fit-model` first",
                           EXIT_MODEL)
    model = rec.read_model(model_path)
    statuses = rec.read_statuses(_path(args, args.status))
    table = rec.read_coverage(_path(args, args.coverage))
    try:
        outcome = select_benchmarks(statuses, table, model, args.p0, args.t0)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_MODEL) from None
    record = {**outcome.to_record(), "t0_hours": args.t0, "nodes": len(statuses)}
    if args.out:
        rec.write_records(_path(args, args.out), rec.SELECTION, [record])
    if outcome.skipped:
        line = (f"skipped: incident probability {outcome.initial_probability:.4f} "
                f"<= p0 {args.p0}")
    else:
        line = (f"{record['status']}: {', '.join(outcome.chosen)}; coverage {outcome.coverage:.3f}, "
                f"residual {outcome.residual_probability:.4f}, time {outcome.total_time_hours:.2f} h")
    _emit(args, [line], [record])
    return EXIT_OK


# -- scans -----------------------------------------------------------------------

def cmd_scan_plan(args) -> int:
    topo = None
    if args.mode == "full":
        if args.count is not None:
            if args.count < 2:
                raise CommandError("full scan needs at least two NICs", EXIT_DATA)
            nics = [f"nic-{i:04d}" for i in range(args.count)]
        elif args.nodes:
            text = _path(args, args.nodes).read_text(encoding="utf-8")
            nics = [line.strip() for line in text.splitlines() if line.strip()]
        else:
            raise CommandError("full scan needs --count or --nodes", EXIT_USAGE)
        schedule = plan_full_scan(nics)
        report = verify_schedule(schedule, "full", nodes=nics)
    else:
        if not args.topology:
            raise CommandError("quick scan needs --topology", EXIT_USAGE)
        topo = rec.read_topology(_path(args, args.topology))
        schedule = plan_quick_scan(topo)
        report = verify_schedule(schedule, "quick", topology=topo)
    records = rec.schedule_records(schedule, report)
    if args.out:
        rec.write_records(_path(args, args.out), rec.SCHEDULE, records, mode=args.mode)
    lines = [f"round {r['round']}: {len(r['pairs'])} pairs" + (f" at {r['hops']} hops" if "hops" in r else "")
             for r in records[:-1]]
    lines.append("verification: " + ("ok" if report.ok else f"{len(report.violations)} violations"))
    lines += [f"  {v}" for v in report.violations]
    _emit(args, lines, records)
    return EXIT_OK if report.ok else EXIT_DATA


# -- simulation ---------------------------------------------------------------

SIM_CONFIG_SCHEMA = "fleetval.sim-config"
_SIM_KEYS = {
    "schema", "version", "nodes", "horizon_hours", "policies", "seeds", "p0", "t0_hours",
    "detection_window_hours", "repair_hours_no_validation", "repair_hours_with_validation",
    "stressed", "incident_trace", "model", "model_variant", "allocation_trace", "coverage",
}


def load_sim_config(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise rec.DataError(path, None, f"cannot read: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise rec.DataError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise rec.DataError(path, None, "config must be a JSON object")
    if doc.get("schema") != SIM_CONFIG_SCHEMA or doc.get("version") != rec.VERSION:
        raise rec.DataError(path, None, f"expected schema {SIM_CONFIG_SCHEMA!r} version {rec.VERSION}")
    unknown = set(doc) - _SIM_KEYS
    if unknown:
        raise rec.DataError(path, None, f"unknown config keys: {sorted(unknown)}")
    for key in ("allocation_trace", "incident_trace"):
        if key not in doc:
            raise rec.DataError(path, None, f"missing config key {key!r}")
    try:
        doc["policies"] = [Policy.parse(p) for p in doc.get("policies", [p.value for p in Policy])]
    except ValueError as exc:
        raise rec.DataError(path, None, str(exc)) from None
    return doc


def cmd_simulate(args) -> int:
    cfg_path = _path(args, args.config)
    doc = load_sim_config(cfg_path)
    base = cfg_path.parent

    def resolve(key):
        p = Path(doc[key])
        return p if p.is_absolute() else base / p

    trace = rec.read_incidents(resolve("incident_trace"))
    allocs = rec.read_allocations(resolve("allocation_trace"))
    table = rec.read_coverage(resolve("coverage")) if "coverage" in doc else None
    if "model" in doc:
        model = rec.read_model(resolve("model"))
    else:
        try:
            model = fit_model(trace, doc.get("model_variant", "exponential"))
        except FitError as exc:
            raise CommandError(str(exc), EXIT_MODEL) from None
    seeds = doc.get("seeds", [args.seed])
    reports = []
    for policy in doc["policies"]:
        for seed in seeds:
            try:
                cfg = SimConfig(
                    policy=policy, nodes=int(doc.get("nodes", 50)),
                    horizon_hours=float(doc.get("horizon_hours", args.horizon_hours)),
                    repair_hours_no_validation=float(doc.get("repair_hours_no_validation", 36.0)),
                    repair_hours_with_validation=float(doc.get("repair_hours_with_validation", 1.0)),
                    p0=float(doc.get("p0", 0.1)), t0_hours=doc.get("t0_hours"),
                    detection_window_hours=doc.get("detection_window_hours"),
                    seed=int(seed), stressed=bool(doc.get("stressed", True)),
                    audit=bool(args.audit))
            except (TypeError, ValueError) as exc:
                raise rec.DataError(cfg_path, None, str(exc)) from None
            result = run_simulation(cfg, model, allocs, table, trace.category_frequencies())
            reports.append((result.report, result.audit))

    rows = [r.to_record() for r, _ in reports]
    header = {k: (v if k != "policies" else [p.value for p in v]) for k, v in doc.items()
              if k not in ("schema", "version")}
    header["seeds"] = list(seeds)
    if args.out:
        rec.write_records(_path(args, args.out), rec.SIM_REPORT, rows, config=header)
    if args.audit:
        audit_rows = [dict(e, policy=r.policy, seed=r.seed) for r, log_ in reports for e in log_]
        rec.write_records(_path(args, args.audit), "fleetval.sim-audit", audit_rows)
    lines = [f"{'policy':<10} {'seed':>5} {'util':>7} {'valid h':>8} {'MTBI h':>9} {'incid/node':>10}"]
    for r, _ in reports:
        mtbi = "no-incid" if r.mtbi_is_sentinel else f"{r.mtbi_hours:.2f}"
        lines.append(f"{r.policy:<10} {r.seed:>5} {r.utilization:>7.4f} "
                     f"{r.validation_hours_per_node:>8.2f} {mtbi:>9} {r.incidents_per_node:>10.3f}")
    _emit(args, lines, rows)
    return EXIT_OK


# -- wiring --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fleetval", description=__doc__.splitlines()[0])
    p.add_argument("--workspace", default=".", help="base directory for relative paths")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.add_argument("-v", "--verbose", action="store_true")
    # The same flags after the subcommand; SUPPRESS keeps them from clobbering earlier values.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default=argparse.SUPPRESS)
    common.add_argument("--format", choices=("text", "records"), default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    c = sub.add_parser("criteria-learn", help="learn per-metric criteria from fleet samples")
    c.add_argument("--samples", required=True)
    c.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_criteria_learn)

    c = sub.add_parser("validate", help="score results against criteria and flag defects")
    c.add_argument("--results", required=True)
    c.add_argument("--criteria", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_validate)

    c = sub.add_parser("param-search", help="search warmup/measurement steps for step series")
    c.add_argument("--steps", required=True)
    c.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    c.add_argument("--cycles", type=int, default=3)
    c.set_defaults(func=cmd_param_search)

    variants = [v.value for v in Variant]
    c = sub.add_parser("fit-model", help=f"fit an incident model ({', '.join(variants)})")
    c.add_argument("--trace", required=True)
    c.add_argument("--variant", choices=variants, default=Variant.EXPONENTIAL.value,
                   help="one of: " + ", ".join(variants))
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_fit_model)

    c = sub.add_parser("select", help="select a benchmark subset for a node set")
    c.add_argument("--status", required=True)
    c.add_argument("--coverage", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--p0", type=float, required=True)
    c.add_argument("--t0", type=float, required=True, help="horizon in hours")
    c.add_argument("--out")
    c.set_defaults(func=cmd_select)

    c = sub.add_parser("scan-plan", help="plan a full or quick network scan")
    c.add_argument("--mode", choices=("full", "quick"), required=True)
    c.add_argument("--count", type=int)
    c.add_argument("--nodes", help="file with one NIC id per line (full mode)")
    c.add_argument("--topology", help="topology records (quick mode)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_scan_plan)

    c = sub.add_parser("simulate", help="run the policy-comparison simulation")
    c.add_argument("--config", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--horizon-hours", type=float, default=720.0)
    c.add_argument("--out")
    c.add_argument("--audit", help="write a per-event audit log here")
    c.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (rec.DataError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
