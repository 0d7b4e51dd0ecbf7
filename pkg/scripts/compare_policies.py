"""Compare validation policies on synthetic traces across several seeds.

Usage: python3 scripts/compare_policies.py [--seeds 10] [--nodes 50]
"""

import argparse
import statistics

from fleetval.hazard import fit_model
from fleetval.simulator import SimConfig, run_simulation
from fleetval.synthetic import allocation_trace, constant_hazard_trace, coverage_table

POLICIES = ("absence", "full-set", "selector", "ideal")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--nodes", type=int, default=50)
    ap.add_argument("--horizon-hours", type=float, default=720)
    ap.add_argument("--p0", type=float, default=0.3)
    args = ap.parse_args()

    table = coverage_table()
    rows = {p: [] for p in POLICIES}
    for seed in range(args.seeds):
        trace = constant_hazard_trace(seed, n_nodes=args.nodes, rate_per_hour=0.01)
        model = fit_model(trace, "exponential")
        allocs = allocation_trace(seed)
        for policy in POLICIES:
            cfg = SimConfig(policy=policy, nodes=args.nodes, horizon_hours=args.horizon_hours,
                            p0=args.p0, seed=seed, detection_window_hours=24)
            rows[policy].append(run_simulation(cfg, model, allocs, table, trace.category_frequencies()).report)

    print(f"{'policy':<10} {'util':>7} {'valid h/node':>13} {'MTBI h':>9} {'incid/node':>11}")
    for policy, reps in rows.items():
        mtbi = [r.mtbi_hours for r in reps]
        mtbi_s = "inf" if any(m == float("inf") for m in mtbi) else f"{statistics.mean(mtbi):9.1f}"
        print(f"{policy:<10} {statistics.mean(r.utilization for r in reps):7.4f} "
              f"{statistics.mean(r.validation_hours_per_node for r in reps):13.2f} {mtbi_s:>9} "
              f"{statistics.mean(r.incidents_per_node for r in reps):11.3f}")


if __name__ == "__main__":
    main()
