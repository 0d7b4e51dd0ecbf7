"""Margin ratio of learned criteria versus an IQR fence on planted datasets."""

import argparse

from fleetval.synthetic import planted_cluster
from fleetval.validator import iqr_criteria, learn_criteria, margin_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print(f"{'seed':>4} {'learned':>9} {'iqr':>9} {'learned flags':>14} {'iqr flags':>10}")
    for seed in range(args.seeds):
        ds = planted_cluster(seed, n_marginal=2, node_spread=0.002, marginal_shift=0.015)
        res = learn_criteria(ds.samples, 0.95)
        bad = {s.node_id for s in res.defects}
        ours = margin_ratio(res.defects, [s for s in ds.samples if s.node_id not in bad], res.criteria)
        iqr = iqr_criteria(ds.samples)
        base = margin_ratio(iqr.defects, iqr.healthy, iqr.reference_sample)
        print(f"{seed:>4} {ours:9.2f} {base:9.2f} {len(res.defects):>14} {len(iqr.defects):>10}")


if __name__ == "__main__":
    main()
