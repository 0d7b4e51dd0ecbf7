"""Search warmup and measurement length on series with a warmup ramp."""

import argparse

from fleetval.paramsearch import estimate_period, search_parameters
from fleetval.synthetic import warmup_periodic_series
from fleetval.validator import repeatability


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--warmup", type=int, default=100)
    ap.add_argument("--period", type=int, default=10)
    args = ap.parse_args()

    series = warmup_periodic_series(args.seed, warmup=args.warmup, length=600, period=args.period)
    print("estimated periods:", [estimate_period(s.values) for s in series])
    choice = search_parameters(series, 0.95)
    full = repeatability([s.window(args.warmup, 600 - args.warmup) for s in series])
    print(f"warmup={choice.warmup} measure={choice.measure} period={choice.period} "
          f"repeatability={choice.score:.4f} (full stationary region {full:.4f})")
    print(f"measured steps: {choice.measure} of {600 - args.warmup} "
          f"({1 - choice.measure / (600 - args.warmup):.0%} fewer)")


if __name__ == "__main__":
    main()
