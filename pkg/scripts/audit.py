"""Run the full audit and print one line per check."""

import argparse
import sys
import time

from fejer import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=verify.DEFAULT_SAMPLES)
    ap.add_argument("--fault", choices=verify.FAULTS)
    ap.add_argument("names", nargs="*", help="catalog instances (default: all, plus structural checks)")
    args = ap.parse_args()
    t = time.perf_counter()
    reps = verify.run_full_audit(args.names or None, seed=args.seed, samples=args.samples, fault=args.fault)
    for r in reps:
        print(r.line())
    bad = sum(not r.passed for r in reps)
    print(f"{len(reps) - bad}/{len(reps)} passed in {time.perf_counter() - t:.1f}s")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
