"""Surface-reaction ridge function in 20 dimensions with two active directions.

Reduced rules are built for the pushed-forward measure on the zonotope
and compared with Monte Carlo and Sobol in the full space.

Usage: python scripts/ridge_zonotope.py [--degrees 1-12] [--out ridge.csv]
"""
import argparse

from quadgen.cli import BenchmarkSpec, _int_list, run_benchmark, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--degrees", default="1-12")
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="ridge_zonotope.csv")
    args = ap.parse_args()
    spec = BenchmarkSpec("chem-ridge", 20, {"s": 2, "d": 20, "A_seed": 0},
                         methods=["reduced", "mc", "sobol"], degrees=_int_list(args.degrees),
                         sizes=[2 ** j for j in range(2, 14)], reps=args.reps)
    write_csv(run_benchmark(spec, args.jobs), args.out)


if __name__ == "__main__":
    main()
