"""Corner-peak convergence in two dimensions against every baseline.

Reduced and l1-initial rules for degrees 1..20 over 10 seeds, Monte Carlo
over 10 seeds, Sobol, Clenshaw-Curtis sparse grids and the Stroud rules.

Usage: python scripts/cp_convergence.py [--reps 10] [--jobs 1] [--out cp_d2.csv]
"""
import argparse

from quadgen.cli import BenchmarkSpec, run_benchmark, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--max-degree", type=int, default=20)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="cp_convergence.csv")
    args = ap.parse_args()
    spec = BenchmarkSpec("cp", args.dim, {"coef_seed": 0},
                         methods=["reduced", "l1-initial", "mc", "sobol", "sparse-grid", "stroud2", "stroud3"],
                         degrees=list(range(1, args.max_degree + 1)), levels=list(range(0, 9)),
                         sizes=[2 ** j for j in range(2, 12)], reps=args.reps)
    write_csv(run_benchmark(spec, args.jobs), args.out)


if __name__ == "__main__":
    main()
