"""Surface-reaction mean under the banana density, exact and sampled moments.

For each domain (I, II) and each moment source (exact, 10^4 and 10^6
rejection samples) the reduced-rule error is swept over degree.  Baselines
(Monte Carlo, Sobol, sparse grids) integrate the density-folded model on
the domain box.

Usage: python scripts/banana_chemical.py [--domains I,II] [--reps 3] [--out-prefix chem]
"""
import argparse

from quadgen.cli import BenchmarkSpec, run_benchmark, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--domains", default="I,II")
    ap.add_argument("--max-degree", type=int, default=18)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--samples", default="10000,1000000")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out-prefix", default="chem")
    args = ap.parse_args()
    degrees = list(range(2, args.max_degree + 1, 2))
    for dom in args.domains.split(","):
        base = BenchmarkSpec("chem", 2, {"domain": dom}, methods=["reduced", "mc", "sobol", "sparse-grid"],
                             degrees=degrees, levels=list(range(0, 8)), sizes=[2 ** j for j in range(2, 12)],
                             reps=args.reps)
        write_csv(run_benchmark(base, args.jobs), f"{args.out_prefix}_{dom}_exact.csv")
        for P in map(int, args.samples.split(",")):
            spec = BenchmarkSpec("chem", 2, {"domain": dom}, methods=["reduced"], degrees=degrees,
                                 reps=args.reps, moments={"method": "samples", "n": P})
            write_csv(run_benchmark(spec, args.jobs), f"{args.out_prefix}_{dom}_P{P}.csv")


if __name__ == "__main__":
    main()
