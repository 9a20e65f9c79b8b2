"""Index-set statistics for the reference total-degree rows, optionally with generated rules.

Writes one CSV row per (dimension, degree): |Lambda|, L(Lambda), the
starting-size heuristic and, with --generate, rule sizes and iteration
counts over several seeds.  Rows above d=2 take hours when generated.

Usage: python scripts/index_set_sizes.py [--generate] [--rows 2:20,3:20] [--seeds 3] [--out sizes.csv]
"""
import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass

from quadgen.domains import TensorMeasure
from quadgen.indexset import heuristic_size, maximal_half_set, total_degree_set
from quadgen.moments import build_problem
from quadgen.reduce import generate

ROWS = [(2, 20), (3, 20), (4, 13), (5, 10), (10, 5)]


@dataclass
class Row:
    dim: int
    degree: int
    size: int
    L: int
    heuristic: int
    points: str = ""
    iterations: str = ""
    seconds: float = 0.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", help="comma-separated dim:degree pairs (default: all five rows)")
    ap.add_argument("--generate", action="store_true")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args()
    rows = [tuple(map(int, r.split(":"))) for r in args.rows.split(",")] if args.rows else ROWS
    out = []
    for d, k in rows:
        lam = total_degree_set(d, k)
        row = Row(d, k, len(lam), maximal_half_set(lam).size, heuristic_size(lam))
        if args.generate:
            t = time.time()
            prob = build_problem(TensorMeasure.uniform_cube(d), lam)
            rules = [generate(prob, seed=s) for s in range(args.seeds)]
            sizes = sorted(r.size for r in rules)
            its = sorted(r.metadata["iterations"] for r in rules)
            row.points = f"{sizes[0]}-{sizes[-1]}"
            row.iterations = f"{its[0]}-{its[-1]}"
            row.seconds = round(time.time() - t, 1)
        out.append(asdict(row))
        print(out[-1], flush=True)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(out[0]))
    w.writeheader()
    w.writerows(out)


if __name__ == "__main__":
    main()
