"""Write Sobol direction numbers in Joe-Kuo text format from the table bundled with scipy.

Usage: python scripts/export_sobol_directions.py [max_dim] [out_path]
"""
import os
import sys

import numpy as np
import scipy


def main(max_dim=1000, out=None):
    src = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
    table = np.load(src)
    poly, vinit = table["poly"], table["vinit"]
    out = out or os.path.join(os.path.dirname(__file__), "..", "src", "quadgen", "data", "sobol_joe_kuo.txt")
    with open(out, "w") as fh:
        fh.write("d       s       a       m_i\n")
        for j in range(1, max_dim):
            p = int(poly[j])
            s = p.bit_length() - 1
            a = (p >> 1) & ((1 << (s - 1)) - 1) if s > 1 else 0
            m = " ".join(str(int(v)) for v in vinit[j, :s])
            fh.write(f"{j + 1}       {s}       {a}       {m} \n")
    print(f"wrote {max_dim - 1} rows to {out}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(int(args[0]) if args else 1000, args[1] if len(args) > 1 else None)
