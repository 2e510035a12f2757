#!/usr/bin/env python3
"""Convert a LASA handwriting .mat file into the demonstration CSV format.

Each entry of the `demos` cell array contributes its `t` row and `pos`
(2 x N) matrix; demonstrations are separated by a blank line. Times are
written as recorded; `train` rescales every demonstration onto [0, 60].

    python3 tools/lasa_to_csv.py Angle.mat angle.csv --demos 3 --stride 5
"""

import argparse
import sys

import numpy as np
from scipy.io import loadmat


def load_demos(path):
    mat = loadmat(path, squeeze_me=True, struct_as_record=False)
    if "demos" not in mat:
        sys.exit(f"{path}: no 'demos' variable")
    demos = np.atleast_1d(mat["demos"])
    out = []
    for d in demos:
        pos = np.atleast_2d(np.asarray(d.pos, dtype=float))
        t = np.asarray(d.t, dtype=float).ravel()
        if pos.shape[0] != 2 and pos.shape[1] == 2:
            pos = pos.T
        if pos.shape != (2, t.size):
            sys.exit(f"{path}: pos has shape {pos.shape}, expected (2, {t.size})")
        out.append((t, pos))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mat")
    ap.add_argument("csv")
    ap.add_argument("--demos", type=int, default=0, help="keep the first N demonstrations (0 = all)")
    ap.add_argument("--stride", type=int, default=1, help="keep every k-th sample")
    args = ap.parse_args()
    if args.stride < 1:
        sys.exit("--stride must be positive")

    demos = load_demos(args.mat)
    if args.demos > 0:
        demos = demos[: args.demos]
    with open(args.csv, "w", newline="\n") as f:
        f.write("t,x0,x1\n")
        for i, (t, pos) in enumerate(demos):
            if i:
                f.write("\n")
            for n in range(0, t.size, args.stride):
                f.write(f"{float(t[n])!r},{float(pos[0, n])!r},{float(pos[1, n])!r}\n")


if __name__ == "__main__":
    main()
