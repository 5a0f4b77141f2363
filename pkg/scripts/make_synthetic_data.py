#!/usr/bin/env python3
"""Generate synthetic CSV datasets for the bundled model builders.

Writes four files into --outdir: a Gaussian penalized-spline dataset, binary
and count spline datasets sharing the same smooth mean function, and a
two-population grouped dataset with subject-level random lines.
"""

import argparse
import csv
import pathlib

import numpy as np

from semivmp.models import demo_mean_function


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="data", help="output directory")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n", type=int, default=500, help="sample size for the spline datasets")
    ap.add_argument("--groups", type=int, default=20, help="subject count for the grouped data")
    ap.add_argument("--per-group", type=int, default=25)
    args = ap.parse_args()

    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    # Gaussian spline data
    x = rng.uniform(size=args.n)
    f = demo_mean_function(x)
    y = f + rng.normal(scale=0.1, size=args.n)
    write_csv(out / "gaussian_spline.csv", ["x", "y"],
              [(f"{a:.10g}", f"{b:.10g}") for a, b in zip(x, y)])

    # binary + count responses on the same mean function
    yb = rng.binomial(1, f)
    yc = rng.poisson(10.0 * f)
    write_csv(out / "binary_spline.csv", ["x", "y"],
              [(f"{a:.10g}", int(b)) for a, b in zip(x, yb)])
    write_csv(out / "count_spline.csv", ["x", "y"],
              [(f"{a:.10g}", int(b)) for a, b in zip(x, yc)])

    # grouped data: reference curve + contrast for arm=1, random subject lines
    m, npg = args.groups, args.per_group
    gid = np.repeat(np.arange(m), npg)
    arm = np.repeat((np.arange(m) % 2).astype(float), npg)
    xg = rng.uniform(size=m * npg)
    intercepts = rng.normal(scale=0.4, size=m)
    slopes = rng.normal(scale=0.25, size=m)
    yg = (
        np.sin(2 * np.pi * xg)
        + arm * (0.8 * xg - 0.3)
        + intercepts[gid]
        + slopes[gid] * xg
        + rng.normal(scale=0.2, size=m * npg)
    )
    write_csv(
        out / "grouped_curves.csv",
        ["y", "x", "subject", "arm"],
        [
            (f"{a:.10g}", f"{b:.10g}", f"s{int(g):02d}", int(l))
            for a, b, g, l in zip(yg, xg, gid, arm)
        ],
    )


if __name__ == "__main__":
    main()
