#!/usr/bin/env python3
"""Plot the power balance of one or more runs.

Usage: tools/plot_power.py out/normal/power.csv [out/dos/power.csv ...]
                           [--phase2 600] [-o balance.png]
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_series(path):
    t, cols = [], {"load_kw": [], "pv_kw": [], "bss_kw": [], "grid_sum_kw": []}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            t.append(float(row["t_s"]))
            for k in cols:
                cols[k].append(float(row[k]))
    return t, cols


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+", help="power.csv files to plot")
    ap.add_argument("--phase2", type=float, help="mark the phase-2 start time")
    ap.add_argument("-o", "--out", default="power.png", help="output image")
    args = ap.parse_args()

    fig, axes = plt.subplots(len(args.csv), 1, sharex=True, squeeze=False,
                             figsize=(10, 3 * len(args.csv)))
    for ax, path in zip(axes[:, 0], args.csv):
        t, cols = read_series(path)
        for name, series in cols.items():
            ax.plot(t, series, label=name, linewidth=1)
        if args.phase2 is not None:
            ax.axvline(args.phase2, color="red", linestyle="--", linewidth=1)
        ax.set_title(Path(path).parent.name or path)
        ax.set_ylabel("kW")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="upper left", fontsize="small", ncol=4)
    axes[-1, 0].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
