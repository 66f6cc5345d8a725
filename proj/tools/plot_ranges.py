#!/usr/bin/env python3
"""Plot activation ranges from ranges.csv (depth,lo,hi,source)."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="ranges.csv written by `quantdistill eval`")
    ap.add_argument("-o", "--output", default="ranges.png")
    args = ap.parse_args()

    series = defaultdict(list)
    with open(args.csv, newline="") as f:
        for row in csv.DictReader(f):
            series[row["source"]].append((int(row["depth"]), float(row["lo"]), float(row["hi"])))

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(len(series), 1)
    for i, (source, rows) in enumerate(sorted(series.items())):
        depths = [d + i * width for d, _, _ in rows]
        ax.bar(depths, [hi - lo for _, lo, hi in rows], bottom=[lo for _, lo, _ in rows], width=width, label=source)
    ax.set_xlabel("activation depth")
    ax.set_ylabel("observed range")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
