#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Plot chanest result CSVs: one NMSE chart per sweep parameter.

Usage: plot_results.py results.csv [more.csv ...] [-o out_prefix]
"""

import argparse
import collections
import csv
import math
import sys


def load(paths):
    rows = []
    for path in paths:
        with open(path, newline="") as handle:
            for row in csv.DictReader(handle):
                rows.append(
                    {
                        "sweep_param": row["sweep_param"],
                        "sweep_value": float(row["sweep_value"]),
                        "estimator": row["estimator"],
                        "nmse": float(row["nmse"]),
                        "doa_rmse_deg": float(row["doa_rmse_deg"]),
                    }
                )
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csvs", nargs="+")
    parser.add_argument("-o", "--out-prefix", default="")
    args = parser.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        sys.exit("matplotlib is required for plotting")

    rows = load(args.csvs)
    by_param = collections.defaultdict(list)
    for row in rows:
        by_param[row["sweep_param"]].append(row)

    for param, entries in by_param.items():
        fig, ax = plt.subplots(figsize=(7, 4.5))
        by_estimator = collections.defaultdict(list)
        for row in entries:
            by_estimator[row["estimator"]].append(
                (row["sweep_value"], row["nmse"])
            )
        for estimator, points in sorted(by_estimator.items()):
            points.sort()
            ax.semilogy(
                [p[0] for p in points],
                [p[1] for p in points],
                marker="o",
                label=estimator,
            )
        ax.set_xlabel(param)
        ax.set_ylabel("NMSE")
        ax.grid(True, which="both", alpha=0.4)
        ax.legend(fontsize=8)
        safe = param.replace("@", "_").replace("/", "_")
        out = f"{args.out_prefix}nmse_{safe}.png"
        fig.tight_layout()
        fig.savefig(out, dpi=140)
        print(f"wrote {out}")

        doa = {
            estimator: [
                (row["sweep_value"], row["doa_rmse_deg"])
                for row in entries
                if row["estimator"] == estimator
                and not math.isnan(row["doa_rmse_deg"])
            ]
            for estimator in by_estimator
        }
        doa = {k: v for k, v in doa.items() if v}
        if doa:
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for estimator, points in sorted(doa.items()):
                points.sort()
                ax.semilogy(
                    [p[0] for p in points],
                    [p[1] for p in points],
                    marker="s",
                    label=estimator,
                )
            ax.set_xlabel(param)
            ax.set_ylabel("DoA RMSE [deg]")
            ax.grid(True, which="both", alpha=0.4)
            ax.legend(fontsize=8)
            out = f"{args.out_prefix}doa_{safe}.png"
            fig.tight_layout()
            fig.savefig(out, dpi=140)
            print(f"wrote {out}")


if __name__ == "__main__":
    main()
