"""Plot columns of a trajectory CSV written by ``thinfilm run``.

    python3 scripts/plot_trajectory.py out/theorem1_1/trajectory.csv \
        --columns J deviation_Hs --logy --out decay.png

Needs matplotlib (not a package dependency).
"""
import argparse
import csv

import numpy as np


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("csv")
    ap.add_argument("--columns", nargs="+", default=["J", "deviation_Hs"])
    ap.add_argument("--logx", action="store_true")
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("--out", default=None, help="image file; shows a window when omitted")
    args = ap.parse_args(argv)

    import matplotlib
    if args.out:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.csv) as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows])
    fig, ax = plt.subplots(figsize=(7, 4))
    for col in args.columns:
        y = np.array([float(r[col]) for r in rows])
        ax.plot(t, np.abs(y) if args.logy else y, label=col)
    if args.logx:
        ax.set_xscale("symlog", linthresh=1.0)
    if args.logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    if args.out:
        fig.savefig(args.out, dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main()
