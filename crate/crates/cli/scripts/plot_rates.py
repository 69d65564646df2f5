"""Plot CSV output of posterior-lab. Needs matplotlib.

usage: plot_rates.py OUTPUT_DIR
"""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows if r[k] != ""] for k in rows[0]}


def main(out):
    out = Path(out)
    if (out / "rates.csv").exists():
        d = read(out / "rates.csv")
        fig, ax = plt.subplots()
        for key in ("spc", "bias_sq", "variance", "trace_term"):
            ax.loglog(d["n"], d[key], marker="o", label=key)
        ax.set_xlabel("n")
        ax.legend()
        fig.savefig(out / "rates.png", dpi=150)
    if (out / "exponent_curve.csv").exists():
        d = read(out / "exponent_curve.csv")
        fig, ax = plt.subplots()
        ax.plot(d["gamma"], d["exponent"], color="green")
        ax.set_xlabel("gamma")
        ax.set_ylabel("contraction exponent")
        fig.savefig(out / "exponent_curve.png", dpi=150)
    if (out / "bounds.csv").exists():
        with open(out / "bounds.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        fig, ax = plt.subplots()
        for theta in sorted({r["theta"] for r in rows}, key=float):
            sel = [r for r in rows if r["theta"] == theta]
            lam = [float(r["lambda"]) for r in sel]
            ax.loglog(lam, [float(r["measured_norm"]) for r in sel], marker="o", label=f"theta={float(theta):g}")
            ax.loglog(lam, [float(r["reference"]) for r in sel], linestyle="--", color="gray")
        ax.set_xlabel("lambda")
        ax.legend()
        fig.savefig(out / "bounds.png", dpi=150)


if __name__ == "__main__":
    main(sys.argv[1])
