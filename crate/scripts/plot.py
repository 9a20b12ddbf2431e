"""Plot `eprop demo` traces or `eprop train` metrics.

usage: python scripts/plot.py demo.csv [out.png]
       python scripts/plot.py runs/synthetic/metrics.csv [out.png]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_demo(df, out):
    cols = ["I", "v_pre", "v_post", "eps_v", "e", "acc_dW"]
    fig, axes = plt.subplots(len(cols), 1, sharex=True, figsize=(8, 10))
    for ax, c in zip(axes, cols):
        ax.plot(df["t"], df[c], lw=1)
        ax.set_ylabel(c)
    for t in df.loc[df["z_pre"] == 1, "t"]:
        axes[1].axvline(t, color="tab:red", lw=0.6)
    for t in df.loc[df["z_post"] == 1, "t"]:
        axes[2].axvline(t, color="tab:red", lw=0.6)
    axes[-1].set_xlabel("step")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def plot_metrics(df, out):
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
    for split, g in df.groupby("split"):
        axes[0].plot(g["iter"], g["miscls_pct"], "o-", label=split)
        axes[1].plot(g["iter"], g["xent"], "o-", label=split)
        axes[2].plot(g["iter"], g["mean_rate_hz"], "o-", label=split)
    for ax, name in zip(axes, ["misclassified %", "cross-entropy", "rate (Hz)"]):
        ax.set_ylabel(name)
    axes[0].legend()
    axes[-1].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"
    df = pd.read_csv(path)
    if "acc_dW" in df.columns:
        plot_demo(df, out)
    else:
        plot_metrics(df, out)
    print(out)


if __name__ == "__main__":
    main()
