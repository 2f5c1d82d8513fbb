#!/usr/bin/env python3
"""Render the CLI's CSV/JSON outputs as figures.

Documentation asset only: the artifact itself stays headless. Each
subcommand consumes files produced by `l2e fit|simulate|benchmark|path`
and writes a PNG.

  residuals  fitted/residual/weight CSV  -> residual-vs-fitted scatter
  weights    fit JSON                    -> robustness weights by observation
  shape      data CSV + fit JSON         -> data, fitted curve, optional truth
  benchmark  benchmark CSV               -> MSE boxplots by outlier level
  path       path CSV                    -> coefficient profiles vs shrinkage
"""

import argparse
import csv
import json
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv_columns(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        sys.exit(f"{path}: no data rows")
    return {k: [r[k] for r in rows] for k in rows[0]}


def floats(xs):
    return np.asarray([float(x) for x in xs])


def save(fig, out):
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


def plot_residuals(args):
    cols = read_csv_columns(args.input)
    fitted, resid, weight = (floats(cols[k]) for k in ("fitted", "residual", "weight"))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    sc = ax.scatter(fitted, resid, c=weight, cmap="viridis", s=18,
                    vmin=0.0, vmax=1.0, edgecolors="none")
    ax.axhline(0.0, color="grey", lw=0.8)
    fig.colorbar(sc, ax=ax, label="robustness weight")
    ax.set_xlabel("fitted value")
    ax.set_ylabel("residual")
    ax.set_title("residuals vs fitted, shaded by weight")
    save(fig, args.output)


def plot_weights(args):
    with open(args.input) as f:
        fit = json.load(f)
    w = np.asarray(fit["weights"])
    flags = np.asarray(fit["outlier_flags"], dtype=bool)
    idx = np.arange(w.size)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.scatter(idx[~flags], w[~flags], s=14, color="tab:blue", label="kept")
    if flags.any():
        ax.scatter(idx[flags], w[flags], s=18, color="tab:red", label="flagged")
    ax.set_xlabel("observation")
    ax.set_ylabel("weight")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"robustness weights (tau = {fit['tau']:.3g})")
    ax.legend(loc="best")
    save(fig, args.output)


def plot_shape(args):
    data = read_csv_columns(args.data)
    t, y = floats(data["t"]), floats(data["y"])
    with open(args.fit) as f:
        fit = json.load(f)
    sites = np.asarray(fit["sites"] if fit["sites"] else t)
    fitted = np.asarray(fit["fitted_values"])
    flags = np.asarray(fit["outlier_flags"], dtype=bool)

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.scatter(t[~flags], y[~flags], s=12, color="grey", alpha=0.6, label="data")
    if flags.any():
        ax.scatter(t[flags], y[flags], s=16, color="tab:red", label="flagged")
    ax.plot(sites, fitted, color="tab:blue", lw=2, label="robust fit")
    if args.truth:
        with open(args.truth) as f:
            truth = json.load(f)
        ax.plot(np.asarray(truth["sites"]), np.asarray(truth["f_values"]),
                color="black", lw=1, ls="--", label="truth")
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.set_title(f"shape-constrained fit ({fit['constraint']})")
    ax.legend(loc="best")
    save(fig, args.output)


def plot_benchmark(args):
    cols = read_csv_columns(args.input)
    levels = sorted({int(v) for v in cols["outlier_level"]})
    tags = sorted(set(cols["estimator"]))
    mse = floats(cols["mse"])
    lvl = np.asarray([int(v) for v in cols["outlier_level"]])
    tag = np.asarray(cols["estimator"])

    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / len(tags)
    colors = plt.get_cmap("tab10").colors
    for k, t in enumerate(tags):
        groups = [mse[(tag == t) & (lvl == lv)] for lv in levels]
        pos = [i + (k - (len(tags) - 1) / 2) * width for i in range(len(levels))]
        bp = ax.boxplot(groups, positions=pos, widths=width * 0.9,
                        patch_artist=True, medianprops=dict(color="black"))
        for box in bp["boxes"]:
            box.set_facecolor(colors[k % len(colors)])
            box.set_alpha(0.6)
        ax.plot([], [], color=colors[k % len(colors)], lw=6, alpha=0.6, label=t)
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels(levels)
    ax.set_xlabel("number of outliers")
    ax.set_ylabel("MSE against the true function")
    ax.set_yscale("log")
    ax.set_title("estimator MSE by contamination level")
    ax.legend(loc="best")
    save(fig, args.output)


def plot_path(args):
    cols = read_csv_columns(args.input)
    tags = sorted(set(cols["estimator"]))
    s = floats(cols["s"])
    coef_idx = np.asarray([int(v) for v in cols["coefficient_index"]])
    value = floats(cols["value"])
    tag = np.asarray(cols["estimator"])

    fig, axes = plt.subplots(1, len(tags), figsize=(5.5 * len(tags), 4.5),
                             sharey=True, squeeze=False)
    for ax, t in zip(axes[0], tags):
        sel = tag == t
        for j in sorted(set(coef_idx[sel])):
            pick = sel & (coef_idx == j)
            order = np.argsort(s[pick])
            ax.plot(s[pick][order], value[pick][order], lw=1.5)
        ax.set_xlabel("shrinkage factor s")
        ax.set_title(t)
        ax.axhline(0.0, color="grey", lw=0.6)
    axes[0][0].set_ylabel("coefficient")
    fig.suptitle("solution paths")
    save(fig, args.output)


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("residuals", help="residual-vs-fitted scatter")
    p.add_argument("input", help="fitted/residual/weight CSV from `fit --residuals`")
    p.add_argument("-o", "--output", default="residuals.png")
    p.set_defaults(run=plot_residuals)

    p = sub.add_parser("weights", help="robustness weights by observation")
    p.add_argument("input", help="fit JSON")
    p.add_argument("-o", "--output", default="weights.png")
    p.set_defaults(run=plot_weights)

    p = sub.add_parser("shape", help="shape-constrained fit overlay")
    p.add_argument("data", help="(t, y) data CSV")
    p.add_argument("fit", help="fit JSON")
    p.add_argument("--truth", help="truth JSON from `simulate` (optional)")
    p.add_argument("-o", "--output", default="shape_fit.png")
    p.set_defaults(run=plot_shape)

    p = sub.add_parser("benchmark", help="MSE boxplots by outlier level")
    p.add_argument("input", help="benchmark CSV")
    p.add_argument("-o", "--output", default="benchmark.png")
    p.set_defaults(run=plot_benchmark)

    p = sub.add_parser("path", help="coefficient profiles vs shrinkage factor")
    p.add_argument("input", help="path CSV")
    p.add_argument("-o", "--output", default="path.png")
    p.set_defaults(run=plot_path)

    args = parser.parse_args()
    args.run(args)


if __name__ == "__main__":
    main()
