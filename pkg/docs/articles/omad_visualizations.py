#!/usr/bin/env python3
"""
OMAD run visualizations
Plots learning curves from metrics.csv and the visited-cell map from coverage.csv
"""

import argparse
import csv
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from omad.harness.metrics import read_metrics  # noqa: E402


def _column(rows, name):
    return np.array([float(r[name]) if r[name] != "" else np.nan for r in rows])


def load_run(run_dir):
    """Read metrics rows, visited cells and the run summary of one output directory"""
    rows = read_metrics(os.path.join(run_dir, "metrics.csv"))
    cells = []
    coverage_path = os.path.join(run_dir, "coverage.csv")
    if os.path.exists(coverage_path):
        with open(coverage_path, newline="") as f:
            cells = [(int(r["row"]), int(r["col"])) for r in csv.DictReader(f)]
    summary = {}
    summary_path = os.path.join(run_dir, "run_summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as f:
            summary = json.load(f)
    return rows, cells, summary


def create_learning_curves(run_dirs, out_path):
    """Evaluation return, joint ELBO and temperature against environment steps"""
    fig, axes = plt.subplots(1, 3, figsize=(16, 4.5))

    for run_dir in run_dirs:
        rows, _, summary = load_run(run_dir)
        if not rows:
            continue
        label = f"seed {summary.get('seed', os.path.basename(os.path.normpath(run_dir)))}"
        steps = _column(rows, "env_steps")
        mean = _column(rows, "eval_return_mean")
        std = _column(rows, "eval_return_std")
        line, = axes[0].plot(steps, mean, label=label, lw=2)
        axes[0].fill_between(steps, mean - std, mean + std, color=line.get_color(), alpha=0.2)
        if "oracle_return" in summary:
            axes[0].axhline(summary["oracle_return"], color=line.get_color(), ls="--", lw=1)
        axes[1].plot(steps, _column(rows, "joint_elbo_mean"), color=line.get_color(), lw=2)
        axes[2].semilogy(steps, _column(rows, "alpha"), color=line.get_color(), lw=2)

    axes[0].set_title("Evaluation return (dashed: scripted oracle)", fontweight="bold")
    axes[1].set_title("Joint entropy bound", fontweight="bold")
    axes[2].set_title("Temperature α", fontweight="bold")
    for ax in axes:
        ax.set_xlabel("Environment steps")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="lower right")

    plt.tight_layout()
    plt.savefig(out_path, dpi=300, bbox_inches="tight")
    plt.close(fig)


def create_coverage_map(run_dir, out_path):
    """Visited cells of the coverage grid, one square per cell"""
    _, cells, summary = load_run(run_dir)
    fig, ax = plt.subplots(1, 1, figsize=(6, 6))

    if cells:
        shape = (max(r for r, _ in cells) + 1, max(c for _, c in cells) + 1)
        grid = np.zeros(shape)
        for r, c in cells:
            grid[r, c] = 1.0
        ax.imshow(grid.T, origin="lower", cmap="Greens", vmin=0.0, vmax=1.0)
    fraction = summary.get("coverage_fraction")
    title = "State coverage"
    if fraction is not None:
        title += f": {fraction:.1%} of {summary.get('coverage_total', '?')} cells"
    ax.set_title(title, fontweight="bold")
    ax.set_xlabel("cell along first coverage dimension")
    ax.set_ylabel("cell along second coverage dimension")

    plt.tight_layout()
    plt.savefig(out_path, dpi=300, bbox_inches="tight")
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description="Plot OMAD run artifacts")
    parser.add_argument("runs", nargs="+", help="run output directories")
    parser.add_argument("--out", default=".", help="directory for the PNG files")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    print("Creating OMAD visualizations...")

    curves = os.path.join(args.out, "learning_curves.png")
    create_learning_curves(args.runs, curves)
    generated = [curves]
    for run_dir in args.runs:
        name = os.path.basename(os.path.normpath(run_dir))
        path = os.path.join(args.out, f"coverage_{name}.png")
        create_coverage_map(run_dir, path)
        generated.append(path)

    print("Generated files:")
    for path in generated:
        print(f"- {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
