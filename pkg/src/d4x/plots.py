"""Figure rendering for the report command.

Reads the delimited files written by `evaluate` / `train-explainer` and
renders matplotlib figures next to them.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: str) -> dict:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = {k: [] for k in rows[0]} if rows else {}
    for row in rows:
        for k, v in row.items():
            cols[k].append(float(v))
    return cols


def plot_cf_curve(curve_csv: str, out_png: str) -> None:
    cols = _read_csv(curve_csv)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(cols["mr"], cols["cf_acc"], "o-", label="explainer CF-ACC")
    if "baseline_cf_acc" in cols and not all(v != v for v in cols["baseline_cf_acc"]):
        ax.plot(cols["mr"], cols["baseline_cf_acc"], "s--", color="gray",
                label="random baseline")
    ax.plot(cols["mr"], cols["fidelity"], "^-", label="fidelity")
    ax.set_xlabel("modification ratio")
    ax.set_ylabel("score")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_mmd(mmd_csv: str, out_png: str) -> None:
    cols = _read_csv_text(mmd_csv)
    names = cols["metric"]
    vals = [float(v) for v in cols["mmd"]]
    base = [float(v) for v in cols["baseline_mmd"]]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([i - 0.2 for i in x], vals, width=0.4, label="explainer")
    if not all(b != b for b in base):
        ax.bar([i + 0.2 for i in x], base, width=0.4, color="gray",
               label="random baseline")
    ax.set_xticks(list(x), names)
    ax.set_ylabel("MMD")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_robustness(rob_csv: str, out_png: str) -> None:
    cols = _read_csv(rob_csv)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(cols["sigma"], cols["topk_acc"], "o-")
    ax.set_xlabel("perturbation probability")
    ax.set_ylabel("top-K accuracy")
    ax.set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_loss_trace(trace_csv: str, out_png: str) -> None:
    cols = _read_csv(trace_csv)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(cols["epoch"], cols["l_dist"], label="reconstruction")
    if any(cols["l_cf"]):
        ax.plot(cols["epoch"], cols["l_cf"], label="counterfactual")
    ax.plot(cols["epoch"], cols["total"], label="total")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def _read_csv_text(path: str) -> dict:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = {k: [] for k in rows[0]} if rows else {}
    for row in rows:
        for k, v in row.items():
            cols[k].append(v)
    return cols


def render_all(prefix: str) -> list:
    """Render every figure whose source CSV exists; returns the PNG paths."""
    made = []
    jobs = [(f"{prefix}_curve.csv", f"{prefix}_curve.png", plot_cf_curve),
            (f"{prefix}_mmd.csv", f"{prefix}_mmd.png", plot_mmd),
            (f"{prefix}_robustness.csv", f"{prefix}_robustness.png", plot_robustness),
            (f"{prefix}_trace.csv", f"{prefix}_trace.png", plot_loss_trace)]
    for src, dst, fn in jobs:
        if os.path.exists(src):
            fn(src, dst)
            made.append(dst)
    return made
