"""Figure rendering for the report paths.

Every figure is saved as a standalone SVG next to the delimited data it
visualizes, so plots are never load-bearing: the CSV/JSON artifacts carry
the numbers, the SVG carries the picture.  Output is made byte-deterministic
(fixed hash salt, no date metadata) so re-running a manifest reproduces the
files exactly.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "diffreg"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def rate_curve(path, ns, means, stderrs, slope, intercept, theory_exponent):
    """Log-log error-vs-n plot with the fitted line and the theoretical
    reference slope anchored at the first point."""
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.errorbar(ns, means, yerr=stderrs, fmt="o", capsize=3, label="measured")
    grid = np.geomspace(ns[0], ns[-1], 64)
    ax.plot(grid, np.exp(intercept) * grid**slope, "-", label=f"fit slope {slope:.3f}")
    ref = means[0] * (grid / ns[0]) ** theory_exponent
    ax.plot(grid, ref, "--", label=f"theory slope {theory_exponent:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("mean W1")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def histogram_overlay(path, model_pts, truth_pts, title=""):
    """1-D histogram of model vs ground-truth samples at one covariate."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    lo = min(np.min(model_pts), np.min(truth_pts))
    hi = max(np.max(model_pts), np.max(truth_pts))
    bins = np.linspace(lo, hi, 41)
    ax.hist(np.ravel(truth_pts), bins=bins, density=True, alpha=0.5, label="ground truth")
    ax.hist(np.ravel(model_pts), bins=bins, density=True, alpha=0.5, label="model")
    ax.set_xlabel("y")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def scatter_pair(path, model_pts, truth_pts, title=""):
    """First-two-coordinate scatter of model vs ground-truth samples."""
    model_pts = np.atleast_2d(model_pts)
    truth_pts = np.atleast_2d(truth_pts)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(truth_pts[:, 0], truth_pts[:, 1], ".", ms=3, alpha=0.5, label="ground truth")
    ax.plot(model_pts[:, 0], model_pts[:, 1], ".", ms=3, alpha=0.5, label="model")
    ax.set_aspect("equal")
    ax.set_xlabel("y[0]")
    ax.set_ylabel("y[1]")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def substep_curve(path, substeps, errors, floor=None):
    """Sampler discretization check: error vs substep count."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(substeps, errors, "o-", label="sampler vs truth")
    if floor is not None:
        ax.axhline(floor, ls="--", color="gray", label="two-sample floor")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("substeps per bin")
    ax.set_ylabel("W1")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def ablation_bars(path, labels, errors, floors=None):
    """Architecture comparison: one bar per arm."""
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = np.arange(len(labels))
    ax.bar(xs, errors, width=0.6)
    if floors is not None:
        ax.axhline(float(np.mean(floors)), ls="--", color="gray", label="noise floor")
        ax.legend()
    ax.set_xticks(xs)
    ax.set_xticklabels(labels)
    ax.set_ylabel("mean W1")
    fig.tight_layout()
    _save(fig, path)


def loss_traces(path, traces, n_bins):
    """Smoothed per-bin training loss curves on a log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(n_bins):
        steps = [r["step"] for r in traces if r["bin"] == i]
        losses = np.array([r["loss"] for r in traces if r["bin"] == i])
        if len(losses) == 0:
            continue
        w = max(1, len(losses) // 20)
        sm = np.convolve(losses, np.ones(w) / w, mode="valid")
        ax.plot(steps[: len(sm)], sm, lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("smoothed loss")
    fig.tight_layout()
    _save(fig, path)
