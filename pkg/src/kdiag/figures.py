"""Render evaluation results to figure files next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_curves_figure(rows: list[dict], path) -> None:
    """Per-step balanced accuracies and AUCs, seed means with per-seed traces."""
    seeds = sorted({r["seed"] for r in rows})
    steps = sorted({r["lines_acquired"] for r in rows})
    fig, (ax_bacc, ax_auc) = plt.subplots(1, 2, figsize=(10, 4))
    bacc_keys = ("disease_bacc", "severity_bacc", "sequential_bacc")
    auc_keys = ("disease_auc", "severity_auc")
    for ax, keys in ((ax_bacc, bacc_keys), (ax_auc, auc_keys)):
        for key in keys:
            per_seed = np.array(
                [
                    [r[key] for r in rows if r["seed"] == seed]
                    for seed in seeds
                ]
            )
            for row in per_seed:
                ax.plot(steps, row, color="gray", alpha=0.25, linewidth=0.7)
            ax.plot(steps, per_seed.mean(axis=0), marker="o", markersize=3, label=key)
        ax.set_xlabel("lines acquired")
        ax.set_ylim(0.0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    ax_bacc.set_ylabel("balanced accuracy")
    ax_auc.set_ylabel("AUC")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_heatmap_figure(matrix: np.ndarray, path) -> None:
    """Average sampling probability per (step, line)."""
    matrix = np.asarray(matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(matrix, aspect="auto", origin="upper", cmap="viridis")
    ax.set_xlabel("k-space line")
    ax.set_ylabel("acquisition step")
    fig.colorbar(im, ax=ax, label="sampling probability")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_correlation_figure(pairs: list[tuple[int, float]], path) -> None:
    """Per-step Pearson correlation between two sampling trajectories."""
    steps = [t for t, _ in pairs]
    values = [v for _, v in pairs]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(steps, values, marker="o")
    ax.set_xlabel("acquisition step")
    ax.set_ylabel("Pearson r")
    ax.set_ylim(-1.05, 1.05)
    ax.axhline(0.0, color="gray", linewidth=0.7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
