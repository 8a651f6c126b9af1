"""Matplotlib renderings of the delimited outputs (training curves, projections).

Figures are a convenience companion to the CSV/JSON files, which remain the
canonical artifacts; every renderer writes a PNG next to them.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_training_curves(report, path: str | Path) -> Path:
    """Loss curves and clustering statistics, one panel each."""
    plt = _pyplot()
    path = Path(path)
    epochs = [r.epoch for r in report.records]
    fig, (ax_loss, ax_counts) = plt.subplots(1, 2, figsize=(10, 4))

    ax_loss.plot(epochs, [r.intra_loss for r in report.records], label="intra", marker="o", ms=3)
    ax_loss.plot(epochs, [r.inter_loss for r in report.records], label="inter", marker="s", ms=3)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean batch loss")
    ax_loss.legend()
    ax_loss.set_title("losses")

    ax_counts.plot(epochs, [r.num_clusters for r in report.records], label="clusters")
    ax_counts.plot(epochs, [r.num_proxies for r in report.records], label="proxies")
    ax_counts.plot(epochs, [r.num_outliers for r in report.records], label="outliers")
    ax_counts.set_xlabel("epoch")
    ax_counts.set_ylabel("count")
    ax_counts.legend()
    ax_counts.set_title("clustering")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_projection(
    coords: np.ndarray,
    camera_ids: np.ndarray,
    true_ids: np.ndarray | None,
    path: str | Path,
) -> Path:
    """2-D scatter of projected features, colored by identity and by camera."""
    plt = _pyplot()
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.5), sharex=True, sharey=True)

    if true_ids is not None:
        axes[0].scatter(coords[:, 0], coords[:, 1], c=true_ids % 20, cmap="tab20", s=6)
        axes[0].set_title("colored by identity")
    else:
        axes[0].scatter(coords[:, 0], coords[:, 1], s=6)
        axes[0].set_title("projected features")
    axes[1].scatter(coords[:, 0], coords[:, 1], c=camera_ids, cmap="viridis", s=6)
    axes[1].set_title("colored by camera")
    for ax in axes:
        ax.set_xlabel("pc1")
    axes[0].set_ylabel("pc2")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
