"""Figure rendering for the report path: ROC, CMC, and schedule curves."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_roc_figure", "save_cmc_figure", "save_schedule_figure"]


def save_roc_figure(points, auc: float, path) -> None:
    fars = [p[0] for p in points]
    tars = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(fars, tars, drawstyle="steps-post", color="tab:blue")
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="0.6")
    ax.set_xlabel("false accept rate")
    ax.set_ylabel("true accept rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"ROC (AUC = {auc:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_cmc_figure(cmc, path) -> None:
    ranks = range(1, len(cmc) + 1)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(ranks, cmc, marker="o", ms=3, color="tab:green")
    ax.set_xlabel("rank")
    ax.set_ylabel("matching rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("CMC")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_schedule_figure(iters, lrs, frozen, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, lrs, color="tab:red")
    ax.set_xlabel("iteration")
    ax.set_ylabel("learning rate")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    thaw = next((it for it, f in zip(iters, frozen) if not f), None)
    if thaw is not None and thaw > 0:
        ax.axvline(thaw, ls="--", lw=0.8, color="0.5")
        ax.text(thaw, min(lrs), " backbone unfrozen", fontsize=8, color="0.4")
    ax.set_title("learning rate schedule")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
