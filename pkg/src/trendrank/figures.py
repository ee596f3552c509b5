"""Matplotlib figure rendering for the report-producing pipeline stages."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import MetricsReport
from .scoring import Prediction


def plot_loss_trace(trace: list[float], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(range(1, len(trace) + 1), trace, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean InfoNCE loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_metric_bars(report: MetricsReport, path: str | Path) -> None:
    ks = sorted(report.hr)
    metrics = [("HR", report.hr), ("NDCG", report.ndcg), ("Jaccard", report.jaccard)]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(1, len(ks))
    for j, k in enumerate(ks):
        xs = [i + j * width for i in range(len(metrics))]
        ax.bar(xs, [values[k] for _, values in metrics], width=width, label=f"@{k}")
    ax.set_xticks([i + width * (len(ks) - 1) / 2 for i in range(len(metrics))])
    ax.set_xticklabels([name for name, _ in metrics])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("value")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_top_items(ranked: list[Prediction], path: str | Path, top: int = 10) -> None:
    rows = ranked[:top]
    fig, ax = plt.subplots(figsize=(5, 0.5 + 0.3 * max(1, len(rows))))
    ys = range(len(rows))
    ax.barh(list(ys), [p.predicted_score for p in rows])
    ax.set_yticks(list(ys))
    ax.set_yticklabels([p.item_id for p in rows], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("predicted popularity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
