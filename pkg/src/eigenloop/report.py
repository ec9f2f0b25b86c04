"""Figure rendering for the CLI report paths.

Every figure is written next to the CSV it visualizes; the CSV stays the
source of truth and figures are purely additive.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .contrastive import EpochStats
from .transfer import HistoryRow


def save_pretrain_figure(history: Sequence[EpochStats], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    epochs = [h.epoch for h in history]
    ax.plot(epochs, [h.loss for h in history], label="loss", lw=1.8)
    ax.plot(epochs, [h.alignment for h in history], label="alignment", lw=1.2)
    ax.plot(epochs, [h.uniformity for h in history], label="uniformity", lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("value")
    ax.set_title("contrastive pretraining")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_run_figure(
    progressive: Mapping[int, Sequence[HistoryRow]],
    baseline: Mapping[int, HistoryRow],
    path: str | Path,
) -> None:
    """Per-step metrics of the loop (per seed + mean) vs the random baseline."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    for metric, ax in zip(("top1", "bcubed"), axes):
        steps = None
        series = []
        for seed, rows in sorted(progressive.items()):
            xs = [r.kappa for r in rows]
            ys = [getattr(r, metric) for r in rows]
            ax.plot(xs, ys, color="tab:blue", alpha=0.25, lw=1)
            series.append(ys)
            steps = xs
        if steps and series:
            mean = [sum(col) / len(col) for col in zip(*series)]
            ax.plot(steps, mean, color="tab:blue", lw=2.2, label="eigen-sample selection")
        if baseline:
            base_mean = sum(getattr(r, metric) for r in baseline.values()) / len(baseline)
            ax.axhline(base_mean, color="tab:red", ls="--", lw=1.6, label="random selection")
        ax.set_xlabel("evolution step")
        ax.set_ylabel(metric)
        ax.legend()
    fig.suptitle("progressive few-label transfer")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_figure(rows: Sequence[dict], parameter: str, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    labels = [str(r["value"]) for r in rows]
    xs = range(len(rows))
    for metric, marker in (("top1", "o"), ("mean_per_class", "s"), ("bcubed", "^")):
        ax.plot(xs, [r[metric] for r in rows], marker=marker, label=metric)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_xlabel(parameter)
    ax.set_ylabel("metric")
    ax.set_title(f"sweep over {parameter}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
