"""Figure rendering for the report paths: every CLI command that writes a
delimited report can also drop a PNG next to it. Rendering is headless
(Agg) and deterministic; the figures are conveniences for eyeballing runs,
the CSV/JSON outputs remain the primary artifacts.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evalpipe import (SIGNALS, WORD_CLASSES, CorrelationReport, CoverageCurve,
                       RegressionReport, SweepResult)

_BAR_COLORS = ("#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c")


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_correlation_report(report: CorrelationReport, path: str | Path,
                            metric: str = "chunkability") -> Path:
    """Grouped bars of r per tokenizer, one panel per (signal, word class)."""
    tokenizers = []
    for row in report.rows:
        if row.tokenizer_id not in tokenizers:
            tokenizers.append(row.tokenizer_id)
    fig, axes = plt.subplots(len(SIGNALS), len(WORD_CLASSES),
                             figsize=(9, 6), sharey=True, squeeze=False)
    for i, signal in enumerate(SIGNALS):
        for j, word_class in enumerate(WORD_CLASSES):
            ax = axes[i][j]
            values, labels = [], []
            for tid in tokenizers:
                try:
                    row = report.find(tid, metric, signal, word_class)
                except KeyError:
                    continue
                values.append(row.r if row.r is not None else 0.0)
                labels.append(tid)
            ax.bar(range(len(values)), values,
                   color=[_BAR_COLORS[k % len(_BAR_COLORS)] for k in range(len(values))])
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
            ax.axhline(0.0, color="black", linewidth=0.8)
            ax.set_title(f"{word_class} / {signal}", fontsize=10)
            if j == 0:
                ax.set_ylabel(f"r ({metric})")
    fig.suptitle(f"{report.dataset}: {report.correlation} correlation", fontsize=11)
    return _finish(fig, path)


def plot_sweep(result: SweepResult, path: str | Path,
               metric: str = "chunkability") -> Path:
    """Correlation against vocabulary size, one line per (signal, word class)."""
    fig, ax = plt.subplots(figsize=(7, 5))
    sizes = result.sizes()
    color_idx = 0
    for signal in SIGNALS:
        for word_class in WORD_CLASSES:
            ys = []
            for size, report in result.points:
                tid = report.rows[0].tokenizer_id if report.rows else None
                try:
                    row = report.find(tid, metric, signal, word_class)
                    ys.append(row.r)
                except KeyError:
                    ys.append(None)
            pts = [(s, y) for s, y in zip(sizes, ys) if y is not None]
            if not pts:
                continue
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    color=_BAR_COLORS[color_idx % len(_BAR_COLORS)],
                    label=f"{word_class}/{signal}")
            color_idx += 1
    ax.set_xscale("log")
    ax.set_xlabel("vocabulary size")
    ax.set_ylabel(f"r ({metric})")
    ax.set_title(f"{result.algorithm}: correlation vs vocabulary size")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_coverage(curves: Sequence[CoverageCurve], path: str | Path) -> Path:
    """Morpheme coverage against vocabulary size, one line per curve."""
    fig, ax = plt.subplots(figsize=(7, 5))
    markers = {"WPC": "^", "UNI": "*", "BPE": "o"}
    for idx, curve in enumerate(curves):
        xs = [s for s, _ in curve.points]
        ys = [f for _, f in curve.points]
        ax.plot(xs, ys, marker=markers.get(curve.algorithm, "s"),
                color=_BAR_COLORS[idx % len(_BAR_COLORS)],
                label=f"{curve.language}/{curve.algorithm}")
    ax.set_xscale("log")
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel("vocabulary size")
    ax.set_ylabel("covered fraction")
    ax.set_title("derivational morpheme coverage")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_regression(report: RegressionReport, path: str | Path) -> Path:
    """MSE and explained variance per (signal, feature)."""
    keys = sorted(report.results)
    labels = [f"{sig}\n{feat}" for sig, feat in keys]
    mses = [report.results[k].mse for k in keys]
    evs = [report.results[k].explained_variance for k in keys]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar(range(len(keys)), mses, color=_BAR_COLORS[0])
    ax1.set_xticks(range(len(keys)))
    ax1.set_xticklabels(labels, fontsize=8)
    ax1.set_title("test MSE")
    ax2.bar(range(len(keys)), evs, color=_BAR_COLORS[1])
    ax2.set_xticks(range(len(keys)))
    ax2.set_xticklabels(labels, fontsize=8)
    ax2.axhline(0.0, color="black", linewidth=0.8)
    ax2.set_title("explained variance")
    fig.suptitle(f"{report.dataset}: {report.tokenizer_id} (seed {report.seed})")
    return _finish(fig, path)
