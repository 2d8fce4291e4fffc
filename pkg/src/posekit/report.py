"""Evaluation report rendering: delimited tables and matplotlib figures."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricReport


def write_keypoint_csv(report: MetricReport, path: str | Path) -> Path:
    """Per-keypoint-group breakdown as CSV: one row per group, one column
    per metric, plus the evaluated counts."""
    path = Path(path)
    metrics = list(next(iter(report.per_keypoint.values())).keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["keypoint"] + metrics + [f"{m}_evaluated" for m in metrics])
        for group, cells in report.per_keypoint.items():
            writer.writerow(
                [group]
                + [f"{cells[m].value:.6f}" for m in metrics]
                + [cells[m].evaluated for m in metrics]
            )
    return path


def write_limb_csv(report: MetricReport, path: str | Path) -> Path:
    """Per-limb PCPm breakdown as CSV."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["limb", "pcpm", "correct", "evaluated", "skipped"])
        for name, cell in report.per_limb.items():
            writer.writerow(
                [name, f"{cell.value:.6f}", cell.correct, cell.evaluated, cell.skipped]
            )
    return path


def render_figures(report: MetricReport, out_dir: str | Path) -> list[Path]:
    """Render the breakdown bar chart, OKS histogram and limb chart as PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _keypoint_bars(report, out_dir / "keypoint_breakdown.png"),
        _oks_histogram(report, out_dir / "oks_distribution.png"),
        _limb_bars(report, out_dir / "limb_pcpm.png"),
    ]
    return paths


def _keypoint_bars(report: MetricReport, path: Path) -> Path:
    groups = list(report.per_keypoint.keys())
    metrics = list(next(iter(report.per_keypoint.values())).keys())
    x = np.arange(len(groups))
    width = 0.8 / len(metrics)
    fig, ax = plt.subplots(figsize=(10, 4.5))
    for i, metric in enumerate(metrics):
        values = [report.per_keypoint[g][metric].value for g in groups]
        ax.bar(x + (i - (len(metrics) - 1) / 2) * width, values, width, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Per-keypoint breakdown")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _oks_histogram(report: MetricReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(report.per_instance_oks, bins=40, range=(0, 1), color="#4878cf")
    for t in report.config.get("oks_thresholds", [0.5, 0.75]):
        ax.axvline(t, color="crimson", linestyle="--", linewidth=1, label=f"t = {t}")
    ax.set_xlabel("per-instance OKS")
    ax.set_ylabel("instances")
    ax.set_title("OKS distribution")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _limb_bars(report: MetricReport, path: Path) -> Path:
    names = list(report.per_limb.keys())
    values = [report.per_limb[n].value for n in names]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(np.arange(len(names)), values, color="#6acc65")
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("PCPm")
    ax.set_title("Per-limb PCPm")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
