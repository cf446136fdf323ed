"""Matplotlib rendering of evaluation reports to image files.

Kept separate from the evaluation statistics so the harness stays free of
plotting state; the CLI report path calls into here after writing the
JSON/CSV artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport

__all__ = ["render_reward_curves", "render_welfare_bars"]


def render_reward_curves(report: EvalReport, path, title: str = "Mean period reward") -> None:
    """One line per policy with a +-1 std band across runs."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    periods = np.arange(1, report.horizon + 1)
    for name in sorted(report.curves):
        curve = report.curves[name]
        ax.plot(periods, curve.period_means, label=name, linewidth=1.6)
        ax.fill_between(
            periods,
            curve.period_means - curve.period_stds,
            curve.period_means + curve.period_stds,
            alpha=0.15,
        )
    ax.set_xlabel("period")
    ax.set_ylabel("mean adoption rate")
    ax.set_title(f"{title} ({report.n_runs} runs)")
    ax.set_xlim(1, report.horizon)
    ax.set_ylim(bottom=0.0)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150, format="png")
    plt.close(fig)


def render_welfare_bars(report: EvalReport, path, title: str = "Cumulative welfare") -> None:
    """Per-policy cumulative welfare with std error bars."""
    names = sorted(report.curves)
    means = [report.curves[n].welfare_mean for n in names]
    stds = [report.curves[n].welfare_std for n in names]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    xs = np.arange(len(names))
    ax.bar(xs, means, yerr=stds, capsize=3, color="#4878a8")
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("welfare over horizon")
    ax.set_title(f"{title} (H={report.horizon}, {report.n_runs} runs)")
    fig.tight_layout()
    fig.savefig(path, dpi=150, format="png")
    plt.close(fig)
