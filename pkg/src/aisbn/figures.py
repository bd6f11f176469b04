"""Figures rendered next to the benchmark CSV output.

The CSV files remain the canonical record; these plots are a quick
visual check of the same numbers.  Rendering uses the Agg backend and
never opens a window.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import FAILED_RUN_MSE, ExperimentReport

_MARKERS = ("o", "s", "^", "D", "v", "P", "X", "*")


def _case_means(report: ExperimentReport) -> dict[str, dict[str, float]]:
    """algorithm -> case id -> mean MSE over repetitions, failed
    repetitions charged the metric maximum."""
    grouped: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for row in report.rows:
        if row.pr_evidence_exact is None:
            continue
        value = row.mse if row.mse is not None else FAILED_RUN_MSE
        grouped[row.algorithm][row.case_id].append(value)
    return {
        algorithm: {case: float(np.mean(values)) for case, values in cases.items()}
        for algorithm, cases in grouped.items()
    }


def plot_mse_by_case(report: ExperimentReport, path: str | os.PathLike) -> None:
    """Case-level mean MSE per algorithm, cases on the x axis."""
    means = _case_means(report)
    case_ids = sorted({c for cases in means.values() for c in cases})
    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(case_ids) + 2), 4.0))
    x = np.arange(len(case_ids))
    for i, algorithm in enumerate(sorted(means)):
        y = [means[algorithm].get(c, np.nan) for c in case_ids]
        ax.plot(x, y, _MARKERS[i % len(_MARKERS)], label=algorithm, alpha=0.8)
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(case_ids, rotation=45, ha="right", fontsize=8)
    ax.set_xlabel("case")
    ax.set_ylabel("MSE (mean over repetitions)")
    ax.set_title(report.spec_name)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_mse_summary(report: ExperimentReport, path: str | os.PathLike) -> None:
    """Median case-level MSE per algorithm as a bar chart."""
    means = _case_means(report)
    algorithms = sorted(means)
    medians = [float(np.median(list(means[a].values()))) for a in algorithms]
    fig, ax = plt.subplots(figsize=(1.2 * len(algorithms) + 2, 4.0))
    ax.bar(np.arange(len(algorithms)), medians, color="tab:blue", alpha=0.8)
    ax.set_yscale("log")
    ax.set_xticks(np.arange(len(algorithms)))
    ax.set_xticklabels(algorithms)
    ax.set_ylabel("median case MSE")
    ax.set_title(report.spec_name)
    ax.grid(True, axis="y", which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(report: ExperimentReport, out_dir: str | os.PathLike) -> list[str]:
    """Write the standard figures into ``out_dir``; returns the paths.

    Skips rendering (returning an empty list) when no run has an MSE,
    which happens when the oracle is infeasible for every case.
    """
    if not _case_means(report):
        return []
    paths = []
    for name, renderer in (
        ("mse_by_case.png", plot_mse_by_case),
        ("mse_summary.png", plot_mse_summary),
    ):
        path = os.path.join(os.fspath(out_dir), name)
        renderer(report, path)
        paths.append(path)
    return paths
