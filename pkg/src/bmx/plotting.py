"""Figure rendering for run reports, written next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import RunReport

_STYLES = {
    "abcd": dict(color="tab:blue", marker="o"),
    "abcd_cross": dict(color="tab:orange", marker="s"),
    "random_cross": dict(color="tab:green", marker="^"),
    "hosvd": dict(color="tab:red", marker="d"),
    "hosvd_square": dict(color="tab:purple", marker="x"),
    "abcdx": dict(color="tab:blue", marker="o"),
}


def render_report(report: RunReport, path) -> None:
    """Render median error curves with 10th-90th percentile bands.

    For round-based reports a second panel tracks the median selected
    row ranks (solid) and column ranks (dashed) per round.
    """
    table = report.percentile_table()
    algos = sorted({e["algo"] for e in table})
    with_ranks = report.group_label == "round"
    ncols = 2 if with_ranks else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6.0 * ncols, 4.2))
    ax_err = axes[0] if with_ranks else axes
    for algo in algos:
        entries = [e for e in table if e["algo"] == algo and "p50" in e]
        if not entries:
            continue
        groups = np.array([e["group"] for e in entries])
        p10 = np.array([e["p10"] for e in entries])
        p50 = np.array([e["p50"] for e in entries])
        p90 = np.array([e["p90"] for e in entries])
        style = _STYLES.get(algo, {})
        ax_err.plot(groups, p50, label=algo, markersize=3.5, linewidth=1.2, **style)
        ax_err.fill_between(groups, p10, p90, alpha=0.2, color=style.get("color"))
    ax_err.set_yscale("log")
    ax_err.set_xlabel(report.group_label)
    ax_err.set_ylabel("relative l2(H) error")
    ax_err.legend(fontsize=8)
    ax_err.grid(True, which="both", alpha=0.3)
    if with_ranks:
        ax_rank = axes[1]
        for algo in algos:
            if algo.startswith("hosvd"):
                continue
            entries = [e for e in table if e["algo"] == algo]
            groups = np.array([e["group"] for e in entries])
            ax_rank.plot(groups, [e["rank_I"] for e in entries], "-",
                         label=f"{algo} |I|", linewidth=1.2)
            ax_rank.plot(groups, [e["rank_J"] for e in entries], "--",
                         label=f"{algo} |J|", linewidth=1.2)
        ax_rank.set_xlabel(report.group_label)
        ax_rank.set_ylabel("median selected ranks")
        ax_rank.legend(fontsize=8)
        ax_rank.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
