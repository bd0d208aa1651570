"""Optional PNG figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_violation_report(report: dict, path) -> Path:
    """Outcome counts and, when available, the post-recurrence tube ratios."""
    plt = _pyplot()
    per = report.get("per_replica")
    fig, axes = plt.subplots(1, 2 if per else 1, figsize=(9 if per else 4.5, 3.5), squeeze=False)
    ax = axes[0, 0]
    names = list(report["counts"])
    ax.bar(names, [report["counts"][k] for k in names], color=["tab:orange", "tab:green", "tab:red"])
    ax.set_ylabel("replicas")
    ax.set_title(f"violation {report['violation_fraction']:.3f}")
    if per:
        ax = axes[0, 1]
        ratios = [p["max_tube_ratio_post"] for p in per]
        ax.hist(ratios, bins=40, color="tab:blue")
        ax.axvline(1.0, color="k", ls="--", lw=1)
        ax.set_xlabel("max tube ratio after recurrence")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_escape_sweep(stats: dict, path) -> Path:
    """Log mean escape time against beta with the fitted line."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    b = np.array([x for x, y in zip(stats["betas"], stats["log_mean_escape"]) if y is not None])
    y = np.array([y for y in stats["log_mean_escape"] if y is not None])
    ax.plot(b, y, "o", label="Monte Carlo")
    reg = stats.get("regression")
    if reg:
        ax.plot(b, reg["intercept"] + reg["slope"] * b, "-", label=f"slope {reg['slope']:.3f}")
    ax.set_xlabel("beta")
    ax.set_ylabel("log mean escape time")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
