"""Figure rendering for experiment results (written to files, never shown)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import LearningCurve  # noqa: E402

LABELS = {"full": "Full-rank LMS", "jio": "JIO-LMS", "krylov": "Krylov LMS",
          "mmse": "MMSE", "oracle": "MMSE receiver (true channel)"}
STYLES = {"full": dict(color="tab:blue", marker="o"),
          "jio": dict(color="tab:red", marker="s"),
          "krylov": dict(color="tab:green", marker="^"),
          "mmse": dict(color="black", linestyle="--", marker=None),
          "oracle": dict(color="black", linestyle=":", marker=None)}

RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.6),
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keep output files identical across runs
    "svg.hashsalt": "reducedrank",
}


def plot_curve(curve: LearningCurve, path: str | Path, title: str | None = None) -> Path:
    path = Path(path)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        every = max(1, len(curve.x) // 12)
        for name, col in curve.columns.items():
            style = dict(STYLES.get(name, {}))
            if style.get("marker"):
                style["markevery"] = every
                style["markersize"] = 4
            ax.plot(curve.x, col, label=LABELS.get(name, name), linewidth=1.2, **style)
        ax.set_xlabel("Rank (D)" if curve.x_name == "rank" else "Number of received symbols")
        if curve.metric == "ber":
            ax.set_yscale("log")
            ax.set_ylabel("BER")
        else:
            ax.set_ylabel("MSE (dB)")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
