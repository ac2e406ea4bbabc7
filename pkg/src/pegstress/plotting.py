"""SVG figures for the report command.

Output is deterministic: a fixed hash salt and no date metadata, so the
same inputs give byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib import cbook  # noqa: E402

STYLE = {
    "svg.hashsalt": "pegstress",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

COIN_COLORS = {"usdt": "#2C7BB6", "usdc": "#1A9641", "dai": "#FDAE61"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def deviation_figure(series, path, title=None):
    """Daily peg deviation in percent; missing days show as gaps."""
    daily = series.daily()
    dev = (daily["price"] - 1.0) * 100.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 3.0))
        ax.plot(daily.index, dev.to_numpy(), lw=0.8, color=COIN_COLORS.get(series.coin_id, "k"),
                label=series.coin_id.upper())
        ax.axhline(0.0, color="0.5", lw=0.6, ls=":")
        ax.set_ylabel("deviation from $1 (%)")
        ax.set_title(title or f"{series.coin_id.upper()} peg deviation")
        ax.legend(loc="lower left", frameon=False)
        fig.autofmt_xdate()
        fig.tight_layout()
        _save(fig, path)


def improvement_boxplot(samples: dict, path, title="Peak deviation reduction, hybrid vs current"):
    """Boxplot of per-trial %ΔPeak per coin.  Returns matplotlib's box statistics."""
    labels = list(samples)
    data = [np.asarray(samples[k], dtype=float) for k in labels]
    box_stats = cbook.boxplot_stats(data, labels=[k.upper() for k in labels])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.bxp(box_stats, showfliers=False)
        ax.axhline(0.0, color="0.5", lw=0.6, ls=":")
        ax.set_ylabel("% reduction in peak deviation")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
    return box_stats
