"""Static SVG charts for evaluation reports.

Uses the object-oriented matplotlib API (no pyplot global state) and pins the
SVG id salt and metadata so identical data renders to identical bytes.
"""
from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

STYLE = {
    "svg.hashsalt": "sentio",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}

COLORS = {"net_worth": "#1f77b4", "balance": "#2ca02c", "profit": "#d62728", "baseline": "#7f7f7f"}


def _figure(nrows=1, width=7.0, height=3.2):
    fig = Figure(figsize=(width, height * nrows))
    axes = fig.subplots(nrows, 1, squeeze=False)[:, 0]
    return fig, axes


def _save(fig, path):
    with matplotlib.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def plot_episode_lines(path, net_worth, profit, title=""):
    """Final net worth and profit per evaluation episode."""
    with matplotlib.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(2)
        x = range(1, len(net_worth) + 1)
        ax1.plot(x, net_worth, color=COLORS["net_worth"], marker=".", gid="net_worth")
        ax1.set_ylabel("final net worth ($)")
        ax1.set_title(title)
        ax2.plot(x, profit, color=COLORS["profit"], marker=".", gid="profit")
        ax2.axhline(0.0, color="black", lw=0.6)
        ax2.set_ylabel("profit ($)")
        ax2.set_xlabel("episode")
    return _save(fig, path)


def plot_timeseries(path, net_worth, balance, profit, title=""):
    """Within-episode net worth, cash balance and cumulative profit."""
    with matplotlib.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(2)
        ax1.plot(net_worth, color=COLORS["net_worth"], label="net worth", gid="net_worth")
        ax1.plot(balance, color=COLORS["balance"], label="balance", gid="balance")
        ax1.set_ylabel("$")
        ax1.legend(loc="best")
        ax1.set_title(title)
        ax2.plot(profit, color=COLORS["profit"], gid="profit")
        ax2.axhline(0.0, color="black", lw=0.6)
        ax2.set_ylabel("cumulative profit ($)")
        ax2.set_xlabel("step")
    return _save(fig, path)


def plot_boxplot(path, net_worth, profit, title=""):
    with matplotlib.rc_context(STYLE):
        fig, axes = _figure(1, height=3.6)
        ax = axes[0]
        # linear-interpolated quartiles, whiskers at 1.5 IQR
        ax.boxplot([net_worth, profit], whis=1.5)
        ax.set_xticks([1, 2], ["final net worth", "profit"])
        ax.set_ylabel("$")
        ax.set_title(title)
    return _save(fig, path)


def plot_comparison(path, series: dict, title=""):
    """Overlay several net-worth curves, e.g. agent vs. buy-and-hold."""
    with matplotlib.rc_context(STYLE):
        fig, axes = _figure(1, height=3.6)
        ax = axes[0]
        for name, values in series.items():
            ax.plot(values, label=name, gid=name, color=COLORS.get(name))
        ax.set_xlabel("step")
        ax.set_ylabel("net worth ($)")
        ax.legend(loc="best")
        ax.set_title(title)
    return _save(fig, path)
