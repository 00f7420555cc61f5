"""SVG figures for experiment summaries (headless, no display required)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "pca": dict(color="#444444", linestyle="--", marker="o", label="PCA"),
    "flat": dict(color="#1f77b4", linestyle=":", marker="s", label="leading-vector correction"),
    "sharp": dict(color="#d62728", linestyle="-", marker="^", label="joint correction"),
}

RC = {
    "svg.hashsalt": "optbias",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _band(ax, summary, config, metric, estimator):
    ps = [p for p in config.p_list if (p, estimator) in summary]
    if not ps:
        return
    mean = np.array([summary[(p, estimator)][metric][0] for p in ps])
    se = np.array([summary[(p, estimator)][metric][2] for p in ps])
    se = np.nan_to_num(se)
    style = STYLE[estimator]
    ax.plot(ps, mean, **style)
    ax.fill_between(ps, mean - 2 * se, mean + 2 * se, color=style["color"], alpha=0.2, linewidth=0)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def volatility_figure(summary: dict, config, path: str | Path) -> Path:
    """Realized minimum-variance volatility against p, with the true minimum."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for est in config.estimators:
            _band(ax, summary, config, "v_p", est)
        first = config.estimators[0]
        ps = [p for p in config.p_list if (p, first) in summary]
        ax.plot(ps, [summary[(p, first)]["sigma_min"][0] for p in ps], color="black",
                linewidth=1, label=r"true $\sigma_{\min}$")
        ax.set_xscale("log")
        ax.set_xlabel("dimension p")
        ax.set_ylabel("volatility (% annualized)")
        ax.legend()
        return _save(fig, Path(path))


def discrepancy_figure(summary: dict, config, path: str | Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for est in config.estimators:
            _band(ax, summary, config, "d_hat", est)
        ax.axhline(1.0, color="black", linewidth=0.8)
        ax.set_xscale("log")
        ax.set_xlabel("dimension p")
        ax.set_ylabel(r"discrepancy $\hat D_p$")
        ax.legend()
        return _save(fig, Path(path))
