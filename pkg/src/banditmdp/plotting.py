"""Static SVG figures. Output bytes depend only on the data."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "svg.hashsalt": "banditmdp",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "legend.frameon": False,
    "figure.figsize": (5.0, 3.4),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _thin(x, y, max_points=2000):
    if x.size <= max_points:
        return x, y
    idx = np.unique(np.linspace(0, x.size - 1, max_points).astype(int))
    return x[idx], y[idx]


def line_plot(x, curves: dict, path, *, xlabel="", ylabel="", title="", logx=False, logy=False, marker=None):
    """One line per entry of ``curves`` (label -> y) against shared ``x``."""
    x = np.asarray(x, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            xs, ys = _thin(x, np.asarray(y, dtype=float))
            ax.plot(xs, ys, label=str(label), marker=marker)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if len(curves) > 1:
            ax.legend(fontsize=7, ncol=2)
        _save(fig, path)


def regret_plots(cumulative: dict, out_dir) -> list:
    """Cumulative global regret against ``t`` and against ``sqrt(t)``, one curve per seed."""
    from pathlib import Path

    out_dir = Path(out_dir)
    T = len(next(iter(cumulative.values())))
    t = np.arange(1, T + 1)
    labels = {f"seed {k}": v for k, v in cumulative.items()}
    a, b = out_dir / "regret_vs_t.svg", out_dir / "regret_vs_sqrt_t.svg"
    line_plot(t, labels, a, xlabel="t", ylabel="cumulative global regret")
    line_plot(np.sqrt(t), labels, b, xlabel="sqrt(t)", ylabel="cumulative global regret")
    return [a, b]


def diagnostic_plots(gaps: dict, rates: dict, out_dir) -> list:
    from pathlib import Path

    out_dir = Path(out_dir)
    T = len(next(iter(gaps.values())))
    t = np.arange(1, T + 1)
    a, b = out_dir / "nu_mu_gap.svg", out_dir / "change_rate.svg"
    line_plot(t, {f"seed {k}": v for k, v in gaps.items()}, a, xlabel="t", ylabel="||nu_t - mu_t||_1", logy=True)
    line_plot(t, {f"seed {k}": v for k, v in rates.items()}, b, xlabel="t", ylabel="||pi_{t+1} - pi_t||_{1,inf}")
    return [a, b]


def sweep_plot(T_values, mean_regret, path):
    T_values = np.asarray(T_values, dtype=float)
    ref = mean_regret[0] * np.sqrt(T_values / T_values[0])
    lin = mean_regret[0] * T_values / T_values[0]
    line_plot(T_values, {"mean regret": mean_regret, "sqrt(T) reference": ref, "linear reference": lin}, path,
              xlabel="T", ylabel="global regret", logx=True, logy=True, marker="o")
