"""SVG plots of experiment results."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# text stays text and ids are stable, so identical inputs give identical files
_RC = {"svg.fonttype": "none", "svg.hashsalt": "lmpgnn"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_mse(table, path, log_scale=False):
    """One line per method: MSE[t] averaged over non-diverged repetitions.

    Returns the names of the plotted methods.
    """
    plotted = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        t = table.test_start + np.arange(next(iter(table.mse.values())).shape[1])
        for m in table.methods:
            ok = table.mse[m][~table.diverged[m]]
            if ok.size:
                ax.plot(t, ok.mean(axis=0), label=m, linewidth=1.2)
                plotted.append(m)
        ax.set_xlabel("timestep t")
        if log_scale:
            ax.set_yscale("log")
            ax.set_ylabel("MSE[t] (log scale)")
        else:
            ax.set_ylabel("MSE[t]")
        ax.legend(loc="upper right", fontsize="small")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        _save(fig, path)
    return plotted


def plot_trace(table, path):
    """Prediction of each method against ground truth at the traced node (repetition 0)."""
    if table.truth_trace is None:
        raise FileNotFoundError("results have no ground-truth trace")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        t = table.test_start + np.arange(len(table.truth_trace))
        ax.plot(t, table.truth_trace, "k-", linewidth=2, label="ground truth")
        for m, tr in table.traces.items():
            if np.all(np.isfinite(tr)) and len(tr) == len(t):
                ax.plot(t, tr, linewidth=1, label=m)
        ax.set_xlabel("timestep t")
        ax.set_ylabel(f"signal at node {table.trace_node}")
        ax.legend(loc="best", fontsize="small")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        _save(fig, path)
