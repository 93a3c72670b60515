"""Figures for regret tables.  Uses the Agg backend; never opens a window."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from truthsched.experiments import loglog_slope, mean_regret  # noqa: E402


def regret_figure(rows: Sequence[dict], path, title: str = "") -> Path:
    """Log-log plot of mean regret against T with the fitted slope."""
    means = mean_regret(rows)
    Ts = np.array(list(means), dtype=float)
    vals = np.array(list(means.values()))
    fig, ax = plt.subplots(figsize=(5, 4))
    pos = [(float(r["T"]), float(r["regret"])) for r in rows if float(r["regret"]) > 0]
    if pos:
        x, y = zip(*pos)
        ax.scatter(x, y, s=6, alpha=0.3, color="grey", label="per seed (positive)")
    ok = vals > 0
    ax.plot(Ts[ok], vals[ok], "o-", color="C0", label="mean")
    slope = loglog_slope(Ts, vals)
    if np.isfinite(slope):
        _, icpt = np.polyfit(np.log(Ts), np.log(vals), 1)
        ax.plot(Ts, np.exp(icpt) * Ts**slope, "--", color="C1", label=f"fit, slope {slope:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("regret")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
