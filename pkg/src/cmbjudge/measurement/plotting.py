"""Render a power trace to an image file next to the CSV/JSON reports."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .trace import PowerTrace


def plot_trace(
    trace: PowerTrace,
    path: str | Path,
    *,
    window: Optional[tuple[float, float]] = None,
    title: str = "Power trace",
) -> Path:
    """One line per rail; the measured window, when given, is shaded."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ts = [s.t for s in trace.samples]
    for rail in trace.rails:
        ax.plot(ts, [s.watts_per_rail[rail] for s in trace.samples], label=rail, linewidth=1.2)
    if window is not None:
        ax.axvspan(window[0], window[1], color="0.85", zorder=0, label="measured window")
    ax.set_xlabel("time (s, monotonic clock)")
    ax.set_ylabel("power (W)")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
