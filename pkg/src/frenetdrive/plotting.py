"""Optional figures for CLI runs; rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_run(result, path) -> Path:
    """Driven path over the route plus speed and mode against time."""
    path = Path(path)
    h = result.ego_history
    ref = result.route.ref if result.route is not None else None
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 7), gridspec_kw={"height_ratios": [3, 2]})
    if ref is not None:
        ax0.plot(ref.x, ref.y, color="0.7", lw=1, label="reference")
    ax0.plot(h[:, 1], h[:, 2], color="C0", lw=2, label="ego")
    for ev in result.events:
        ax0.plot(*ev.position, "rx", ms=9)
    ax0.set_aspect("equal", adjustable="datalim")
    ax0.set_xlabel("x [m]")
    ax0.set_ylabel("y [m]")
    ax0.legend(loc="best")
    ax1.plot(h[:, 0], h[:, 4], color="C0")
    ax1.set_xlabel("t [s]")
    ax1.set_ylabel("v [m/s]")
    m = result.metrics
    ax0.set_title(f"{m.termination}: completion {m.route_completion:.1f}%, score {m.driving_score:.1f}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_fan(rows, mode: str, path) -> Path:
    """One line per candidate: position and velocity against time."""
    path = Path(path)
    rows = np.asarray(rows, dtype=float)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    for cid in np.unique(rows[:, 0]):
        r = rows[rows[:, 0] == cid]
        ax0.plot(r[:, 1], r[:, 2], lw=0.7, color="C0", alpha=0.6)
        ax1.plot(r[:, 1], r[:, 3], lw=0.7, color="C1", alpha=0.6)
    label = "d [m]" if mode == "lateral" else "s [m]"
    ax0.set_xlabel("t [s]")
    ax0.set_ylabel(label)
    ax1.set_xlabel("t [s]")
    ax1.set_ylabel("d_dot [m/s]" if mode == "lateral" else "s_dot [m/s]")
    fig.suptitle(f"{mode} candidates ({len(np.unique(rows[:, 0]))})")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
