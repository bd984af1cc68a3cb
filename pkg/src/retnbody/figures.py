"""Figure rendering for run reports.

Figures are written next to the delimited outputs: an x-y view of the
committed trajectories and a stacked diagnostics panel (operator
determinants, pair proximity, speeds) over time.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_trajectory_figure(result, out_dir) -> Path:
    history = result.history
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    times = history.committed_times
    for j, charge in enumerate(history.charges):
        r = history.committed_r[:, j]
        label = charge.label or f"charge {j}"
        (line,) = ax.plot(r[:, 0], r[:, 1], label=f"{label} (q={charge.q:g})")
        if len(times):
            ax.plot(r[0, 0], r[0, 1], "o", color=line.get_color(), ms=5)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"trajectories to t = {result.t_max:g} ({result.terminator.kind})")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    path = Path(out_dir) / "trajectory.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_diagnostics_figure(result, out_dir) -> Path:
    diag = result.diagnostics
    labels = [ch.label or f"charge {j}" for j, ch in enumerate(result.history.charges)]
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 7.0), sharex=True)
    t = diag.times
    for j, label in enumerate(labels):
        axes[0].plot(t, diag.det_phi[:, j], label=label)
    axes[0].axhline(result.config.det_floor, color="k", ls=":", lw=0.8)
    axes[0].set_ylabel("det of accel operator")
    axes[0].legend(fontsize=8)
    finite = np.isfinite(diag.min_rho)
    if finite.any():
        axes[1].plot(t[finite], diag.min_rho[finite], color="tab:red")
        axes[1].set_yscale("log")
    axes[1].set_ylabel("min retarded separation")
    c = result.history.constants.c
    for j, label in enumerate(labels):
        axes[2].plot(t, diag.speeds[:, j] / c, label=label)
    axes[2].axhline(result.config.v_cap, color="k", ls=":", lw=0.8)
    axes[2].set_ylabel("speed / c")
    axes[2].set_xlabel("t")
    fig.align_ylabels(axes)
    path = Path(out_dir) / "diagnostics.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_run_figures(result, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [render_trajectory_figure(result, out_dir),
            render_diagnostics_figure(result, out_dir)]
