"""Render run results to PNG figures alongside the plot-data files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_lateral_figure", "render_effort_figure", "render_switch_figure"]

_PNG_META = {"Software": "sharedsteer"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def render_lateral_figure(runs, path):
    """Lateral displacement vs time for each run, with the reference curves.

    runs: list of (label, trace) pairs sharing the same scenario references.
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    first = runs[0][1]
    ax.plot(first.t, first.r_A_y, "k--", lw=1.0, label="automation reference")
    if np.any(first.r_D_y != first.r_A_y):
        ax.plot(first.t, first.r_D_y, "k:", lw=1.2, label="driver reference")
    for label, trace in runs:
        ax.plot(trace.t, trace.y, lw=1.2, label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("lateral displacement y [m]")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    _save(fig, path)


def render_effort_figure(runs, path):
    """Driver command u_D vs time for each run."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, trace in runs:
        ax.plot(trace.t, trace.u_D, lw=1.2, label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("driver input u_D [rad]")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    _save(fig, path)


def render_switch_figure(trace, switch_index, path, half_window_s=1.0):
    """Zoom of u_D around the authority switch."""
    t_s = trace.t[1] - trace.t[0] if len(trace.t) > 1 else 1.0
    half = max(1, int(round(half_window_s / t_s)))
    lo = max(0, switch_index - half)
    hi = min(len(trace.t), switch_index + half + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(trace.t[lo:hi], trace.u_D[lo:hi], lw=1.4, label="u_D")
    ax.axvline(trace.t[switch_index], color="r", ls="--", lw=1.0, label="switch")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("driver input u_D [rad]")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    _save(fig, path)
