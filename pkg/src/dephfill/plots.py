"""Figure rendering for run and analysis reports.

Figures are written next to the delimited output files; everything uses the
Agg backend so the CLI works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from dephfill.adiabatic import continuum_profile
from dephfill.analysis import ExponentTrace
from dephfill.trajectory import DensityTrajectory


def save_trajectory_figure(trajs, path, labels=None, guides=(0.5, 1.0)) -> None:
    """Log-log N(t) curves with power-law guide lines t^nu."""
    if isinstance(trajs, DensityTrajectory):
        trajs = [trajs]
    if labels is None:
        labels = [f"run {k}" for k in range(len(trajs))]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    t_hi = 0.0
    for traj, label in zip(trajs, labels):
        mask = (traj.times > 0) & (traj.total_number > 0)
        ax.loglog(traj.times[mask], traj.total_number[mask], label=label)
        if mask.any():
            t_hi = max(t_hi, traj.times[mask][-1])
    if t_hi > 0:
        ref = trajs[0]
        mask = (ref.times > 0) & (ref.total_number > 0)
        if mask.any():
            t_mid = ref.times[mask][mask.sum() // 2]
            N_mid = ref.total_number[mask][mask.sum() // 2]
            tg = np.geomspace(t_mid, t_hi, 32)
            for nu in guides:
                ax.loglog(tg, N_mid * (tg / t_mid) ** nu, "k--", lw=0.8, alpha=0.6)
                ax.annotate(f"$t^{{{nu:g}}}$", (tg[-1], N_mid * (tg[-1] / t_mid) ** nu),
                            fontsize=8, ha="left")
    ax.set_xlabel("t  [1/J]")
    ax.set_ylabel("N(t)")
    if len(trajs) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_collapse_figure(traj: DensityTrajectory, times, path,
                         alpha1: float | None = None) -> None:
    """Density snapshots against the rescaled coordinate x = i / sqrt(t)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    x_hi = 0.0
    for t in times:
        t_actual, profile = traj.snapshot(float(t))
        if t_actual <= 0:
            continue
        x = np.arange(1, traj.L + 1) / math.sqrt(t_actual)
        ax.plot(x, profile, lw=1.0, label=f"t = {t_actual:g}")
        occupied = profile > 1e-3
        if occupied.any():
            x_hi = max(x_hi, float(x[occupied][-1]))
    if alpha1 is not None and x_hi > 0:
        xg = np.linspace(0.0, 1.3 * x_hi, 200)
        # rescaling removes t: n = 1 - erf(x / sqrt(4 alpha1))
        ax.plot(xg, continuum_profile(xg, 1.0, alpha1), "k--", lw=1.2,
                label="erf profile")
    if x_hi > 0:
        ax.set_xlim(0, 1.3 * x_hi)
    ax.set_xlabel(r"$i/\sqrt{t}$")
    ax.set_ylabel(r"$n_i(t)$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_exponent_figure(trace: ExponentTrace, path) -> None:
    """Local growth exponent nu(t) on a log time axis."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.semilogx(trace.times, trace.nu, lw=1.2)
    ax.axhline(0.5, color="k", ls="--", lw=0.8, alpha=0.6)
    ax.axhline(1.0, color="k", ls=":", lw=0.8, alpha=0.6)
    ax.set_ylim(-0.1, 1.6)
    ax.set_xlabel("t  [1/J]")
    ax.set_ylabel(r"$\nu(t) = d\ln N / d\ln t$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
