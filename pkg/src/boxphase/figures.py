"""Figure rendering for experiment bundles.

Figures are written next to the CSV artifacts; the CSVs remain the primary,
lossless record and any external plotter can reproduce these views from them.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .adiabatic import berry_phase_closed_form
from .model import eigenenergy


def _save(fig, out_dir, name):
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, name), dpi=150)
    plt.close(fig)


def phase_map_figure(bundle, out_dir):
    rep = bundle.report
    cfg = bundle.cfg
    fig, axes = plt.subplots(1, 2, figsize=(9.2, 4.0), sharey=True)
    extent = [rep.grid_x[0], rep.grid_x[-1], rep.grid_y[0], rep.grid_y[-1]]
    shown = np.ma.masked_invalid(rep.phase_map.T)
    vmax = max(np.nanmax(np.abs(rep.phase_map)), 1e-3)
    for ax, data, title in ((axes[0], shown, "extracted local phase"),
                            (axes[1], rep.predicted_map.T, "predicted")):
        im = ax.imshow(data, origin="lower", extent=extent, aspect="auto",
                       cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.axhline(cfg.Ys, color="k", lw=0.8, ls="--")
        ax.set_xlabel("x")
        ax.set_title(title, fontsize=10)
    axes[0].set_ylabel("y")
    fig.colorbar(im, ax=axes, shrink=0.85, label="phase (rad)")
    fig.savefig(os.path.join(out_dir, "phase_map.png"), dpi=150)
    plt.close(fig)


def timeseries_figure(bundle, out_dir):
    rep = bundle.report
    cfg = bundle.cfg
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.5), sharex=True)
    axes[0].plot(rep.times, rep.norm_history - 1.0, lw=0.9)
    axes[0].set_ylabel("norm - 1")
    e0 = eigenenergy(cfg.mode(), cfg.box())
    axes[1].plot(rep.times, rep.energy_history - e0, lw=0.9)
    axes[1].set_ylabel(r"$\langle H\rangle - E_0$")
    axes[2].plot(rep.times, rep.gamma_history, lw=1.2, label="extracted")
    try:
        closed = berry_phase_closed_form(cfg.mode(), cfg.run_config())
        axes[2].axhline(closed, color="C3", lw=0.8, ls=":", label="sharp-kernel sweep value")
        axes[2].legend(fontsize=8)
    except Exception:
        pass
    axes[2].set_ylabel("open-path phase (rad)")
    axes[2].set_xlabel("t")
    _save(fig, out_dir, "timeseries.png")


def bound_figure(bundle, out_dir):
    header, rows = bundle.extra_tables["bound.csv"]
    arr = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(arr[:, 0], arr[:, 1], lw=1.0, label=r"max $|W_{mn}|$, $m\neq n$")
    ax.axhline(arr[0, 2], color="C3", ls="--", lw=0.9, label="analytic bound")
    ax.axhline(arr[0, 3], color="C2", ls=":", lw=0.9, label="bound + width slack")
    ax.set_xlabel("t")
    ax.set_ylabel("coupling magnitude")
    ax.legend(fontsize=8)
    _save(fig, out_dir, "bound.png")


def recurrence_figure(bundle, out_dir):
    header, rows = bundle.extra_tables["recurrence.csv"]
    arr = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    ax.stem(arr[:, 0], arr[:, 1], basefmt=" ", label="propagated")
    ax.plot(arr[:, 0], arr[:, 2], "C3x", ms=9, label="predicted")
    ax.set_xlabel("cycle k")
    ax.set_ylabel(r"$|\langle\Psi(t_0)|\Psi(t_0+k\tau)\rangle|$")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    _save(fig, out_dir, "recurrence.png")


def convergence_figure(bundle, out_dir):
    header, rows = bundle.extra_tables["convergence.csv"]
    arr = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    ax.semilogy(arr[:, 0], np.maximum(arr[:, 2], 1e-18), "o-", label="vs half dt")
    ax.semilogy(arr[:, 0], np.maximum(arr[:, 3], 1e-18), "s-", label="vs doubled modes")
    ax.set_xlabel("modes per direction")
    ax.set_ylabel("fidelity delta")
    ax.legend(fontsize=8)
    _save(fig, out_dir, "convergence.png")


def render_bundle(bundle, out_dir):
    if bundle.report is not None:
        phase_map_figure(bundle, out_dir)
        timeseries_figure(bundle, out_dir)
    if "bound.csv" in bundle.extra_tables:
        bound_figure(bundle, out_dir)
    if "recurrence.csv" in bundle.extra_tables:
        recurrence_figure(bundle, out_dir)
    if "convergence.csv" in bundle.extra_tables:
        convergence_figure(bundle, out_dir)
