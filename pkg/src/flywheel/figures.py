"""Matplotlib rendering of the sweep artifacts.

Figures are a view of the delimited outputs, written next to them; the CSV
files remain the canonical data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_wigner(grid, path, title=None):
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    mesh = ax.pcolormesh(grid.x_edges, grid.p_edges, grid.density.T,
                         cmap="inferno", rasterized=True)
    fig.colorbar(mesh, ax=ax, label=r"$W(x/x_0,\,p/p_0)$")
    ax.set_xlabel(r"$x/x_0$")
    ax.set_ylabel(r"$p/p_0$")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_profile(profile, path, title=None):
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(profile.u, profile.values, lw=1.2)
    ax.set_xlabel(r"$u$")
    ax.set_ylabel(r"$W(u)$")
    ax.set_xlim(0, profile.u[-1])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_populations(state, path, title=None):
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    n = np.arange(state.populations.size)
    ax.bar(n, state.populations, width=1.0)
    ax.set_xlabel(r"$n$")
    ax.set_ylabel(r"$p_n$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_coefficients(table, params, path):
    xs = table.x / params.x_scale
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.0))
    for ax, vals, label in zip(
        axes,
        (table.occupation, table.diffusion, params.mass * table.damping),
        (r"$\langle n\rangle_x$", r"$D(x)$", r"$m\gamma(x)$"),
    ):
        ax.plot(xs, vals, lw=1.2)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel(r"$x/x_0$")
        ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def voltage_figures(grid, profile, state, table, params, vdir):
    """Render the per-voltage panels next to their CSV sources."""
    vdir = Path(vdir)
    v = params.voltage
    return [
        plot_wigner(grid, vdir / "wigner.png", title=f"V = {v:g}"),
        plot_profile(profile, vdir / "profile.png", title=f"V = {v:g}"),
        plot_populations(state, vdir / "populations.png", title=f"V = {v:g}"),
        plot_coefficients(table, params, vdir / "coefficients.png"),
    ]


def summary_figures(reports, out_dir):
    """Sweep-level curves: coherence, entropy and extractable work vs voltage."""
    out_dir = Path(out_dir)
    reports = sorted(reports, key=lambda r: r.voltage)
    v = np.array([r.voltage for r in reports])
    written = []

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    g2 = [r.g2 for r in reports]
    mask = np.array([g is not None for g in g2])
    ax.plot(v[mask], np.array([g for g in g2 if g is not None]), "o-", ms=4)
    ax.axhline(2.0, color="gray", lw=0.6, ls="--")
    ax.axhline(1.0, color="gray", lw=0.6, ls="--")
    ax.set_xlabel("V")
    ax.set_ylabel(r"$g^{(2)}(0)$")
    fig.tight_layout()
    p = out_dir / "g2_vs_V.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(str(p))

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(v, [r.ergotropy for r in reports], "o-", ms=4, color="tab:red",
            label=r"$W_E$")
    ax.plot(v, [r.free_energy_work for r in reports], "s--", ms=4,
            color="tab:red", alpha=0.6, label=r"$W_F$")
    ax2 = ax.twinx()
    ax2.plot(v, [r.entropy for r in reports], "^-", ms=4, color="tab:blue",
             label=r"$S$")
    thresholds = [r.voltage for r in reports if r.above_threshold]
    if thresholds:
        ax.axvline(min(thresholds), color="k", lw=0.8, ls="-.")
    ax.set_xlabel("V")
    ax.set_ylabel("extractable work")
    ax2.set_ylabel("entropy (nats)", color="tab:blue")
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    p = out_dir / "work_vs_V.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(str(p))
    return written
