"""Figure rendering for scenario bundles.

Two PNGs under figs/: a sqrt-scaled population heatmap over (index, time)
and a panel of the observable series.  Figures are diagnostics only and are
excluded from the bundle hash.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_figures(out_dir, result) -> list:
    figs_dir = Path(out_dir) / "figs"
    figs_dir.mkdir(parents=True, exist_ok=True)
    name = result.config["name"]
    written = [
        _population_heatmap(figs_dir / "populations.png", name,
                            result.times, result.populations),
        _observable_panel(figs_dir / "observables.png", name,
                          result.times, result.observables),
    ]
    return written


def _population_heatmap(path, name, times, pops):
    fig, ax = plt.subplots(figsize=(7, 4.2), constrained_layout=True)
    # sqrt scaling keeps faint sidebands visible next to the main peak
    img = ax.imshow(
        np.sqrt(pops.T),
        origin="lower",
        aspect="auto",
        extent=(times[0], times[-1], -0.5, pops.shape[1] - 0.5),
        cmap="magma",
        interpolation="nearest",
    )
    ax.set_xlabel("t")
    ax.set_ylabel("level index")
    ax.set_title(f"{name}: populations (sqrt scale)")
    fig.colorbar(img, ax=ax, label=r"$\sqrt{P_n}$")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _observable_panel(path, name, times, observables):
    fig, axes = plt.subplots(2, 2, figsize=(8.5, 5.5), sharex=True,
                             constrained_layout=True)
    panels = [
        ("fidelity", "return fidelity", axes[0, 0]),
        ("sigma_idx", "index width", axes[0, 1]),
        ("deltaE", "energy uncertainty", axes[1, 0]),
        ("participation", "participation ratio", axes[1, 1]),
    ]
    for key, label, ax in panels:
        ax.plot(times, observables[key], lw=0.9)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.suptitle(name)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
