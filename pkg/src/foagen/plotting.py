"""Figure rendering for the report paths. Uses the Agg backend so the CLI
never needs a display."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import SphereGrid  # noqa: E402


def plot_loss_curve(epochs, losses, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_doa_histogram(errors_deg, path: str | Path, bins: int = 36) -> None:
    errors_deg = np.asarray(errors_deg, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(errors_deg, bins=bins, range=(0.0, 180.0), color="tab:blue",
            edgecolor="white")
    ax.axvline(float(errors_deg.mean()), color="tab:red", ls="--",
               label=f"mean {errors_deg.mean():.1f}\N{DEGREE SIGN}")
    ax.set_xlabel("DoA error (degrees)")
    ax.set_ylabel("clips")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_embedding_scatter(gen_embed, ref_embed, path: str | Path) -> None:
    """Project both embedding sets onto the top two principal axes of the
    pooled data and scatter them."""
    gen = np.asarray(gen_embed, dtype=float)
    ref = np.asarray(ref_embed, dtype=float)
    pooled = np.concatenate([ref, gen], axis=0)
    centered = pooled - pooled.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ vt[:2].T
    n_ref = ref.shape[0]
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.scatter(proj[:n_ref, 0], proj[:n_ref, 1], s=12, alpha=0.6,
               label="reference", color="tab:gray")
    ax.scatter(proj[n_ref:, 0], proj[n_ref:, 1], s=12, alpha=0.6,
               label="generated", color="tab:orange")
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_power_map(power, grid: SphereGrid, path: str | Path) -> None:
    """Steered-power map over the grid, azimuth/elevation scatter in degrees."""
    power = np.asarray(power, dtype=float)
    az = np.degrees([p.azimuth for p in grid.points])
    el = np.degrees([p.elevation for p in grid.points])
    fig, ax = plt.subplots(figsize=(7, 4))
    sc = ax.scatter(az, el, c=power, s=14, cmap="viridis")
    peak = int(np.argmax(power))
    ax.scatter([az[peak]], [el[peak]], marker="x", s=80, color="tab:red",
               label="peak")
    ax.set_xlabel("azimuth (degrees)")
    ax.set_ylabel("elevation (degrees)")
    ax.set_xlim(-180, 180)
    ax.set_ylim(-90, 90)
    fig.colorbar(sc, ax=ax, label="steered power")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
