"""Matplotlib rendering of simulation artifacts to files.

Figures are written headlessly (Agg) next to the delimited outputs.  PNG
metadata is stripped of timestamps so repeated runs are byte-identical.
"""

from __future__ import annotations

from typing import Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .localization import SweepMeasurement  # noqa: E402
from .ris import Codebook  # noqa: E402
from .scenario import ComparisonReport, HeatmapResult  # noqa: E402

_SAVE_KW = dict(dpi=150, metadata={"Date": None})


def save_heatmap_png(result: HeatmapResult, path: str, title: str = "SNR heatmap",
                     window_db: Optional[Tuple[float, float]] = None) -> None:
    xs, ys = result.grid.cell_coords()
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("dimgray")
    vmin, vmax = window_db if window_db else (None, None)
    im = ax.imshow(
        np.ma.masked_invalid(result.snr_db),
        origin="lower",
        extent=(xs.min(), xs.max(), ys.min(), ys.max()),
        aspect="equal",
        cmap=cmap,
        vmin=vmin,
        vmax=vmax,
    )
    fig.colorbar(im, ax=ax, label="SNR [dB]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", **_SAVE_KW)
    plt.close(fig)


def save_comparison_png(report: ComparisonReport, path: str,
                        title: str = "RIS kind comparison") -> None:
    n = len(report.labels)
    x = np.arange(n)
    means = [s.mean_snr_db for s in report.stats]
    mins = [s.min_snr_db for s in report.stats]
    maxs = [s.max_snr_db for s in report.stats]
    fig, ax = plt.subplots(figsize=(1.6 * n + 2.5, 4.2))
    ax.bar(x, means, width=0.55, color="steelblue", label="mean SNR")
    err_lo = [m - lo for m, lo in zip(means, mins)]
    err_hi = [hi - m for m, hi in zip(means, maxs)]
    ax.errorbar(x, means, yerr=[err_lo, err_hi], fmt="none", ecolor="black",
                capsize=4, label="min/max")
    ax.set_xticks(x)
    ax.set_xticklabels(report.labels, rotation=15)
    ax.set_ylabel("SNR over covered cells [dB]")
    ax.set_title(title)
    ax.grid(True, axis="y", linestyle=":", linewidth=0.8)
    ax.legend()
    fig.savefig(path, bbox_inches="tight", **_SAVE_KW)
    plt.close(fig)


def save_sweep_png(meas: SweepMeasurement, codebook: Codebook, path: str,
                   title: str = "Beam sweep RSS") -> None:
    rss = np.where(np.isfinite(meas.rss_dbm), meas.rss_dbm, np.nan)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(np.arange(len(codebook)), rss, marker="o", markersize=3, linewidth=1.0)
    if np.any(np.isfinite(rss)):
        best = int(np.nanargmax(rss))
        ax.axvline(best, color="crimson", linestyle="--", linewidth=1.0,
                   label=f"winner: index {best}")
        ax.legend()
    ax.set_xlabel("codeword index")
    ax.set_ylabel("RSS [dBm]")
    ax.set_title(title)
    ax.grid(True, linestyle=":", linewidth=0.8)
    fig.savefig(path, bbox_inches="tight", **_SAVE_KW)
    plt.close(fig)


def save_terrain_png(heightfield, path: str, title: str = "Terrain elevation") -> None:
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    im = ax.imshow(
        heightfield.elevations,
        origin="lower",
        extent=(heightfield.origin_x, heightfield.max_x,
                heightfield.origin_y, heightfield.max_y),
        aspect="equal",
        cmap="terrain",
    )
    fig.colorbar(im, ax=ax, label="elevation [m]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", **_SAVE_KW)
    plt.close(fig)
