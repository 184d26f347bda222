"""SVG charts written next to the CSVs they plot."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from analytics.report import FactReport  # noqa: E402
from sensitivity.sobol import SobolIndices  # noqa: E402

LOGGER = logging.getLogger(__name__)

# Fixed salt and no date so identical inputs give byte-identical files.
plt.rcParams["svg.hashsalt"] = "lob-sim"
_SVG_METADATA = {"Date": None}

# Facts drawn with log axes.
_LOG_LOG = {"price_impact"}
_SCATTER = {"order_flow_imbalance", "price_impact"}


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    LOGGER.info("Wrote chart %s.", path)
    return path


def facts_panels(report: FactReport, path: Path) -> Path:
    """One panel per fact that carries a curve, titled with its verdict."""
    entries = [entry for entry in report if entry.curve]
    columns = 4
    rows = max(1, math.ceil(len(entries) / columns))
    fig, axes = plt.subplots(rows, columns, figsize=(4 * columns, 3 * rows), squeeze=False)
    for ax in axes.flat[len(entries):]:
        ax.set_visible(False)
    for ax, entry in zip(axes.flat, entries):
        frame = pd.DataFrame(entry.curve, columns=["x", "y", "series"])
        for series, group in frame.groupby("series", sort=True):
            if entry.name in _SCATTER:
                ax.scatter(group["x"], group["y"], s=6, label=series)
            else:
                ax.plot(group["x"], group["y"], linewidth=1.0, label=series)
        if entry.name in _LOG_LOG:
            ax.set_xscale("log")
            ax.set_yscale("log")
        verdict = "pass" if entry.passed else "fail"
        ax.set_title(f"{entry.name} ({verdict})", fontsize=9)
        ax.tick_params(labelsize=7)
    fig.tight_layout()
    return _save(fig, path)


def pov_bands(bands: pd.DataFrame, path: Path) -> Path:
    """Impact over time per participation rate, mean line with p10-p90 and ±1 std bands.

    ``bands`` holds columns ``impact``, ``lam``, ``time_s``, ``mean``, ``p10``,
    ``p90`` and ``std``.
    """
    kinds = sorted(bands["impact"].unique())
    fig, axes = plt.subplots(1, len(kinds), figsize=(6 * len(kinds), 4), squeeze=False)
    for ax, kind in zip(axes.flat, kinds):
        subset = bands[bands["impact"] == kind]
        for lam, group in subset.groupby("lam", sort=True):
            group = group.sort_values("time_s")
            (line,) = ax.plot(group["time_s"], group["mean"], linewidth=1.2, label=f"λ={lam:g}")
            ax.fill_between(group["time_s"], group["p10"], group["p90"], color=line.get_color(), alpha=0.15)
            ax.plot(group["time_s"], group["mean"] + group["std"], color=line.get_color(), linestyle=":", linewidth=0.7)
            ax.plot(group["time_s"], group["mean"] - group["std"], color=line.get_color(), linestyle=":", linewidth=0.7)
        ax.axhline(0.0, color="black", linewidth=0.5)
        ax.set_title(f"{kind} impact", fontsize=10)
        ax.set_xlabel("seconds after open")
        ax.set_ylabel("mid-price difference (ticks)")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def sobol_heatmap(indices: SobolIndices, path: Path, *, standardized: bool = True) -> Path:
    values = indices.standardized if standardized else indices.total
    fig, ax = plt.subplots(figsize=(1.2 * len(indices.criteria) + 2, 0.6 * len(indices.symbols) + 2))
    image = ax.imshow(np.ma.masked_invalid(values), cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(indices.criteria)), labels=indices.criteria, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(indices.symbols)), labels=indices.symbols, fontsize=8)
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            if np.isfinite(values[i, j]):
                ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center", fontsize=7, color="white")
    fig.colorbar(image, ax=ax, label="z-scored total index" if standardized else "total index")
    fig.tight_layout()
    return _save(fig, path)


def interaction_bars(table: pd.DataFrame, criteria: Sequence[str], path: Path) -> Path:
    """Group means of each interaction criterion as bar panels."""
    fig, axes = plt.subplots(1, len(criteria), figsize=(3.2 * len(criteria), 3.5), squeeze=False)
    labels = [str(label) for label in table.index]
    for ax, criterion in zip(axes.flat, criteria):
        ax.bar(range(len(labels)), table[criterion].to_numpy(dtype=float))
        ax.set_xticks(range(len(labels)), labels=labels, rotation=60, ha="right", fontsize=7)
        ax.set_title(criterion, fontsize=9)
    fig.tight_layout()
    return _save(fig, path)
