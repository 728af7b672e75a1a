"""Static figures and summary tables from tidy metrics and solver output.

All figures are SVG with fixed hash salts and no embedded timestamps, so
re-running a report reproduces the files byte for byte. Summary percentiles
use linear-interpolation quantiles (numpy's default).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "pcplod"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .data import fmt_float  # noqa: E402
from .errors import ConfigError  # noqa: E402
from .metrics import PatternModel, SparseEventTable  # noqa: E402

SVG_META = {"Date": None}

METHOD_COLORS = {"pcp": "#1f77b4", "pca": "#ff7f0e"}

TIDY_COLUMNS = (
    "p",
    "noise",
    "lod_quantile",
    "replicate",
    "method",
    "metric",
    "stratum",
    "value",
)


def _savefig(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)
    return path


def load_metrics(paths) -> pd.DataFrame:
    """Concatenate tidy metrics CSVs, checking the expected columns."""
    frames = []
    for path in paths:
        df = pd.read_csv(path)
        missing = set(TIDY_COLUMNS) - set(df.columns)
        if missing:
            raise ConfigError(f"{path}: missing tidy columns {sorted(missing)}")
        frames.append(df)
    if not frames:
        raise ConfigError("no metrics files given")
    return pd.concat(frames, ignore_index=True)


def write_summary_tables(df: pd.DataFrame, outdir) -> list[Path]:
    """Percentile tables (25th/50th/75th) per metric and stratum.

    Rows are (noise structure, method); columns hold one percentile triple
    per censoring level.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for (metric, stratum), sub in sorted(
        df.groupby(["metric", "stratum"]), key=lambda kv: kv[0]
    ):
        lods = sorted(sub["lod_quantile"].unique())
        rows = []
        for (noise, method), cell in sorted(sub.groupby(["noise", "method"])):
            row = {"noise": noise, "method": method}
            for lod in lods:
                vals = cell.loc[cell["lod_quantile"] == lod, "value"].to_numpy()
                if vals.size:
                    q25, q50, q75 = np.quantile(vals, [0.25, 0.5, 0.75])
                else:
                    q25 = q50 = q75 = np.nan
                tag = f"lod{int(round(lod * 100))}"
                row[f"{tag}_p25"] = fmt_float(q25)
                row[f"{tag}_p50"] = fmt_float(q50)
                row[f"{tag}_p75"] = fmt_float(q75)
            rows.append(row)
        out = outdir / f"summary_{metric}_{stratum}.csv"
        pd.DataFrame(rows).to_csv(out, index=False)
        written.append(out)
    return written


def _grouped_boxes(ax, sub: pd.DataFrame, lods, methods) -> None:
    width = 0.8 / max(len(methods), 1)
    for mi, method in enumerate(methods):
        positions, series = [], []
        for li, lod in enumerate(lods):
            vals = sub.loc[
                (sub["lod_quantile"] == lod) & (sub["method"] == method), "value"
            ].to_numpy()
            if vals.size:
                positions.append(li + (mi - (len(methods) - 1) / 2) * width)
                series.append(vals)
        if not series:
            continue
        boxes = ax.boxplot(
            series,
            positions=positions,
            widths=width * 0.9,
            patch_artist=True,
            manage_ticks=False,
        )
        color = METHOD_COLORS.get(method, f"C{mi}")
        for patch in boxes["boxes"]:
            patch.set_facecolor(color)
            patch.set_alpha(0.6)
        for med in boxes["medians"]:
            med.set_color("black")
    ax.set_xticks(range(len(lods)))
    ax.set_xticklabels([f"{int(round(l * 100))}% <LOD" for l in lods])


def plot_error_boxes(df: pd.DataFrame, path, metric: str = "rel_error") -> Path:
    """Box plots of a metric: one panel per noise structure, panel rows per
    stratum, grouped by censoring level and method."""
    sub = df[df["metric"] == metric]
    if sub.empty:
        raise ConfigError(f"no rows for metric '{metric}'")
    noises = sorted(sub["noise"].unique())
    strata = sorted(sub["stratum"].unique())
    lods = sorted(sub["lod_quantile"].unique())
    methods = sorted(sub["method"].unique())
    fig, axes = plt.subplots(
        len(strata),
        len(noises),
        figsize=(3.2 * len(noises), 2.8 * len(strata)),
        squeeze=False,
        sharey="row",
    )
    for si, stratum in enumerate(strata):
        for ni, noise in enumerate(noises):
            ax = axes[si][ni]
            cell = sub[(sub["noise"] == noise) & (sub["stratum"] == stratum)]
            _grouped_boxes(ax, cell, lods, methods)
            if si == 0:
                ax.set_title(f"{noise} noise")
            if ni == 0:
                ax.set_ylabel(f"{metric} ({stratum})")
    handles = [
        plt.Line2D([0], [0], color=METHOD_COLORS.get(m, f"C{i}"), lw=6, alpha=0.6)
        for i, m in enumerate(methods)
    ]
    fig.legend(handles, methods, loc="lower center", ncol=len(methods), frameon=False)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    return _savefig(fig, path)


def plot_patterns(model: PatternModel, column_names, path) -> Path:
    """Bar charts of the chemical loadings of each extracted component."""
    k = model.right_vectors.shape[1]
    p = len(column_names)
    fig, axes = plt.subplots(k, 1, figsize=(max(6.0, 0.3 * p), 2.0 * k), squeeze=False)
    for i in range(k):
        ax = axes[i][0]
        ax.bar(range(p), model.right_vectors[:, i], color="#1f77b4")
        ax.axhline(0.0, color="black", lw=0.8)
        ax.set_ylabel(f"component {i + 1}\n({model.explained_share[i] * 100:.1f}%)")
        ax.set_xticks(range(p))
        if i == k - 1:
            ax.set_xticklabels(column_names, rotation=90, fontsize=7)
        else:
            ax.set_xticklabels([])
    fig.tight_layout()
    return _savefig(fig, path)


def plot_sparse_events(table: SparseEventTable, column_names, path) -> Path:
    """Heat map of high/low/null sparse events.

    Rows (participants) are ordered by their total event count; no
    clustering is applied.
    """
    order = np.argsort(-(table.high_counts + table.low_counts), kind="stable")
    mat = table.classification[order]
    cmap = matplotlib.colors.ListedColormap(["#3b4cc0", "#ffffff", "#b40426"])
    fig, ax = plt.subplots(figsize=(max(6.0, 0.3 * len(column_names)), 6.0))
    ax.imshow(mat, aspect="auto", cmap=cmap, vmin=-1, vmax=1, interpolation="nearest")
    ax.set_xticks(range(len(column_names)))
    ax.set_xticklabels(column_names, rotation=90, fontsize=7)
    ax.set_ylabel("participants (sorted by event count)")
    fig.tight_layout()
    return _savefig(fig, path)


def write_sparse_table(table: SparseEventTable, path, max_events: int = 6) -> Path:
    """Participant counts cross-tabulated by low and high event counts.

    Rows are low-event counts 0..max_events then an overflow bucket; columns
    likewise for high events, with margin totals.
    """
    labels = [str(i) for i in range(max_events + 1)] + [f"{max_events + 1}+"]
    low = np.minimum(table.low_counts, max_events + 1)
    high = np.minimum(table.high_counts, max_events + 1)
    counts = np.zeros((max_events + 2, max_events + 2), dtype=int)
    for lo, hi in zip(low, high):
        counts[lo, hi] += 1
    frame = pd.DataFrame(counts, index=labels, columns=labels)
    frame.loc["total"] = frame.sum(axis=0)
    frame["total"] = frame.sum(axis=1)
    frame.index.name = "low_events\\high_events"
    frame.to_csv(path)
    return Path(path)
