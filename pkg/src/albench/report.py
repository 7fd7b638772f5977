"""Aggregated tables, learning-curve plots with SEM bands, and sweep figures.

The report CLI reads a runs directory laid out as
``<runs_dir>/<experiment-or-method>/repeat*/metrics.jsonl`` and compares the
experiments side by side.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from .errors import EmptyInputError
from .metrics import RATE_FIELDS, CurveAggregate, CycleMetrics, aggregate_sem

logger = logging.getLogger(__name__)

PANEL_LAYOUT = (
    ("minority_precision", "minority precision"),
    ("minority_recall", "minority recall"),
    ("majority_macro_precision", "majority macro precision"),
    ("majority_macro_recall", "majority macro recall"),
    ("overall_accuracy", "overall accuracy"),
)

SWEEP_PANELS = (
    ("delta_minority_recall", "minority recall delta"),
    ("delta_minority_precision", "minority precision delta"),
    ("delta_overall_accuracy", "accuracy delta"),
)


def read_metrics_jsonl(path: str | Path) -> list[CycleMetrics]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(CycleMetrics.from_dict(json.loads(line)))
    return out


def load_runs_tree(runs_dir: str | Path) -> dict[str, list[list[CycleMetrics]]]:
    """Collect per-experiment repeat curves from a runs directory."""
    runs_dir = Path(runs_dir)
    tree: dict[str, list[list[CycleMetrics]]] = {}
    for exp_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
        repeats = []
        for metrics_file in sorted(exp_dir.glob("repeat*/metrics.jsonl")):
            repeats.append(read_metrics_jsonl(metrics_file))
        if not repeats and (exp_dir / "metrics.jsonl").exists():
            repeats.append(read_metrics_jsonl(exp_dir / "metrics.jsonl"))
        if repeats:
            tree[exp_dir.name] = repeats
    return tree


def aggregate_runs_tree(
    tree: Mapping[str, Sequence[Sequence[CycleMetrics]]]
) -> dict[str, CurveAggregate]:
    return {label: aggregate_sem(runs) for label, runs in tree.items()}


def _write_table(aggregates: Mapping[str, CurveAggregate], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "cycle", "labeled_pool_size", "mean", "sem"])
        for label in sorted(aggregates):
            agg = aggregates[label]
            for name in RATE_FIELDS:
                for i, cycle in enumerate(agg.cycles):
                    writer.writerow(
                        [
                            label,
                            name,
                            cycle,
                            agg.labeled_pool_sizes[i],
                            f"{agg.mean[name][i]:.10g}",
                            f"{agg.sem[name][i]:.10g}",
                        ]
                    )


def _plot_curves(aggregates: Mapping[str, CurveAggregate], path: Path) -> None:
    fig, axes = plt.subplots(2, 3, figsize=(15, 8))
    flat = axes.ravel()
    for ax, (name, title) in zip(flat, PANEL_LAYOUT):
        for label in sorted(aggregates):
            agg = aggregates[label]
            x = np.asarray(agg.cycles)
            mean = np.asarray(agg.mean[name])
            sem = np.asarray(agg.sem[name])
            ax.plot(x, mean, marker="o", label=label)
            ax.fill_between(x, mean - sem, mean + sem, alpha=0.2)
        ax.set_title(title)
        ax.set_xlabel("cycle")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
    handles, labels = flat[0].get_legend_handles_labels()
    flat[-1].axis("off")
    flat[-1].legend(handles, labels, loc="center")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_sweep(sweep_rows: Sequence[Mapping], path: Path) -> None:
    methods = sorted({row["method"] for row in sweep_rows})
    counts = sorted({row["majority_count"] for row in sweep_rows})
    fig, axes = plt.subplots(1, len(SWEEP_PANELS), figsize=(5 * len(SWEEP_PANELS), 4))
    for ax, (name, title) in zip(np.atleast_1d(axes), SWEEP_PANELS):
        for method in methods:
            ys = [
                next(
                    float(row[name])
                    for row in sweep_rows
                    if row["method"] == method and row["majority_count"] == count
                )
                for count in counts
            ]
            ax.plot(counts, ys, marker="o", label=method)
        ax.axhline(0.0, color="gray", linewidth=0.8)
        ax.set_title(title)
        ax.set_xlabel("initial majority samples per class")
        ax.grid(alpha=0.3)
    np.atleast_1d(axes)[0].legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _summary(aggregates: Mapping[str, CurveAggregate]) -> dict:
    """Final-cycle values plus before/after deltas under both averaging
    windows (final cycle vs mean over post-AL cycles)."""
    out: dict = {}
    for label in sorted(aggregates):
        agg = aggregates[label]
        entry: dict = {"n_runs": agg.n_runs, "cycles": agg.cycles}
        if agg.single_run_warning:
            entry["warning"] = "single run: SEM is 0 by construction"
        final, deltas_final, deltas_mean = {}, {}, {}
        for name in RATE_FIELDS:
            series = agg.mean[name]
            final[name] = {"mean": series[-1], "sem": agg.sem[name][-1]}
            deltas_final[name] = series[-1] - series[0]
            if len(series) > 1:
                deltas_mean[name] = float(np.mean(series[1:]) - series[0])
            else:
                deltas_mean[name] = 0.0
        entry["final"] = final
        entry["delta_final_vs_initial"] = deltas_final
        entry["delta_mean_over_cycles_vs_initial"] = deltas_mean
        out[label] = entry
    return out


def emit_report(
    aggregates: Mapping[str, CurveAggregate],
    out_dir: str | Path,
    formats: Sequence[str] = ("csv", "png", "json"),
    sweep_rows: Sequence[Mapping] | None = None,
) -> list[Path]:
    """Write the comparison table, curve plots, optional sweep figure, and
    JSON summary. Fails before writing anything when there is no data.
    """
    if not aggregates:
        raise EmptyInputError("no aggregates to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    image_formats = [f for f in formats if f in ("png", "pdf", "svg")]
    if "csv" in formats:
        path = out_dir / "metrics_table.csv"
        _write_table(aggregates, path)
        written.append(path)
    for fmt in image_formats:
        path = out_dir / f"curves.{fmt}"
        _plot_curves(aggregates, path)
        written.append(path)
        if sweep_rows:
            sweep_path = out_dir / f"sweep.{fmt}"
            _plot_sweep(sweep_rows, sweep_path)
            written.append(sweep_path)
    if "json" in formats:
        path = out_dir / "summary.json"
        path.write_text(json.dumps(_summary(aggregates), indent=2, sort_keys=True))
        written.append(path)
    logger.info("report written to %s (%d files)", out_dir, len(written))
    return written
